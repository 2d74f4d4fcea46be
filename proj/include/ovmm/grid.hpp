#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <vector>

#include "ovmm/common.hpp"

namespace ovmm {

struct Cell {
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Dense row-major 2D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(checked(rows)), cols_(checked(cols)), data_(static_cast<std::size_t>(rows) * cols, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool in_bounds(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }
  bool in_bounds(Cell c) const { return in_bounds(c.row, c.col); }

  std::size_t index(int r, int c) const {
    assert(in_bounds(r, c));
    return static_cast<std::size_t>(r) * cols_ + c;
  }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](Cell c) { return (*this)(c.row, c.col); }
  const T& operator[](Cell c) const { return (*this)(c.row, c.col); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static int checked(int n) {
    if (n < 0) throw Error("grid dimensions must be nonnegative");
    return n;
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using BinaryGrid = Grid<std::uint8_t>;

/// Maps world meters to grid cells. Row index grows with y, column with x.
struct GridFrame {
  Vec2 origin;  // world position of the lower-left corner of cell (0, 0)
  double cell_size = kCellSize;

  Cell to_cell(Vec2 p) const {
    return {static_cast<int>(std::floor((p.y - origin.y) / cell_size)),
            static_cast<int>(std::floor((p.x - origin.x) / cell_size))};
  }
  Vec2 center(Cell c) const {
    return {origin.x + (c.col + 0.5) * cell_size, origin.y + (c.row + 0.5) * cell_size};
  }
  friend bool operator==(const GridFrame&, const GridFrame&) = default;
};

std::size_t count_set(const BinaryGrid& g);

/// Dilates set cells by a square (Chebyshev) structuring element of the given radius.
BinaryGrid dilate_chebyshev(const BinaryGrid& g, int radius);

/// Dilates set cells by a disc: every cell whose center lies within `radius`
/// cells (Euclidean) of a set cell's center.
BinaryGrid dilate_disk(const BinaryGrid& g, double radius);

/// Keeps only the largest 4-connected component of set cells. Ties pick the
/// component containing the lowest row-major index.
BinaryGrid largest_component(const BinaryGrid& g);

/// 4-connected BFS hop counts from the given sources over set cells of `passable`.
/// Unreached cells hold -1.
Grid<int> bfs_hops(const BinaryGrid& passable, std::span<const Cell> sources);

/// Run-length encoding of a row-major bitstring: first bit value plus alternating run lengths.
struct RunLength {
  int rows = 0;
  int cols = 0;
  std::uint8_t first = 0;
  std::vector<std::uint32_t> runs;
  friend bool operator==(const RunLength&, const RunLength&) = default;
};

RunLength rle_encode(const BinaryGrid& g);
BinaryGrid rle_decode(const RunLength& rle);

}  // namespace ovmm
