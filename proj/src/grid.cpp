#include "ovmm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace ovmm {

std::size_t count_set(const BinaryGrid& g) {
  return static_cast<std::size_t>(std::count_if(g.raw().begin(), g.raw().end(),
                                                [](std::uint8_t v) { return v != 0; }));
}

BinaryGrid dilate_chebyshev(const BinaryGrid& g, int radius) {
  if (radius <= 0) return g;
  const int rows = g.rows();
  const int cols = g.cols();
  // Separable: a square element is a row pass followed by a column pass.
  BinaryGrid horiz(rows, cols, 0);
  for (int r = 0; r < rows; ++r) {
    int last = -1000000;
    for (int c = 0; c < cols; ++c) {
      if (g(r, c)) last = c;
      if (c - last <= radius) horiz(r, c) = 1;
    }
    last = 1000000;
    for (int c = cols - 1; c >= 0; --c) {
      if (g(r, c)) last = c;
      if (last - c <= radius) horiz(r, c) = 1;
    }
  }
  BinaryGrid out(rows, cols, 0);
  for (int c = 0; c < cols; ++c) {
    int last = -1000000;
    for (int r = 0; r < rows; ++r) {
      if (horiz(r, c)) last = r;
      if (r - last <= radius) out(r, c) = 1;
    }
    last = 1000000;
    for (int r = rows - 1; r >= 0; --r) {
      if (horiz(r, c)) last = r;
      if (last - r <= radius) out(r, c) = 1;
    }
  }
  return out;
}

BinaryGrid dilate_disk(const BinaryGrid& g, double radius) {
  if (radius <= 0.0) return g;
  const int reach = static_cast<int>(std::floor(radius));
  std::vector<std::pair<int, int>> offsets;
  for (int dr = -reach; dr <= reach; ++dr) {
    for (int dc = -reach; dc <= reach; ++dc) {
      if (dr * dr + dc * dc <= radius * radius) offsets.emplace_back(dr, dc);
    }
  }
  BinaryGrid out(g.rows(), g.cols(), 0);
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      if (!g(r, c)) continue;
      for (const auto& [dr, dc] : offsets) {
        if (out.in_bounds(r + dr, c + dc)) out(r + dr, c + dc) = 1;
      }
    }
  }
  return out;
}

BinaryGrid largest_component(const BinaryGrid& g) {
  const int rows = g.rows();
  const int cols = g.cols();
  Grid<int> label(rows, cols, -1);
  std::vector<std::size_t> sizes;
  std::deque<Cell> queue;
  constexpr int dr[4] = {1, -1, 0, 0};
  constexpr int dc[4] = {0, 0, 1, -1};
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (!g(r, c) || label(r, c) >= 0) continue;
      const int id = static_cast<int>(sizes.size());
      std::size_t n = 0;
      label(r, c) = id;
      queue.push_back({r, c});
      while (!queue.empty()) {
        const Cell cur = queue.front();
        queue.pop_front();
        ++n;
        for (int k = 0; k < 4; ++k) {
          const int nr = cur.row + dr[k];
          const int nc = cur.col + dc[k];
          if (g.in_bounds(nr, nc) && g(nr, nc) && label(nr, nc) < 0) {
            label(nr, nc) = id;
            queue.push_back({nr, nc});
          }
        }
      }
      sizes.push_back(n);
    }
  }
  BinaryGrid out(rows, cols, 0);
  if (sizes.empty()) return out;
  const int best = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  for (std::size_t i = 0; i < out.size(); ++i) out.raw()[i] = label.raw()[i] == best ? 1 : 0;
  return out;
}

Grid<int> bfs_hops(const BinaryGrid& passable, std::span<const Cell> sources) {
  Grid<int> hops(passable.rows(), passable.cols(), -1);
  std::deque<Cell> queue;
  for (const Cell& s : sources) {
    if (passable.in_bounds(s) && passable[s] && hops[s] < 0) {
      hops[s] = 0;
      queue.push_back(s);
    }
  }
  constexpr int dr[4] = {1, -1, 0, 0};
  constexpr int dc[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const Cell cur = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const Cell n{cur.row + dr[k], cur.col + dc[k]};
      if (passable.in_bounds(n) && passable[n] && hops[n] < 0) {
        hops[n] = hops[cur] + 1;
        queue.push_back(n);
      }
    }
  }
  return hops;
}

RunLength rle_encode(const BinaryGrid& g) {
  RunLength out;
  out.rows = g.rows();
  out.cols = g.cols();
  if (g.empty()) return out;
  const auto& d = g.raw();
  out.first = d[0] ? 1 : 0;
  std::uint8_t cur = out.first;
  std::uint32_t run = 0;
  for (std::uint8_t v : d) {
    const std::uint8_t b = v ? 1 : 0;
    if (b == cur) {
      ++run;
    } else {
      out.runs.push_back(run);
      cur = b;
      run = 1;
    }
  }
  out.runs.push_back(run);
  return out;
}

BinaryGrid rle_decode(const RunLength& rle) {
  BinaryGrid g(rle.rows, rle.cols, 0);
  std::size_t total = std::accumulate(rle.runs.begin(), rle.runs.end(), std::size_t{0});
  if (total != g.size()) throw Error("run-length payload does not match grid dimensions");
  std::size_t pos = 0;
  std::uint8_t cur = rle.first ? 1 : 0;
  for (std::uint32_t run : rle.runs) {
    std::fill_n(g.raw().begin() + static_cast<std::ptrdiff_t>(pos), run, cur);
    pos += run;
    cur ^= 1;
  }
  return g;
}

}  // namespace ovmm
