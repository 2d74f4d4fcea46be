#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ovmm/grid.hpp"
#include "ovmm/robot.hpp"
#include "ovmm/semantic_map.hpp"

namespace ovmm {

inline constexpr double kUnreachable = std::numeric_limits<double>::infinity();

/// Inclusive cell rectangle.
struct CellBox {
  int r0 = 0;
  int c0 = 0;
  int r1 = -1;
  int c1 = -1;

  bool contains(Cell c) const { return c.row >= r0 && c.row <= r1 && c.col >= c0 && c.col <= c1; }
  void expand(Cell c);
  CellBox padded(int pad, int rows, int cols) const;
  bool empty() const { return r1 < r0 || c1 < c0; }
};

struct DistanceField {
  Grid<double> values;  // meters; kUnreachable where no path exists
  std::vector<Cell> goals;
  double cell_size = kCellSize;

  double at(Cell c) const { return values.in_bounds(c) ? values[c] : kUnreachable; }
  bool reachable(Cell c) const { return at(c) < kUnreachable; }
};

/// First-order upwind Fast Marching on the 4-connected grid, multi-source
/// from `goals`. Goals on non-traversable cells are ignored; an error is
/// raised if none remain. When `window` is given, cells outside it are
/// treated as obstacles.
DistanceField fmm_distance_field(const BinaryGrid& traversable, std::span<const Cell> goals,
                                 double cell_size = kCellSize,
                                 const std::optional<CellBox>& window = std::nullopt);

/// Explored, traversable cells 4-adjacent to an unexplored cell, row-major order.
std::vector<Cell> frontier_cells(const BinaryGrid& explored, const BinaryGrid& traversable);

/// Frontier cell with the smallest geodesic distance from `robot` among those
/// at least `min_distance` away; ties go to the first cell in row-major order.
Cell select_frontier_goal(const BinaryGrid& explored, const BinaryGrid& traversable, Cell robot,
                          double min_distance = 0.0, double cell_size = kCellSize,
                          const std::optional<CellBox>& window = std::nullopt);

enum class NavRule { ObjectCooccurrence, StartReceptacle, Frontier, GoalReceptacle };
std::string to_string(NavRule r);

struct NavGoalDecision {
  NavRule rule = NavRule::Frontier;
  std::vector<Cell> goal_cells;
};

enum class TaskPhase { FindObject, FindReceptacle };

struct NavChannels {
  int object = 0;
  int start_receptacle = 1;
  int goal_receptacle = 2;
};

struct NavGoalParams {
  double past_exclusion_radius = 1.0;
  int cooccurrence_dilation = 1;  // receptacle cells grown by this many cells before intersecting
  double min_frontier_distance = 0.0;
};

/// FindObject: rule 1 object/start-receptacle co-occurrence, rule 2 start
/// receptacle away from visited places, rule 3 nearest frontier.
/// FindReceptacle: goal receptacle cells, else nearest frontier.
NavGoalDecision select_nav_goal(const SemanticMap& map, TaskPhase phase, Cell robot,
                                const BinaryGrid& traversable, const NavChannels& channels = {},
                                const NavGoalParams& params = {},
                                const std::optional<CellBox>& window = std::nullopt);

/// Nearest traversable cells to a goal set: the goal set grown ring by ring
/// (Chebyshev) until it meets traversable cells. Empty if none within `max_rings`.
std::vector<Cell> project_goals(std::span<const Cell> goals, const BinaryGrid& traversable,
                                int max_rings = 40);

enum class ActionSpace { Discrete, Continuous };

struct PlannerParams {
  double lookahead = 0.25;
  double turn_increment = 30.0 * std::numbers::pi / 180.0;
  double waypoint_reach = 0.5;
};

/// One descent step on the distance field. Returns Stop when no motion lowers
/// the distance any further. Throws "goal unreachable" when the robot cell has
/// no finite distance.
Action plan_step(const DistanceField& field, const Pose2& pose, ActionSpace space,
                 const GridFrame& frame, const PlannerParams& params = {});

/// True when the decision targets a real goal (not a frontier), the robot is
/// within `stop_radius` of one of its cells and the goal is currently visible.
bool nav_stop_condition(const NavGoalDecision& decision, Vec2 robot, const GridFrame& frame,
                        bool goal_visible, double stop_radius = 0.65);

}  // namespace ovmm
