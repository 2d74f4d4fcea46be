#include "ovmm/navigation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

namespace ovmm {
namespace {

constexpr int kDr[4] = {-1, 1, 0, 0};
constexpr int kDc[4] = {0, 0, -1, 1};

bool passable(const BinaryGrid& trav, const std::optional<CellBox>& window, Cell c) {
  return trav.in_bounds(c) && trav[c] && (!window || window->contains(c));
}

// Upwind quadratic update from the smallest horizontal (a) and vertical (b) neighbors.
double eikonal_update(double a, double b, double h) {
  if (a > b) std::swap(a, b);
  if (b == kUnreachable || b - a >= h) return a + h;
  const double diff = a - b;
  return 0.5 * (a + b + std::sqrt(2.0 * h * h - diff * diff));
}

std::vector<Cell> cells_of(const BinaryGrid& g) {
  std::vector<Cell> out;
  for (int r = 0; r < g.rows(); ++r) {
    for (int c = 0; c < g.cols(); ++c) {
      if (g(r, c)) out.push_back({r, c});
    }
  }
  return out;
}

}  // namespace

void CellBox::expand(Cell c) {
  if (empty()) {
    *this = {c.row, c.col, c.row, c.col};
    return;
  }
  r0 = std::min(r0, c.row);
  c0 = std::min(c0, c.col);
  r1 = std::max(r1, c.row);
  c1 = std::max(c1, c.col);
}

CellBox CellBox::padded(int pad, int rows, int cols) const {
  return {std::max(0, r0 - pad), std::max(0, c0 - pad), std::min(rows - 1, r1 + pad),
          std::min(cols - 1, c1 + pad)};
}

DistanceField fmm_distance_field(const BinaryGrid& traversable, std::span<const Cell> goals,
                                 double cell_size, const std::optional<CellBox>& window) {
  if (goals.empty()) throw Error("distance field needs at least one goal cell");
  DistanceField field;
  field.cell_size = cell_size;
  field.values = Grid<double>(traversable.rows(), traversable.cols(), kUnreachable);
  std::vector<Cell> sorted(goals.begin(), goals.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (const Cell& g : sorted) {
    if (passable(traversable, window, g)) field.goals.push_back(g);
  }
  if (field.goals.empty()) throw Error("all goal cells lie on obstacles");

  const double h = cell_size;
  Grid<std::uint8_t> known(traversable.rows(), traversable.cols(), 0);
  using Entry = std::tuple<double, int, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  for (const Cell& g : field.goals) {
    field.values[g] = 0.0;
    heap.emplace(0.0, g.row, g.col);
  }
  while (!heap.empty()) {
    const auto [d, r, c] = heap.top();
    heap.pop();
    if (known(r, c) || d > field.values(r, c)) continue;
    known(r, c) = 1;
    for (int k = 0; k < 4; ++k) {
      const Cell n{r + kDr[k], c + kDc[k]};
      if (!passable(traversable, window, n) || known[n]) continue;
      double a = kUnreachable;
      double b = kUnreachable;
      for (int dc : {-1, 1}) {
        const Cell m{n.row, n.col + dc};
        if (known.in_bounds(m) && known[m]) a = std::min(a, field.values[m]);
      }
      for (int dr : {-1, 1}) {
        const Cell m{n.row + dr, n.col};
        if (known.in_bounds(m) && known[m]) b = std::min(b, field.values[m]);
      }
      const double cand = eikonal_update(a, b, h);
      if (cand < field.values[n]) {
        field.values[n] = cand;
        heap.emplace(cand, n.row, n.col);
      }
    }
  }
  return field;
}

std::vector<Cell> frontier_cells(const BinaryGrid& explored, const BinaryGrid& traversable) {
  std::vector<Cell> out;
  for (int r = 0; r < explored.rows(); ++r) {
    for (int c = 0; c < explored.cols(); ++c) {
      if (!explored(r, c) || !traversable(r, c)) continue;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + kDr[k];
        const int cc = c + kDc[k];
        if (explored.in_bounds(rr, cc) && !explored(rr, cc)) {
          out.push_back({r, c});
          break;
        }
      }
    }
  }
  return out;
}

Cell select_frontier_goal(const BinaryGrid& explored, const BinaryGrid& traversable, Cell robot,
                          double min_distance, double cell_size,
                          const std::optional<CellBox>& window) {
  const std::vector<Cell> frontier = frontier_cells(explored, traversable);
  if (frontier.empty() || !passable(traversable, window, robot)) {
    throw Error("exploration exhausted");
  }
  const Cell source[] = {robot};
  const DistanceField field = fmm_distance_field(traversable, source, cell_size, window);
  std::optional<Cell> best;
  double best_d = kUnreachable;
  for (const Cell& c : frontier) {
    const double d = field.at(c);
    if (d < min_distance) continue;
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  if (!best) throw Error("exploration exhausted");
  return *best;
}

std::string to_string(NavRule r) {
  switch (r) {
    case NavRule::ObjectCooccurrence:
      return "object_cooccurrence";
    case NavRule::StartReceptacle:
      return "start_receptacle";
    case NavRule::Frontier:
      return "frontier";
    case NavRule::GoalReceptacle:
      return "goal_receptacle";
  }
  return "frontier";
}

NavGoalDecision select_nav_goal(const SemanticMap& map, TaskPhase phase, Cell robot,
                                const BinaryGrid& traversable, const NavChannels& channels,
                                const NavGoalParams& params, const std::optional<CellBox>& window) {
  const double h = map.config().cell_size;
  auto frontier = [&] {
    const Cell goal = select_frontier_goal(map.channel(map.explored_channel()), traversable, robot,
                                           params.min_frontier_distance, h, window);
    return NavGoalDecision{NavRule::Frontier, {goal}};
  };

  if (phase == TaskPhase::FindReceptacle) {
    auto cells = cells_of(map.channel(channels.goal_receptacle));
    if (!cells.empty()) return {NavRule::GoalReceptacle, std::move(cells)};
    return frontier();
  }

  const BinaryGrid& object = map.channel(channels.object);
  const BinaryGrid& receptacle = map.channel(channels.start_receptacle);
  const BinaryGrid near_receptacle = dilate_chebyshev(receptacle, params.cooccurrence_dilation);
  BinaryGrid both(object.rows(), object.cols());
  for (std::size_t i = 0; i < both.size(); ++i) {
    both.raw()[i] = object.raw()[i] && near_receptacle.raw()[i];
  }
  if (auto cells = cells_of(both); !cells.empty()) return {NavRule::ObjectCooccurrence, std::move(cells)};

  std::vector<Cell> rec_cells = cells_of(receptacle);
  if (!rec_cells.empty()) {
    const BinaryGrid& past = map.channel(map.past_channel());
    const int reach = static_cast<int>(std::floor(params.past_exclusion_radius / h));
    const double limit2 = std::pow(params.past_exclusion_radius / h, 2);
    BinaryGrid excluded(past.rows(), past.cols());
    for (const Cell& p : cells_of(past)) {
      for (int dr = -reach; dr <= reach; ++dr) {
        for (int dc = -reach; dc <= reach; ++dc) {
          if (dr * dr + dc * dc > limit2 || !excluded.in_bounds(p.row + dr, p.col + dc)) continue;
          excluded(p.row + dr, p.col + dc) = 1;
        }
      }
    }
    std::erase_if(rec_cells, [&](const Cell& c) { return excluded[c] != 0; });
    if (!rec_cells.empty()) return {NavRule::StartReceptacle, std::move(rec_cells)};
  }
  return frontier();
}

std::vector<Cell> project_goals(std::span<const Cell> goals, const BinaryGrid& traversable,
                                int max_rings) {
  if (goals.empty()) return {};
  CellBox box;
  for (const Cell& g : goals) box.expand(g);
  std::vector<Cell> out;
  for (int ring = 0; ring <= max_rings && out.empty(); ++ring) {
    const CellBox area = box.padded(ring, traversable.rows(), traversable.cols());
    for (int r = area.r0; r <= area.r1; ++r) {
      for (int c = area.c0; c <= area.c1; ++c) {
        if (!traversable(r, c)) continue;
        for (const Cell& g : goals) {
          if (std::max(std::abs(g.row - r), std::abs(g.col - c)) <= ring) {
            out.push_back({r, c});
            break;
          }
        }
      }
    }
  }
  return out;
}

Action plan_step(const DistanceField& field, const Pose2& pose, ActionSpace space,
                 const GridFrame& frame, const PlannerParams& params) {
  const Cell here = frame.to_cell(pose.position());
  const double d0 = field.at(here);
  if (!(d0 < kUnreachable)) throw Error("goal unreachable");

  if (space == ActionSpace::Continuous) {
    Cell cur = here;
    const int max_cells = static_cast<int>(std::round(params.waypoint_reach / frame.cell_size));
    for (int i = 0; i < max_cells; ++i) {
      Cell next = cur;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const Cell n{cur.row + dr, cur.col + dc};
          if (field.at(n) < field.at(next)) next = n;
        }
      }
      if (next == cur) break;
      const Vec2 step = frame.center(next) - pose.position();
      if (step.norm() > params.waypoint_reach) break;
      cur = next;
    }
    if (cur == here) return DiscreteMove{DiscreteMove::Kind::Stop};
    const Vec2 target = frame.center(cur);
    const Vec2 delta = target - pose.position();
    const double c = std::cos(pose.yaw);
    const double s = std::sin(pose.yaw);
    return Waypoint{c * delta.x + s * delta.y, -s * delta.x + c * delta.y,
                    wrap_angle(std::atan2(delta.y, delta.x) - pose.yaw)};
  }

  // Field value after moving `lookahead` along `heading`; unreachable if the
  // swept segment leaves the finite part of the field.
  auto ahead = [&](double heading) {
    const Vec2 dir{std::cos(heading), std::sin(heading)};
    const int n = std::max(1, static_cast<int>(std::ceil(params.lookahead / (0.5 * frame.cell_size))));
    for (int i = 1; i <= n; ++i) {
      if (!field.reachable(frame.to_cell(pose.position() + (params.lookahead * i / n) * dir))) {
        return kUnreachable;
      }
    }
    return field.at(frame.to_cell(pose.position() + params.lookahead * dir));
  };

  const double forward = ahead(pose.yaw);
  const int turns = static_cast<int>(std::round(std::numbers::pi / params.turn_increment));
  double best = forward;
  int best_k = 0;
  // k > 0 is counter-clockwise (left); smaller |k| and then left win ties.
  for (int m = 1; m <= turns; ++m) {
    for (int k : {m, -m}) {
      if (k == -turns) continue;
      const double v = ahead(pose.yaw + k * params.turn_increment);
      if (v < best) {
        best = v;
        best_k = k;
      }
    }
  }
  if (best_k == 0) {
    if (forward < d0) return DiscreteMove{DiscreteMove::Kind::Forward};
    return DiscreteMove{DiscreteMove::Kind::Stop};
  }
  // No heading descends, so turning cannot help either.
  if (best >= d0) return DiscreteMove{DiscreteMove::Kind::Stop};
  return DiscreteMove{best_k > 0 ? DiscreteMove::Kind::TurnLeft : DiscreteMove::Kind::TurnRight};
}

bool nav_stop_condition(const NavGoalDecision& decision, Vec2 robot, const GridFrame& frame,
                        bool goal_visible, double stop_radius) {
  if (decision.rule == NavRule::Frontier || !goal_visible) return false;
  for (const Cell& c : decision.goal_cells) {
    if ((frame.center(c) - robot).norm() <= stop_radius) return true;
  }
  return false;
}

}  // namespace ovmm
