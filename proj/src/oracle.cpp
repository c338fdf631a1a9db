#include "teachrl/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

namespace teachrl::oracle {

using world::GridPos;
using world::Layout;

void validate(const OracleConfig& config) {
  if (!(config.p_advice >= 0.0 && config.p_advice <= 1.0)) {
    throw std::invalid_argument("p_advice must lie in [0, 1]");
  }
}

ScriptedTeacher::ScriptedTeacher(const TeacherScript& script)
    : script_(script),
      visited_(static_cast<std::size_t>(script.advice_map.num_states()), false) {}

void ScriptedTeacher::begin_episode() { std::fill(visited_.begin(), visited_.end(), false); }

std::optional<MoveAction> ScriptedTeacher::scripted_advise(int state,
                                                           std::optional<MoveAction> persisted) {
  auto seen = visited_.at(static_cast<std::size_t>(state));
  if (seen) return std::nullopt;
  visited_[static_cast<std::size_t>(state)] = true;
  auto advised = script_.advice_map.get(state);
  if (!advised || advised == persisted) return std::nullopt;
  return advised;
}

namespace {

// Ties resolve in this order.
constexpr std::array<MoveAction, 4> kPreference = {MoveAction::Right, MoveAction::Down,
                                                   MoveAction::Left, MoveAction::Up};

constexpr int kUnreached = std::numeric_limits<int>::max();

std::vector<int> distances_to(const Layout& layout, GridPos goal, const std::vector<GridPos>& blocked) {
  const auto cells = static_cast<std::size_t>(layout.width * layout.height);
  std::vector<int> dist(cells, kUnreached);
  auto idx = [&](GridPos p) { return static_cast<std::size_t>(p.row * layout.width + p.col); };
  auto is_blocked = [&](GridPos p) {
    return p != goal && std::find(blocked.begin(), blocked.end(), p) != blocked.end();
  };
  std::deque<GridPos> queue{goal};
  dist[idx(goal)] = 0;
  while (!queue.empty()) {
    GridPos p = queue.front();
    queue.pop_front();
    for (auto a : world::kAllActions) {
      GridPos q = world::moved(p, a);
      if (!layout.in_bounds(q) || is_blocked(q) || dist[idx(q)] != kUnreached) continue;
      dist[idx(q)] = dist[idx(p)] + 1;
      queue.push_back(q);
    }
  }
  return dist;
}

std::optional<MoveAction> first_move(const Layout& layout, GridPos from, const std::vector<int>& dist) {
  std::optional<MoveAction> best;
  int best_dist = kUnreached;
  for (auto a : kPreference) {
    GridPos q = world::moved(from, a);
    if (!layout.in_bounds(q)) continue;
    int d = dist[static_cast<std::size_t>(q.row * layout.width + q.col)];
    if (d < best_dist) {
      best_dist = d;
      best = a;
    }
  }
  return best;
}

TeacherScript route_map(const Layout& layout, const std::vector<GridPos>& blocked) {
  TeacherScript script{advice::AdviceDictionary(layout.num_states()), Trigger::Probabilistic};
  const auto fallback = layout.radiation;
  for (bool carrying : {false, true}) {
    const GridPos goal = carrying ? layout.exit : layout.person;
    const auto preferred = distances_to(layout, goal, blocked);
    const auto escape = distances_to(layout, goal, fallback);
    for (int row = 0; row < layout.height; ++row) {
      for (int col = 0; col < layout.width; ++col) {
        GridPos p{col, row};
        if (p == goal) continue;
        auto move = first_move(layout, p, preferred);
        if (!move) move = first_move(layout, p, escape);
        if (!move) continue;
        script.advice_map.set(world::state_index({p, carrying, 0}, layout), *move);
      }
    }
  }
  return script;
}

// Walks a shortest route from the start, keeping the current heading whenever
// it is still optimal, and records advice only where the heading changes.
TeacherScript turn_points(const Layout& layout, const std::vector<GridPos>& blocked) {
  TeacherScript script{advice::AdviceDictionary(layout.num_states()), Trigger::OnStateEntry};
  const std::array<std::vector<int>, 2> dist = {distances_to(layout, layout.person, blocked),
                                                distances_to(layout, layout.exit, blocked)};
  world::WorldState s = world::reset(layout);
  std::optional<MoveAction> heading;
  for (int guard = 0; guard < layout.num_states() && !world::is_finished(s, layout); ++guard) {
    const auto& field = dist[s.carrying ? 1 : 0];
    auto move = first_move(layout, s.pos, field);
    if (!move) throw world::LayoutError("no route for the minimal advice script");
    if (heading) {
      GridPos ahead = world::moved(s.pos, *heading);
      GridPos chosen = world::moved(s.pos, *move);
      auto at = [&](GridPos p) { return field[static_cast<std::size_t>(p.row * layout.width + p.col)]; };
      if (layout.in_bounds(ahead) && at(ahead) == at(chosen)) move = heading;
    }
    if (move != heading) script.advice_map.set(world::state_index(s, layout), *move);
    heading = move;
    s = world::step(s, *move, layout).next;
  }
  return script;
}

}  // namespace

TeacherScript build_full_advice_map(const Layout& layout) {
  world::validate(layout);
  return route_map(layout, world::keep_out_cells(layout));
}

TeacherScript direct_path_script(const Layout& layout) {
  world::validate(layout);
  return turn_points(layout, layout.radiation);
}

TeacherScript avoid_path_script(const Layout& layout) {
  world::validate(layout);
  return turn_points(layout, world::keep_out_cells(layout));
}

}  // namespace teachrl::oracle
