#include "teachrl/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <sstream>

#include "teachrl/kv_config.hpp"

namespace teachrl::world {

std::string_view action_name(MoveAction a) {
  switch (a) {
    case MoveAction::Up: return "up";
    case MoveAction::Down: return "down";
    case MoveAction::Left: return "left";
    case MoveAction::Right: return "right";
  }
  return "?";
}

std::optional<MoveAction> action_from_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (auto a : kAllActions) {
    if (action_name(a) == lower) return a;
  }
  return std::nullopt;
}

bool Layout::is_radiation(GridPos p) const {
  return std::find(radiation.begin(), radiation.end(), p) != radiation.end();
}

CellKind Layout::cell(GridPos p) const {
  if (p == person) return CellKind::Person;
  if (p == exit) return CellKind::Exit;
  if (is_radiation(p)) return CellKind::Radiation;
  return CellKind::Empty;
}

Layout default_layout() { return Layout{}; }

GridPos moved(GridPos p, MoveAction a) {
  switch (a) {
    case MoveAction::Up: return {p.col, p.row - 1};
    case MoveAction::Down: return {p.col, p.row + 1};
    case MoveAction::Left: return {p.col - 1, p.row};
    case MoveAction::Right: return {p.col + 1, p.row};
  }
  return p;
}

namespace {

std::string pos_str(GridPos p) {
  return "(" + std::to_string(p.col) + "," + std::to_string(p.row) + ")";
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

std::optional<int> shortest_path(const Layout& layout, GridPos from, GridPos to,
                                 const std::vector<GridPos>& blocked) {
  if (!layout.in_bounds(from) || !layout.in_bounds(to)) return std::nullopt;
  const int w = layout.width;
  std::vector<int> dist(static_cast<std::size_t>(layout.width * layout.height), -1);
  auto idx = [w](GridPos p) { return static_cast<std::size_t>(p.row * w + p.col); };
  auto is_blocked = [&](GridPos p) {
    return std::find(blocked.begin(), blocked.end(), p) != blocked.end();
  };
  if (is_blocked(from) || is_blocked(to)) return std::nullopt;
  std::deque<GridPos> queue{from};
  dist[idx(from)] = 0;
  while (!queue.empty()) {
    GridPos p = queue.front();
    queue.pop_front();
    if (p == to) return dist[idx(p)];
    for (auto a : kAllActions) {
      GridPos q = moved(p, a);
      if (!layout.in_bounds(q) || is_blocked(q) || dist[idx(q)] >= 0) continue;
      dist[idx(q)] = dist[idx(p)] + 1;
      queue.push_back(q);
    }
  }
  return std::nullopt;
}

std::vector<GridPos> keep_out_cells(const Layout& layout) {
  std::vector<GridPos> out = layout.radiation;
  for (int row = 0; row < layout.height; ++row) {
    for (int col = 0; col < layout.width; ++col) {
      GridPos p{col, row};
      if (layout.is_radiation(p) || p == layout.person || p == layout.exit ||
          p == layout.start) {
        continue;
      }
      for (auto a : kAllActions) {
        GridPos toward = moved(p, a);
        GridPos opposite{2 * p.col - toward.col, 2 * p.row - toward.row};
        if (layout.in_bounds(toward) && layout.is_radiation(toward) &&
            !layout.in_bounds(opposite)) {
          out.push_back(p);
          break;
        }
      }
    }
  }
  return out;
}

RouteLengths route_lengths(const Layout& layout) {
  auto leg = [&](GridPos a, GridPos b, const std::vector<GridPos>& blocked,
                 const char* what) {
    auto d = shortest_path(layout, a, b, blocked);
    if (!d) {
      throw LayoutError(std::string("no ") + what + " path from " + pos_str(a) + " to " +
                        pos_str(b));
    }
    return *d;
  };
  RouteLengths r;
  r.direct = leg(layout.start, layout.person, layout.radiation, "radiation-free") +
             leg(layout.person, layout.exit, layout.radiation, "radiation-free");
  auto keep_out = keep_out_cells(layout);
  r.avoid = leg(layout.start, layout.person, keep_out, "keep-out-free") +
            leg(layout.person, layout.exit, keep_out, "keep-out-free");
  return r;
}

void validate(const Layout& layout) {
  if (layout.width < 2 || layout.height < 2) {
    throw LayoutError("grid must be at least 2x2, got " + std::to_string(layout.width) + "x" +
                      std::to_string(layout.height));
  }
  for (auto [name, p] : {std::pair{"start", layout.start}, std::pair{"person", layout.person},
                         std::pair{"exit", layout.exit}}) {
    if (!layout.in_bounds(p)) throw LayoutError(std::string(name) + " " + pos_str(p) + " is off-grid");
  }
  if (layout.person == layout.start) throw LayoutError("person cell coincides with start");
  if (layout.exit == layout.start) throw LayoutError("exit cell coincides with start");
  if (layout.person == layout.exit) throw LayoutError("person cell coincides with exit");
  if (layout.radiation.empty()) throw LayoutError("layout needs at least one radiation cell");
  for (std::size_t i = 0; i < layout.radiation.size(); ++i) {
    GridPos r = layout.radiation[i];
    if (!layout.in_bounds(r)) throw LayoutError("radiation cell " + pos_str(r) + " is off-grid");
    if (r == layout.start || r == layout.person || r == layout.exit) {
      throw LayoutError("radiation cell " + pos_str(r) + " overlaps start/person/exit");
    }
    for (std::size_t j = i + 1; j < layout.radiation.size(); ++j) {
      if (layout.radiation[j] == r) throw LayoutError("duplicate radiation cell " + pos_str(r));
    }
  }
  if (!finite(layout.rewards.step_cost) || !finite(layout.rewards.success_reward) ||
      !finite(layout.rewards.radiation_penalty)) {
    throw LayoutError("reward parameters must be finite");
  }
  if (!(layout.discount >= 0.0 && layout.discount <= 1.0)) {
    throw LayoutError("discount must lie in [0, 1]");
  }
  if (layout.max_steps < 1) throw LayoutError("max_steps must be >= 1");
  if (!shortest_path(layout, layout.start, layout.person, layout.radiation) ||
      !shortest_path(layout, layout.person, layout.exit, layout.radiation)) {
    throw LayoutError("radiation blocks every path start -> person -> exit");
  }
}

WorldState reset(const Layout& layout) {
  validate(layout);
  return WorldState{layout.start, false, 0};
}

bool is_terminal(const WorldState& state, const Layout& layout) {
  return state.carrying && state.pos == layout.exit;
}

bool is_finished(const WorldState& state, const Layout& layout) {
  return is_terminal(state, layout) || state.steps_taken >= layout.max_steps;
}

StepOutcome step(const WorldState& state, MoveAction action, const Layout& layout) {
  if (is_finished(state, layout)) {
    throw EpisodeFinishedError("step() called on a finished episode at " + pos_str(state.pos));
  }
  StepOutcome out;
  GridPos target = moved(state.pos, action);
  out.next.pos = layout.in_bounds(target) ? target : state.pos;
  out.next.carrying = state.carrying || out.next.pos == layout.person;
  out.next.steps_taken = state.steps_taken + 1;
  out.reward = layout.rewards.step_cost;
  if (layout.is_radiation(out.next.pos)) out.reward += layout.rewards.radiation_penalty;
  out.terminal = is_terminal(out.next, layout);
  if (out.terminal) out.reward += layout.rewards.success_reward;
  out.truncated = !out.terminal && out.next.steps_taken >= layout.max_steps;
  return out;
}

int state_index(const WorldState& state, const Layout& layout) {
  return 2 * (state.pos.row * layout.width + state.pos.col) + (state.carrying ? 1 : 0);
}

WorldState state_from_index(int index, const Layout& layout) {
  int cell = index / 2;
  return WorldState{{cell % layout.width, cell / layout.width}, (index % 2) == 1, 0};
}

namespace {

GridPos parse_pos(const std::string& key, const std::string& text) {
  auto parts = split_list(text, ',');
  if (parts.size() != 2) throw LayoutError("key '" + key + "': expected 'col,row', got '" + text + "'");
  try {
    return GridPos{std::stoi(parts[0]), std::stoi(parts[1])};
  } catch (const std::exception&) {
    throw LayoutError("key '" + key + "': bad coordinate '" + text + "'");
  }
}

}  // namespace

Layout layout_from_config(const KeyValues& kv) {
  Layout l = default_layout();
  l.width = static_cast<int>(kv.get_int("width", l.width));
  l.height = static_cast<int>(kv.get_int("height", l.height));
  if (auto v = kv.get("start")) l.start = parse_pos("start", *v);
  if (auto v = kv.get("person")) l.person = parse_pos("person", *v);
  if (auto v = kv.get("exit")) l.exit = parse_pos("exit", *v);
  if (auto v = kv.get("radiation")) {
    l.radiation.clear();
    for (const auto& cell : split_list(*v, ';')) l.radiation.push_back(parse_pos("radiation", cell));
  }
  l.rewards.step_cost = kv.get_double("step_cost", l.rewards.step_cost);
  l.rewards.success_reward = kv.get_double("success_reward", l.rewards.success_reward);
  l.rewards.radiation_penalty = kv.get_double("radiation_penalty", l.rewards.radiation_penalty);
  l.discount = kv.get_double("discount", l.discount);
  l.max_steps = static_cast<int>(kv.get_int("max_steps", l.max_steps));
  return l;
}

Layout parse_layout(std::string_view text) { return layout_from_config(KeyValues::parse(text)); }

Layout load_layout(const std::string& path) { return layout_from_config(KeyValues::load(path)); }

std::string format_layout(const Layout& l) {
  std::ostringstream out;
  auto pos = [](GridPos p) { return std::to_string(p.col) + "," + std::to_string(p.row); };
  out << "width = " << l.width << "\n"
      << "height = " << l.height << "\n"
      << "start = " << pos(l.start) << "\n"
      << "person = " << pos(l.person) << "\n"
      << "exit = " << pos(l.exit) << "\n"
      << "radiation = ";
  for (std::size_t i = 0; i < l.radiation.size(); ++i) {
    out << (i ? "; " : "") << pos(l.radiation[i]);
  }
  out << "\n";
  out.precision(17);
  out << "step_cost = " << l.rewards.step_cost << "\n"
      << "success_reward = " << l.rewards.success_reward << "\n"
      << "radiation_penalty = " << l.rewards.radiation_penalty << "\n"
      << "discount = " << l.discount << "\n"
      << "max_steps = " << l.max_steps << "\n";
  return out.str();
}

}  // namespace teachrl::world
