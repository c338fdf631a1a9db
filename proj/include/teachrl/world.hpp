#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace teachrl {
class KeyValues;
}

namespace teachrl::world {

struct GridPos {
  int col = 0;
  int row = 0;

  friend bool operator==(const GridPos&, const GridPos&) = default;
};

enum class CellKind { Empty, Radiation, Person, Exit };

enum class MoveAction : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<MoveAction, kNumActions> kAllActions = {
    MoveAction::Up, MoveAction::Down, MoveAction::Left, MoveAction::Right};

constexpr int action_index(MoveAction a) { return static_cast<int>(a); }
constexpr MoveAction action_from_index(int i) { return static_cast<MoveAction>(i); }

std::string_view action_name(MoveAction a);
/// Parses "up"/"down"/"left"/"right" (any case). Returns nullopt otherwise.
std::optional<MoveAction> action_from_name(std::string_view name);

class LayoutError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class EpisodeFinishedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Rewards {
  double step_cost = -1.0;
  double success_reward = 112.0;
  double radiation_penalty = -100.0;
};

struct Layout {
  int width = 6;
  int height = 6;
  GridPos start{0, 0};
  GridPos person{1, 5};
  GridPos exit{5, 5};
  std::vector<GridPos> radiation{{1, 2}, {1, 3}};
  Rewards rewards{};
  int max_steps = 500;
  double discount = 0.99;

  bool in_bounds(GridPos p) const {
    return p.col >= 0 && p.col < width && p.row >= 0 && p.row < height;
  }
  bool is_radiation(GridPos p) const;
  CellKind cell(GridPos p) const;
  int num_states() const { return width * height * 2; }
};

/// The compiled-in Radiation World layout.
Layout default_layout();

/// Throws LayoutError with a description of the first violated invariant.
void validate(const Layout& layout);

/// Loads a key-value layout file; keys absent from the file keep their
/// default_layout() values.
Layout load_layout(const std::string& path);
Layout layout_from_config(const KeyValues& kv);
Layout parse_layout(std::string_view text);
std::string format_layout(const Layout& layout);

struct WorldState {
  GridPos pos{};
  bool carrying = false;
  int steps_taken = 0;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct StepOutcome {
  WorldState next;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

WorldState reset(const Layout& layout);

/// Deterministic transition. Off-grid moves leave the position unchanged but
/// still cost a step. Throws EpisodeFinishedError when `state` is already
/// terminal or truncated.
StepOutcome step(const WorldState& state, MoveAction action, const Layout& layout);

bool is_terminal(const WorldState& state, const Layout& layout);
bool is_finished(const WorldState& state, const Layout& layout);

/// Dense index 2*(row*width + col) + carrying.
int state_index(const WorldState& state, const Layout& layout);
/// Inverse of state_index; steps_taken is zero in the result.
WorldState state_from_index(int index, const Layout& layout);

GridPos moved(GridPos p, MoveAction a);

// Breadth-first path lengths. `blocked` cells are impassable; the grid
// border is always impassable.
std::optional<int> shortest_path(const Layout& layout, GridPos from, GridPos to,
                                 const std::vector<GridPos>& blocked);

/// Radiation cells plus every cell squeezed between radiation and the grid
/// border (radiation on one side, off-grid directly opposite). This is the
/// region a cautious teacher keeps the agent out of.
std::vector<GridPos> keep_out_cells(const Layout& layout);

struct RouteLengths {
  int direct = 0;  // start->person->exit avoiding radiation cells only
  int avoid = 0;   // same, also avoiding keep-out cells
};

/// Throws LayoutError when either route is impossible.
RouteLengths route_lengths(const Layout& layout);

}  // namespace teachrl::world
