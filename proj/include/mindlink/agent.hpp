#pragma once

// Simulated reconnaissance agent on a 4-connected occupancy grid.
//
// Row 0 is the northern edge; MoveNorth decreases y. The agent builds its
// known map by revealing every ground-truth cell within its Chebyshev sensor
// radius each tick. Targets are sighted when within that radius and not
// occluded along the integer (Bresenham) line between agent and target.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mindlink/codec.hpp"
#include "mindlink/common.hpp"

namespace mindlink {

enum class Cell : std::uint8_t { Free, Obstacle, Unknown };

struct GridPos {
  int x = 0;
  int y = 0;
  bool operator==(const GridPos&) const = default;
  auto operator<=>(const GridPos&) const = default;
};

inline int chebyshev(GridPos a, GridPos b) { return std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)); }
inline int manhattan(GridPos a, GridPos b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height, Cell fill = Cell::Unknown, double cell_size_m = 1.0)
      : width_(width), height_(height), cell_size_m_(cell_size_m) {
    if (width < 1 || height < 1) throw InvalidArgument("grid: dimensions must be >= 1");
    cells_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  double cell_size_m() const noexcept { return cell_size_m_; }
  bool in_bounds(GridPos p) const noexcept { return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_; }
  std::size_t index(GridPos p) const noexcept {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(p.x);
  }
  Cell at(GridPos p) const { return cells_[index(p)]; }
  void set(GridPos p, Cell c) { cells_[index(p)] = c; }
  std::size_t size() const noexcept { return cells_.size(); }
  std::size_t count(Cell c) const { return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), c)); }
  bool operator==(const GridMap&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double cell_size_m_ = 1.0;
  std::vector<Cell> cells_;
};

enum class TargetKind : std::uint8_t { Infantry, Vehicle };

inline std::string_view to_string(TargetKind k) { return k == TargetKind::Infantry ? "Infantry" : "Vehicle"; }

struct Target {
  int id = 0;
  TargetKind kind = TargetKind::Infantry;
  GridPos cell;
};

/// Ground truth. Text form, one row per line:
///   '#' obstacle   '.' free   'S' start (free)   'T' infantry target   'V' vehicle target
struct World {
  GridMap truth;
  std::vector<Target> targets;
  GridPos start;

  static World parse(std::istream& is) {
    std::vector<std::string> rows;
    std::string line;
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      rows.push_back(line);
    }
    if (rows.empty()) throw InvalidArgument("world: empty map");
    const int w = static_cast<int>(rows.front().size());
    const int h = static_cast<int>(rows.size());
    World world;
    world.truth = GridMap(w, h, Cell::Free);
    bool have_start = false;
    for (int y = 0; y < h; ++y) {
      if (static_cast<int>(rows[static_cast<std::size_t>(y)].size()) != w)
        throw InvalidArgument("world: row " + std::to_string(y) + " has a different width");
      for (int x = 0; x < w; ++x) {
        const char ch = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
        const GridPos p{x, y};
        switch (ch) {
          case '#': world.truth.set(p, Cell::Obstacle); break;
          case '.': break;
          case 'S':
            if (have_start) throw InvalidArgument("world: more than one start cell");
            world.start = p;
            have_start = true;
            break;
          case 'T':
          case 'V':
            world.targets.push_back(Target{static_cast<int>(world.targets.size()),
                                           ch == 'T' ? TargetKind::Infantry : TargetKind::Vehicle, p});
            break;
          default:
            throw InvalidArgument(std::string("world: unknown cell character '") + ch + "'");
        }
      }
    }
    if (!have_start) throw InvalidArgument("world: no start cell 'S'");
    return world;
  }

  static World parse(const std::string& text) {
    std::istringstream ss(text);
    return parse(ss);
  }

  std::string to_text() const {
    std::string out;
    for (int y = 0; y < truth.height(); ++y) {
      for (int x = 0; x < truth.width(); ++x) {
        const GridPos p{x, y};
        char ch = truth.at(p) == Cell::Obstacle ? '#' : '.';
        if (p == start) ch = 'S';
        for (const auto& t : targets)
          if (t.cell == p) ch = t.kind == TargetKind::Infantry ? 'T' : 'V';
        out.push_back(ch);
      }
      out.push_back('\n');
    }
    return out;
  }
};

enum class Heading : std::uint8_t { N, E, S, W };
enum class Mode : std::uint8_t { Idle, Recon, Moving, Returning, Failed };

inline std::string_view to_string(Heading h) {
  constexpr std::string_view names[] = {"N", "E", "S", "W"};
  return names[static_cast<int>(h)];
}
inline std::string_view to_string(Mode m) {
  constexpr std::string_view names[] = {"Idle", "Recon", "Moving", "Returning", "Failed"};
  return names[static_cast<int>(m)];
}

struct TargetSighting {
  int target_id = 0;
  TargetKind kind = TargetKind::Infantry;
  GridPos cell;
  std::uint64_t tick = 0;
};

struct AgentParams {
  int sensor_radius = 2;
  double battery_capacity = 1000.0;
  double move_cost = 1.0;
  double idle_cost = 0.2;
  double recharge_per_tick = 5.0;

  void validate() const {
    if (sensor_radius < 0) throw InvalidArgument("agent: sensor_radius must be >= 0");
    if (!(battery_capacity > 0.0)) throw InvalidArgument("agent: battery_capacity must be > 0");
    if (!(move_cost >= 0.0 && idle_cost >= 0.0 && recharge_per_tick >= 0.0))
      throw InvalidArgument("agent: costs must be >= 0");
  }
};

struct AgentState {
  GridPos position;
  Heading heading = Heading::N;
  double battery = 0.0;  // units; battery_pct scales by capacity
  double capacity = 1.0;
  Mode mode = Mode::Idle;
  GridMap known_map;
  std::vector<TargetSighting> sightings;
  std::vector<int> marked;  // target ids flagged by MarkTarget
  GridPos base;
  /// Remaining waypoints of the active Recon or Returning mission.
  std::deque<GridPos> plan;
  /// Cells within sensor radius of some visited cell (Recon bookkeeping).
  std::vector<bool> covered;

  double battery_pct() const { return 100.0 * battery / capacity; }
};

inline AgentState make_agent(const World& world, const AgentParams& params) {
  params.validate();
  if (!world.truth.in_bounds(world.start) || world.truth.at(world.start) != Cell::Free)
    throw InvalidArgument("agent: start must be a free cell");
  AgentState s;
  s.position = world.start;
  s.base = world.start;
  s.battery = params.battery_capacity;
  s.capacity = params.battery_capacity;
  s.known_map = GridMap(world.truth.width(), world.truth.height(), Cell::Unknown, world.truth.cell_size_m());
  s.covered.assign(world.truth.size(), false);
  return s;
}

enum class EventKind : std::uint8_t {
  Moved,
  Blocked,
  Mapped,
  Sighted,
  Started,
  MissionComplete,
  Halted,
  Arrived,
  Marked,
  Rejected,
  Failed,
};

inline std::string_view to_string(EventKind k) {
  constexpr std::string_view names[] = {"moved",  "blocked", "mapped", "sighted",  "started", "mission_complete",
                                        "halted", "arrived", "marked", "rejected", "failed"};
  return names[static_cast<int>(k)];
}

struct AgentEvent {
  std::uint64_t tick = 0;
  EventKind kind = EventKind::Moved;
  GridPos cell;                       // agent position after the event (sighting cell for Sighted)
  int target_id = -1;                 // Sighted, Marked
  std::optional<CommandId> command;   // command the event answers, if any
  std::vector<std::pair<GridPos, Cell>> revealed;  // Mapped
};

namespace detail {

inline constexpr GridPos kSteps[4] = {{0, -1}, {1, 0}, {0, 1}, {-1, 0}};  // N E S W

inline bool traversable(const GridMap& map, GridPos p) { return map.in_bounds(p) && map.at(p) != Cell::Obstacle; }

/// Shortest 4-connected path from `from` to the first cell satisfying `goal`,
/// through cells where `pass` holds; excludes `from`. Neighbors expand in
/// N, E, S, W order so ties break deterministically.
template <class Pass, class Goal>
std::optional<std::vector<GridPos>> bfs_path(const GridMap& map, GridPos from, Pass pass, Goal goal) {
  if (goal(from)) return std::vector<GridPos>{};
  std::vector<int> parent(map.size(), -1);
  std::vector<bool> seen(map.size(), false);
  std::deque<GridPos> queue{from};
  seen[map.index(from)] = true;
  while (!queue.empty()) {
    const GridPos cur = queue.front();
    queue.pop_front();
    for (const auto& d : kSteps) {
      const GridPos nxt{cur.x + d.x, cur.y + d.y};
      if (!map.in_bounds(nxt) || seen[map.index(nxt)] || !pass(nxt)) continue;
      seen[map.index(nxt)] = true;
      parent[map.index(nxt)] = static_cast<int>(map.index(cur));
      if (goal(nxt)) {
        std::vector<GridPos> path{nxt};
        for (int i = parent[map.index(nxt)]; i != static_cast<int>(map.index(from)); i = parent[static_cast<std::size_t>(i)])
          path.push_back(GridPos{i % map.width(), i / map.width()});
        std::reverse(path.begin(), path.end());
        return path;
      }
      queue.push_back(nxt);
    }
  }
  return std::nullopt;
}

inline void mark_covered(std::vector<bool>& covered, const GridMap& map, GridPos p, int radius) {
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const GridPos q{p.x + dx, p.y + dy};
      if (map.in_bounds(q)) covered[map.index(q)] = true;
    }
}

}  // namespace detail

/// Cells reachable from `start` through non-obstacle cells (Unknown counts as passable).
inline std::vector<bool> reachable_region(const GridMap& map, GridPos start) {
  std::vector<bool> region(map.size(), false);
  if (!detail::traversable(map, start)) return region;
  std::deque<GridPos> queue{start};
  region[map.index(start)] = true;
  while (!queue.empty()) {
    const GridPos cur = queue.front();
    queue.pop_front();
    for (const auto& d : detail::kSteps) {
      const GridPos nxt{cur.x + d.x, cur.y + d.y};
      if (!detail::traversable(map, nxt) || region[map.index(nxt)]) continue;
      region[map.index(nxt)] = true;
      queue.push_back(nxt);
    }
  }
  return region;
}

/// Boustrophedon coverage of the region reachable from `start`, treating
/// Unknown cells as passable. Sweep lanes run every 2r+1 rows (every row for
/// r = 0), alternating direction; lane cells already within `sensor_radius`
/// of the path are skipped, blocked stretches are bridged by shortest paths,
/// and any cell still uncovered after the sweep is visited nearest-first.
/// `already_covered`, when non-empty, marks cells that need no visit.
/// The result starts at `start` and consecutive waypoints are 4-adjacent.
inline std::vector<GridPos> plan_coverage(const GridMap& known_map, GridPos start, int sensor_radius = 0,
                                          std::vector<bool> already_covered = {}) {
  if (!known_map.in_bounds(start)) throw InvalidArgument("plan_coverage: start out of bounds");
  if (known_map.at(start) == Cell::Obstacle) throw InvalidArgument("plan_coverage: start is an obstacle");
  if (sensor_radius < 0) throw InvalidArgument("plan_coverage: sensor_radius must be >= 0");
  const auto region = reachable_region(known_map, start);
  std::vector<bool> covered = std::move(already_covered);
  if (covered.size() != known_map.size()) covered.assign(known_map.size(), false);

  std::vector<GridPos> path{start};
  GridPos cur = start;
  detail::mark_covered(covered, known_map, cur, sensor_radius);
  auto in_region = [&](GridPos p) { return region[known_map.index(p)]; };
  auto walk = [&](const std::vector<GridPos>& steps) {
    for (const auto& p : steps) {
      path.push_back(p);
      detail::mark_covered(covered, known_map, p, sensor_radius);
    }
    if (!steps.empty()) cur = steps.back();
  };

  const int lane_step = 2 * sensor_radius + 1;
  std::vector<int> lanes;
  for (int y = std::min(sensor_radius, known_map.height() - 1); y < known_map.height(); y += lane_step) lanes.push_back(y);
  if (lanes.back() + sensor_radius < known_map.height() - 1) lanes.push_back(known_map.height() - 1);

  for (std::size_t li = 0; li < lanes.size(); ++li) {
    const int y = lanes[li];
    for (int i = 0; i < known_map.width(); ++i) {
      const int x = li % 2 == 0 ? i : known_map.width() - 1 - i;
      const GridPos goal{x, y};
      if (!in_region(goal) || covered[known_map.index(goal)]) continue;
      auto steps = detail::bfs_path(known_map, cur, in_region, [&](GridPos p) { return p == goal; });
      if (steps) walk(*steps);
    }
  }
  for (;;) {
    auto steps = detail::bfs_path(known_map, cur, in_region,
                                  [&](GridPos p) { return !covered[known_map.index(p)]; });
    if (!steps) break;
    walk(*steps);
  }
  return path;
}

/// True when no ground-truth obstacle lies strictly between `a` and `b` on
/// the Bresenham line.
inline bool line_of_sight(const GridMap& truth, GridPos a, GridPos b) {
  int x = a.x, y = a.y;
  const int dx = std::abs(b.x - a.x), dy = -std::abs(b.y - a.y);
  const int sx = a.x < b.x ? 1 : -1, sy = a.y < b.y ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    if (x == b.x && y == b.y) return true;
    if (!(x == a.x && y == a.y) && truth.at(GridPos{x, y}) == Cell::Obstacle) return false;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
  }
}

/// Targets visible now that have not been sighted before.
inline std::vector<TargetSighting> sense_targets(const AgentState& state, const World& world, int sensor_radius,
                                                 std::uint64_t tick) {
  std::vector<TargetSighting> out;
  for (const auto& t : world.targets) {
    const bool known = std::any_of(state.sightings.begin(), state.sightings.end(),
                                   [&](const TargetSighting& s) { return s.target_id == t.id; });
    if (known) continue;
    if (chebyshev(state.position, t.cell) > sensor_radius) continue;
    if (!line_of_sight(world.truth, state.position, t.cell)) continue;
    out.push_back(TargetSighting{t.id, t.kind, t.cell, tick});
  }
  return out;
}

struct StepResult {
  AgentState state;
  std::vector<AgentEvent> events;
};

namespace detail {

inline std::optional<GridPos> move_delta(CommandId id) {
  switch (id) {
    case CommandId::MoveNorth: return GridPos{0, -1};
    case CommandId::MoveSouth: return GridPos{0, 1};
    case CommandId::MoveEast: return GridPos{1, 0};
    case CommandId::MoveWest: return GridPos{-1, 0};
    default: return std::nullopt;
  }
}

inline Heading heading_of(GridPos d) {
  if (d.y < 0) return Heading::N;
  if (d.x > 0) return Heading::E;
  if (d.y > 0) return Heading::S;
  return Heading::W;
}

inline void replan_recon(AgentState& s, const AgentParams& params) {
  auto path = plan_coverage(s.known_map, s.position, params.sensor_radius, s.covered);
  s.plan.assign(path.begin() + 1, path.end());
}

inline bool replan_return(AgentState& s) {
  auto path = bfs_path(
      s.known_map, s.position, [&](GridPos p) { return s.known_map.at(p) != Cell::Obstacle; },
      [&](GridPos p) { return p == s.base; });
  if (!path) return false;
  s.plan.assign(path->begin(), path->end());
  return true;
}

}  // namespace detail

/// One simulation tick: consume at most one command, move at most one cell,
/// reveal the map and sense targets around the new position, then charge the
/// battery. A command with an empty battery (or any command once Failed) is
/// answered with Failed / Rejected.
inline StepResult step(const AgentState& state, const World& world, const std::optional<Command>& command,
                       std::uint64_t tick, const AgentParams& params = {}) {
  StepResult r{state, {}};
  AgentState& s = r.state;
  auto emit = [&](EventKind kind, std::optional<CommandId> cmd = std::nullopt, int target = -1) {
    r.events.push_back(AgentEvent{tick, kind, s.position, target, cmd, {}});
  };

  if (s.mode == Mode::Failed) {
    if (command) emit(EventKind::Rejected, command->id);
    return r;
  }
  if (command && s.battery <= 0.0) {
    s.mode = Mode::Failed;
    s.plan.clear();
    emit(EventKind::Failed, command->id);
    return r;
  }

  bool moved = false;
  auto try_move = [&](GridPos to, std::optional<CommandId> cmd) {
    s.heading = detail::heading_of(GridPos{to.x - s.position.x, to.y - s.position.y});
    if (world.truth.in_bounds(to) && world.truth.at(to) != Cell::Obstacle) {
      s.position = to;
      moved = true;
      emit(EventKind::Moved, cmd);
      return true;
    }
    if (s.known_map.in_bounds(to)) s.known_map.set(to, Cell::Obstacle);  // bump reveals the obstacle
    emit(EventKind::Blocked, cmd);
    return false;
  };

  if (command) {
    const CommandId id = command->id;
    if (auto d = detail::move_delta(id)) {
      s.mode = Mode::Moving;
      s.plan.clear();
      try_move(GridPos{s.position.x + d->x, s.position.y + d->y}, id);
      s.mode = Mode::Idle;
    } else {
      switch (id) {
        case CommandId::Halt:
          s.plan.clear();
          s.mode = Mode::Idle;
          emit(EventKind::Halted, id);
          break;
        case CommandId::ReturnToBase:
          s.mode = Mode::Returning;
          if (!detail::replan_return(s)) {
            s.mode = Mode::Idle;
            emit(EventKind::Blocked, id);
          } else {
            emit(EventKind::Started, id);
          }
          break;
        case CommandId::ReconArea:
          s.mode = Mode::Recon;
          s.covered.assign(s.known_map.size(), false);
          detail::mark_covered(s.covered, s.known_map, s.position, params.sensor_radius);
          detail::replan_recon(s, params);
          emit(EventKind::Started, id);
          break;
        case CommandId::MarkTarget: {
          auto it = std::find_if(s.sightings.begin(), s.sightings.end(), [&](const TargetSighting& t) {
            return std::find(s.marked.begin(), s.marked.end(), t.target_id) == s.marked.end();
          });
          if (it == s.sightings.end()) {
            emit(EventKind::Rejected, id);
          } else {
            s.marked.push_back(it->target_id);
            emit(EventKind::Marked, id, it->target_id);
          }
          break;
        }
        default:
          break;
      }
    }
  }

  // Mission progress.
  if (!moved && (s.mode == Mode::Recon || s.mode == Mode::Returning)) {
    const CommandId mission = s.mode == Mode::Recon ? CommandId::ReconArea : CommandId::ReturnToBase;
    for (int attempt = 0; attempt < 2 && !moved; ++attempt) {
      if (s.plan.empty()) break;
      const GridPos next = s.plan.front();
      if (s.known_map.at(next) == Cell::Obstacle || manhattan(next, s.position) != 1) {
        if (s.mode == Mode::Recon)
          detail::replan_recon(s, params);
        else if (!detail::replan_return(s))
          s.plan.clear();
        continue;
      }
      if (try_move(next, std::nullopt))
        s.plan.pop_front();
      else if (s.mode == Mode::Recon)
        detail::replan_recon(s, params);
      else if (!detail::replan_return(s))
        s.plan.clear();
    }
    if (s.mode == Mode::Returning && s.position == s.base) {
      s.plan.clear();
      s.mode = Mode::Idle;
      emit(EventKind::Arrived, mission);
    } else if (s.mode == Mode::Returning && s.plan.empty() && !moved) {
      s.mode = Mode::Idle;
      emit(EventKind::Blocked, mission);
    }
  }

  // Sensing.
  {
    AgentEvent mapped{tick, EventKind::Mapped, s.position, -1, std::nullopt, {}};
    const int rad = params.sensor_radius;
    for (int dy = -rad; dy <= rad; ++dy)
      for (int dx = -rad; dx <= rad; ++dx) {
        const GridPos q{s.position.x + dx, s.position.y + dy};
        if (!world.truth.in_bounds(q) || s.known_map.at(q) != Cell::Unknown) continue;
        s.known_map.set(q, world.truth.at(q));
        mapped.revealed.emplace_back(q, world.truth.at(q));
      }
    if (!mapped.revealed.empty()) r.events.push_back(std::move(mapped));
    detail::mark_covered(s.covered, s.known_map, s.position, rad);
    for (auto& sighting : sense_targets(s, world, rad, tick)) {
      r.events.push_back(AgentEvent{tick, EventKind::Sighted, sighting.cell, sighting.target_id, std::nullopt, {}});
      s.sightings.push_back(sighting);
    }
  }

  if (s.mode == Mode::Recon && s.plan.empty()) {
    // The plan may have gone stale after new obstacles; only finish once a
    // fresh plan has nothing left to visit.
    detail::replan_recon(s, params);
    if (s.plan.empty()) {
      s.mode = Mode::Idle;
      emit(EventKind::MissionComplete, CommandId::ReconArea);
    }
  }

  // Battery.
  if (moved) {
    s.battery = std::max(0.0, s.battery - params.move_cost);
  } else if (s.position == s.base && s.mode == Mode::Idle) {
    s.battery = std::min(s.capacity, s.battery + params.recharge_per_tick);
  } else {
    s.battery = std::max(0.0, s.battery - params.idle_cost);
  }
  if (s.battery <= 0.0 && s.mode != Mode::Failed) {
    s.mode = Mode::Failed;
    s.plan.clear();
    emit(EventKind::Failed);
  }
  return r;
}

/// Status of a delivered command judged from the events its execution produced.
inline FeedbackStatus execution_status(const AgentState& /*state*/, const Command& command,
                                       std::span<const AgentEvent> events) {
  auto answered = [&](EventKind kind) {
    return std::any_of(events.begin(), events.end(), [&](const AgentEvent& e) {
      return e.kind == kind && (!e.command || *e.command == command.id);
    });
  };
  EventKind success = EventKind::Moved;
  switch (command.id) {
    case CommandId::ReconArea: success = EventKind::MissionComplete; break;
    case CommandId::Halt: success = EventKind::Halted; break;
    case CommandId::ReturnToBase: success = EventKind::Arrived; break;
    case CommandId::MarkTarget: success = EventKind::Marked; break;
    default: break;
  }
  if (success == EventKind::Moved) {
    const bool ok = std::any_of(events.begin(), events.end(), [&](const AgentEvent& e) {
      return e.kind == EventKind::Moved && e.command && *e.command == command.id;
    });
    return ok ? FeedbackStatus::Executed : FeedbackStatus::RecognizedNotExecuted;
  }
  return answered(success) ? FeedbackStatus::Executed : FeedbackStatus::RecognizedNotExecuted;
}

}  // namespace mindlink
