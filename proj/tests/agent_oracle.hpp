#pragma once

// Independent grid helpers for checking the agent: BFS reachability,
// integer line-of-sight, random worlds and a recon driver.

#include <deque>
#include <random>
#include <set>
#include <vector>

#include "mindlink/agent.hpp"

namespace oracle {

using mindlink::Cell;
using mindlink::GridPos;

inline std::vector<std::vector<bool>> bfs_reachable(const mindlink::GridMap& truth, GridPos start) {
  std::vector<std::vector<bool>> seen(static_cast<std::size_t>(truth.height()),
                                      std::vector<bool>(static_cast<std::size_t>(truth.width()), false));
  std::deque<GridPos> q{start};
  seen[static_cast<std::size_t>(start.y)][static_cast<std::size_t>(start.x)] = true;
  while (!q.empty()) {
    auto p = q.front();
    q.pop_front();
    const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
    for (int i = 0; i < 4; ++i) {
      GridPos n{p.x + dx[i], p.y + dy[i]};
      if (n.x < 0 || n.y < 0 || n.x >= truth.width() || n.y >= truth.height()) continue;
      if (truth.at(n) == Cell::Obstacle) continue;
      auto&& s = seen[static_cast<std::size_t>(n.y)][static_cast<std::size_t>(n.x)];
      if (s) continue;
      s = true;
      q.push_back(n);
    }
  }
  return seen;
}

/// Cells strictly between a and b on the integer line must be free.
inline bool clear_line(const mindlink::GridMap& truth, GridPos a, GridPos b) {
  const int dx = std::abs(b.x - a.x), dy = std::abs(b.y - a.y);
  const int sx = b.x > a.x ? 1 : -1, sy = b.y > a.y ? 1 : -1;
  int x = a.x, y = a.y, err = dx - dy;
  while (x != b.x || y != b.y) {
    const int e2 = 2 * err;
    if (e2 >= -dy) {
      err -= dy;
      x += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y += sy;
    }
    if ((x != b.x || y != b.y) && truth.at(GridPos{x, y}) == Cell::Obstacle) return false;
  }
  return true;
}

inline mindlink::World random_world(int w, int h, double density, int n_targets, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mindlink::World world;
  world.truth = mindlink::GridMap(w, h, Cell::Free);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (u(rng) < density) world.truth.set(GridPos{x, y}, Cell::Obstacle);
  std::vector<GridPos> free;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (world.truth.at(GridPos{x, y}) == Cell::Free) free.push_back(GridPos{x, y});
  if (free.empty()) {
    world.truth.set(GridPos{0, 0}, Cell::Free);
    free.push_back(GridPos{0, 0});
  }
  std::shuffle(free.begin(), free.end(), rng);
  world.start = free[0];
  for (int t = 0; t < n_targets && static_cast<std::size_t>(t + 1) < free.size(); ++t)
    world.targets.push_back(mindlink::Target{t, t % 2 ? mindlink::TargetKind::Vehicle : mindlink::TargetKind::Infantry,
                                             free[static_cast<std::size_t>(t + 1)]});
  return world;
}

struct ReconRun {
  mindlink::AgentState final_state;
  std::vector<GridPos> visited;  // position after every tick, start first
  std::vector<mindlink::AgentEvent> events;
  std::uint64_t ticks = 0;
};

inline ReconRun run_recon(const mindlink::World& world, const mindlink::AgentParams& params,
                          std::uint64_t max_ticks = 20000) {
  ReconRun run;
  auto state = mindlink::make_agent(world, params);
  run.visited.push_back(state.position);
  std::optional<mindlink::Command> cmd = mindlink::Command{mindlink::CommandId::ReconArea, 0};
  for (std::uint64_t t = 0; t < max_ticks; ++t) {
    auto r = mindlink::step(state, world, cmd, t, params);
    cmd.reset();
    state = std::move(r.state);
    run.visited.push_back(state.position);
    run.events.insert(run.events.end(), r.events.begin(), r.events.end());
    run.ticks = t + 1;
    if (state.mode != mindlink::Mode::Recon) break;
  }
  run.final_state = std::move(state);
  return run;
}

/// Cells reachable from the start with no visited cell within `radius`.
inline std::vector<GridPos> uncovered_cells(const mindlink::World& world, const std::vector<GridPos>& visited,
                                            int radius) {
  const auto reach = bfs_reachable(world.truth, world.start);
  std::vector<GridPos> missing;
  for (int y = 0; y < world.truth.height(); ++y)
    for (int x = 0; x < world.truth.width(); ++x) {
      if (!reach[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)]) continue;
      const bool near = std::any_of(visited.begin(), visited.end(), [&](GridPos v) {
        return std::max(std::abs(v.x - x), std::abs(v.y - y)) <= radius;
      });
      if (!near) missing.push_back(GridPos{x, y});
    }
  return missing;
}

/// Target ids visible (radius + line of sight) from some visited cell.
inline std::set<int> visible_targets(const mindlink::World& world, const std::vector<GridPos>& visited, int radius) {
  std::set<int> ids;
  for (const auto& v : visited)
    for (const auto& t : world.targets)
      if (std::max(std::abs(v.x - t.cell.x), std::abs(v.y - t.cell.y)) <= radius && clear_line(world.truth, v, t.cell))
        ids.insert(t.id);
  return ids;
}

}  // namespace oracle
