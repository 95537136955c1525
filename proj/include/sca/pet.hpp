#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <vector>

#include "sca/env.hpp"
#include "sca/layout.hpp"

namespace sca {

// Post-encroachment time over a substep-resolution episode log. The conflict
// box is discretized into 1 m cells; for each cell traversed by both the AV
// and an HV, PET is the gap between the earlier occupant's exit and the later
// occupant's entry. Overlapping occupancies (a conflict, not an encroachment)
// yield no PET. Returns the minimum, or nullopt when no cell is shared.
inline std::optional<double> compute_pet(const std::vector<LogRow>& log,
                                         const LayoutConfig& layout, double cell_size = 1.0) {
  double half = layout.intersection_half;
  int cells_per_side = static_cast<int>(std::ceil(2.0 * half / cell_size));
  auto cell_of = [&](double x, double y) -> std::optional<int> {
    if (x < -half || x >= half || y < -half || y >= half) return std::nullopt;
    int cx = static_cast<int>((x + half) / cell_size);
    int cy = static_cast<int>((y + half) / cell_size);
    cx = std::min(cx, cells_per_side - 1);
    cy = std::min(cy, cells_per_side - 1);
    return cy * cells_per_side + cx;
  };

  struct Interval { double entry, exit; };
  // (cell, vehicle id) -> occupancy intervals; av_ids marks AV vehicles.
  std::map<std::pair<int, int>, std::vector<Interval>> occupancy;
  std::map<int, bool> is_av;
  std::map<int, std::optional<int>> last_cell;
  std::map<int, double> last_time;

  // Log rows are time-ordered per vehicle; group consecutive same-cell rows.
  for (const auto& row : log) {
    is_av[row.id] = row.is_av;
    auto c = cell_of(row.x, row.y);
    auto it = last_cell.find(row.id);
    if (it != last_cell.end() && it->second == c && c) {
      occupancy[{*c, row.id}].back().exit = row.t;
    } else if (c) {
      occupancy[{*c, row.id}].push_back({row.t, row.t});
    }
    last_cell[row.id] = c;
    last_time[row.id] = row.t;
  }

  std::optional<double> best;
  // Regroup per cell.
  std::map<int, std::vector<std::pair<int, std::vector<Interval>>>> per_cell;
  for (auto& [key, ivs] : occupancy) per_cell[key.first].emplace_back(key.second, ivs);
  for (auto& [cell, entries] : per_cell) {
    for (std::size_t i = 0; i < entries.size(); ++i) {
      for (std::size_t j = i + 1; j < entries.size(); ++j) {
        bool ai = is_av[entries[i].first], aj = is_av[entries[j].first];
        if (ai == aj) continue;  // only AV-HV pairs
        for (const auto& u : entries[i].second) {
          for (const auto& v : entries[j].second) {
            const Interval& first = u.entry <= v.entry ? u : v;
            const Interval& second = u.entry <= v.entry ? v : u;
            double pet = second.entry - first.exit;
            if (pet >= 0.0 && (!best || pet < *best)) best = pet;
          }
        }
      }
    }
  }
  return best;
}

}  // namespace sca
