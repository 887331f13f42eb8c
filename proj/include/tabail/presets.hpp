#pragma once

// Named experiment specs. The plain names carry the published task tables;
// the -desk variants shrink |S| or the grids so a full sweep runs in minutes.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tabail {

inline const std::vector<std::pair<std::string_view, std::string_view>>& preset_table() {
  static const std::vector<std::pair<std::string_view, std::string_view>> table = {
      {"fig-bandit-h", R"({
        "id": "fig-bandit-h",
        "env": {"name": "standard_imitation", "states": 500, "actions": 5, "m": 300},
        "sweep": {"axis": "horizon", "values": [10, 20, 50, 100, 200, 500, 1000]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail"],
        "iterations": {"vail": 500, "fem": 500, "gtal": 500, "tail": 500}
      })"},
      {"fig-bandit-m", R"({
        "id": "fig-bandit-m",
        "env": {"name": "standard_imitation", "states": 500, "actions": 5, "horizon": 10},
        "sweep": {"axis": "expert_m", "values": [100, 200, 500, 1000, 2000, 5000, 10000]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail", "gail"],
        "iterations": {"vail": 8000, "fem": 8000, "gtal": 8000, "tail": 8000, "gail": 8000}
      })"},
      {"fig-cliff-h", R"({
        "id": "fig-cliff-h",
        "env": {"name": "reset_cliff", "states": 20, "actions": 5, "m": 5000},
        "sweep": {"axis": "horizon", "values": [10, 20, 50, 100, 200, 500, 1000]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail"],
        "iterations": {"vail": "4H", "fem": 300, "gtal": "4H", "tail": "H"}
      })"},
      {"fig-cliff-m", R"({
        "id": "fig-cliff-m",
        "env": {"name": "reset_cliff", "states": 5, "actions": 5, "horizon": 5},
        "sweep": {"axis": "expert_m", "values": [100, 200, 500, 1000, 2000, 5000, 10000]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail"],
        "iterations": {"vail": 20000, "fem": 20000, "gtal": 20000, "tail": 20000}
      })"},
      {"fig-unknown-cliff", R"({
        "id": "fig-unknown-cliff",
        "env": {"name": "reset_cliff", "states": 20, "actions": 5, "horizon": 20, "m": 100},
        "sweep": {"axis": "interactions", "values": [1000, 2000, 5000, 10000, 20000]},
        "algorithms": ["bc", "oal", "mbtail"],
        "iterations": {"mbtail": 2000}
      })"},
      {"fig-unknown-bandit", R"({
        "id": "fig-unknown-bandit",
        "env": {"name": "standard_imitation", "states": 100, "actions": 5, "horizon": 10, "m": 400},
        "sweep": {"axis": "interactions", "values": [1000, 2000, 5000, 10000, 20000]},
        "algorithms": ["bc", "oal", "mbtail"],
        "iterations": {"mbtail": 2000}
      })"},
      {"fig-estimation-bandit", R"({
        "id": "fig-estimation-bandit",
        "env": {"name": "standard_imitation", "states": 500, "actions": 5, "horizon": 10},
        "sweep": {"axis": "expert_m", "values": [100, 200, 500, 1000, 2000, 5000, 10000]},
        "estimators": ["mle", "split_known"]
      })"},
      {"fig-estimation-cliff", R"({
        "id": "fig-estimation-cliff",
        "env": {"name": "reset_cliff", "states": 5, "actions": 5, "horizon": 5},
        "sweep": {"axis": "expert_m", "values": [100, 200, 500, 1000, 2000, 5000, 10000]},
        "estimators": ["mle", "split_known"]
      })"},

      {"fig-bandit-h-desk", R"({
        "id": "fig-bandit-h-desk",
        "env": {"name": "standard_imitation", "states": 50, "actions": 5, "m": 30},
        "sweep": {"axis": "horizon", "values": [10, 20, 40, 80, 160, 320]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail"],
        "iterations": {"vail": 500, "fem": 500, "gtal": 500, "tail": 500}
      })"},
      {"fig-bandit-m-desk", R"({
        "id": "fig-bandit-m-desk",
        "env": {"name": "standard_imitation", "states": 50, "actions": 5, "horizon": 10},
        "sweep": {"axis": "expert_m", "values": [100, 200, 400, 800, 1600, 3200]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail", "gail"],
        "iterations": {"vail": 2000, "fem": 2000, "gtal": 2000, "tail": 2000, "gail": 2000}
      })"},
      {"fig-cliff-h-desk", R"({
        "id": "fig-cliff-h-desk",
        "env": {"name": "reset_cliff", "states": 20, "actions": 5, "m": 5000},
        "sweep": {"axis": "horizon", "values": [10, 20, 40, 80, 160, 320]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail"],
        "iterations": {"vail": "4H", "fem": 300, "gtal": "4H", "tail": "H"}
      })"},
      {"fig-cliff-m-desk", R"({
        "id": "fig-cliff-m-desk",
        "env": {"name": "reset_cliff", "states": 5, "actions": 5, "horizon": 5},
        "sweep": {"axis": "expert_m", "values": [100, 200, 400, 800, 1600, 3200]},
        "algorithms": ["bc", "vail", "fem", "gtal", "tail"],
        "iterations": {"vail": 2000, "fem": 2000, "gtal": 2000, "tail": 2000}
      })"},
      {"fig-unknown-cliff-desk", R"({
        "id": "fig-unknown-cliff-desk",
        "env": {"name": "reset_cliff", "states": 20, "actions": 5, "horizon": 20, "m": 100},
        "sweep": {"axis": "interactions", "values": [1000, 3000, 9000]},
        "algorithms": ["bc", "oal", "mbtail"],
        "iterations": {"mbtail": 1000}
      })"},
      {"fig-unknown-bandit-desk", R"({
        "id": "fig-unknown-bandit-desk",
        "env": {"name": "standard_imitation", "states": 100, "actions": 5, "horizon": 10, "m": 400},
        "sweep": {"axis": "interactions", "values": [1000, 3000, 9000]},
        "algorithms": ["bc", "oal", "mbtail"],
        "iterations": {"mbtail": 1000}
      })"},
      {"estimation-bandit-desk", R"({
        "id": "estimation-bandit-desk",
        "env": {"name": "standard_imitation", "states": 50, "actions": 5, "horizon": 10},
        "sweep": {"axis": "expert_m", "values": [100, 200, 400, 800, 1600, 3200]},
        "estimators": ["mle", "split_known"]
      })"},
      {"estimation-cliff-desk", R"({
        "id": "estimation-cliff-desk",
        "env": {"name": "reset_cliff", "states": 5, "actions": 5, "horizon": 5},
        "sweep": {"axis": "expert_m", "values": [100, 200, 400, 800, 1600, 3200]},
        "estimators": ["mle", "split_known"]
      })"},
  };
  return table;
}

inline std::optional<std::string_view> find_preset(std::string_view name) {
  for (const auto& [key, text] : preset_table()) {
    if (key == name) return text;
  }
  return std::nullopt;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const auto& entry : preset_table()) out.emplace_back(entry.first);
  return out;
}

}  // namespace tabail
