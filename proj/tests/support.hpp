#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "didmiss/panel.hpp"

namespace testutil {

using didmiss::PanelDataset;
using didmiss::PanelRecord;

inline std::optional<double> na() { return std::nullopt; }

inline PanelRecord rec(int d, std::optional<double> y1, std::optional<double> y2,
                       std::vector<std::uint8_t> aux = {}, std::vector<int> x = {}) {
  static int counter = 0;
  PanelRecord r;
  r.unit_id = "u" + std::to_string(++counter);
  r.d = d;
  r.y1 = y1;
  r.y2 = y2;
  r.aux = std::move(aux);
  r.x = std::move(x);
  return r;
}

inline PanelDataset csv(const std::string& text) {
  std::istringstream in(text);
  return didmiss::load_panel(in);
}

// Records with y1 = 0 and y2 = dy, all complete.
inline PanelDataset changes(const std::vector<double>& treated, const std::vector<double>& control) {
  std::vector<PanelRecord> rs;
  for (double v : treated) rs.push_back(rec(1, 0.0, v));
  for (double v : control) rs.push_back(rec(0, 0.0, v));
  return PanelDataset(std::move(rs));
}

// Arm of n units with exact counts of observed y1 / y2; y2 observed first
// among the y1 respondents so that `complete` units have both.
inline void add_arm(std::vector<PanelRecord>& rs, int d, int n, int r1, int r2, int complete) {
  int both = 0, only1 = 0, only2 = 0;
  for (int i = 0; i < n; ++i) {
    std::optional<double> y1, y2;
    if (both < complete) {
      y1 = 1.0;
      y2 = 2.0;
      ++both;
    } else if (only1 < r1 - complete) {
      y1 = 1.0;
      ++only1;
    } else if (only2 < r2 - complete) {
      y2 = 2.0;
      ++only2;
    }
    rs.push_back(rec(d, y1, y2));
  }
}

}  // namespace testutil
