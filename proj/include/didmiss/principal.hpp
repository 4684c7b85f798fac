#pragma once

#include <array>
#include <optional>
#include <vector>

#include "didmiss/estimators.hpp"

namespace didmiss {

struct ScoreCell {
  std::vector<int> x;
  // treated-arm stratum probabilities given x, after clipping
  double e11 = 0.0;
  double e10 = 0.0;
  double e00 = 0.0;
  std::array<std::size_t, 2> n{};         // records per arm
  std::array<std::size_t, 2> complete{};  // complete cases per arm
  std::array<double, 2> p_r1{};
  std::array<double, 2> p_r2{};
};

// Strata with a principal score, in reporting order 11, 10, 00.
inline constexpr std::array<const char*, 3> kScoreStrata = {"11", "10", "00"};

struct PrincipalScoreTable {
  std::vector<std::size_t> covariates;  // 0-based covariate columns used
  std::vector<ScoreCell> cells;         // sorted by x
  // treated-arm means of e11, e10, e00
  std::array<double, 3> normalizers{};
  std::vector<ClipEvent> clip_events;

  double score(const ScoreCell& c, int s) const { return s == 0 ? c.e11 : s == 1 ? c.e10 : c.e00; }
};

// Cells are the distinct values of the chosen covariate columns (all of them
// when `covariates` is empty). Every cell must be occupied in both arms.
PrincipalScoreTable principal_scores(const PanelDataset& data,
                                     const std::vector<std::size_t>& covariates = {});

struct StratumEffect {
  double share = 0.0;  // treated-arm stratum probability
  double effect = 0.0;
  // weighted complete-case means: treated post, treated pre, control post, control pre
  std::array<double, 4> means{};
};

struct PiResult {
  Estimate estimate;
  PrincipalScoreTable scores;
  std::array<std::optional<StratumEffect>, 3> strata;  // empty when share is 0
};

PiResult att_principal_ignorability(const PanelDataset& data,
                                    const std::vector<std::size_t>& covariates = {});

}  // namespace didmiss
