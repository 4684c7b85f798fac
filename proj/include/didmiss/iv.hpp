#pragma once

#include <array>
#include <string>
#include <vector>

#include "didmiss/estimators.hpp"

namespace didmiss {

inline constexpr double kWeakInstrumentEps = 1e-8;

struct IvDiagnostics {
  std::vector<std::size_t> instruments;  // 0-based aux indices
  // Pr(R2=0 | d, aux=0, R1=1) - Pr(R2=0 | d, aux=1, R1=1); for two
  // instruments the composite (first minus second).
  std::array<double, 2> denom{};
  // Pr(R2=0 | D=d, R1=1)
  std::array<double, 2> missing_share{};
  std::array<double, 2> bias_correction{};
  // Observed trend gap between instrument groups among complete cases and
  // its standard error. Diagnostic only; bias homogeneity is untestable.
  std::array<double, 2> trend_gap{};
  std::array<double, 2> trend_gap_se{};
  std::string estimand = "ATT among first-wave respondents";
};

struct IvResult {
  Estimate estimate;
  IvDiagnostics diagnostics;
};

// Single instrument: aux indicator k (0-based).
IvResult att_iv(const PanelDataset& data, std::size_t k);

// Two instruments whose trend gaps are parallel (but possibly nonzero).
IvResult att_iv_multi(const PanelDataset& data, std::size_t k1, std::size_t k2);

// Identified mean trend of arm-d nonrespondents, E[dY | D=d, R2=0], from
// instrument k.
double reconstruct_nonrespondent_trend(const PanelDataset& data, std::size_t k, int d);

}  // namespace didmiss
