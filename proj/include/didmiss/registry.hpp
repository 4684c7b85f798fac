#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "didmiss/estimators.hpp"
#include "didmiss/strata.hpp"

namespace didmiss {

// Names shared by the CLI and the bootstrap driver.
inline constexpr std::array<const char*, 4> kEstimatorNames = {"cc-did", "iv", "att-ar-bounds", "pi"};

struct EstimatorOptions {
  std::optional<std::size_t> aux;   // 0-based
  std::optional<std::size_t> aux2;  // 0-based, selects the two-instrument form
  BoundsMode mode = BoundsMode::monotone;
  std::vector<std::size_t> covariates;  // 0-based; empty means all
};

// Point estimators return one value; att-ar-bounds returns {lb, ub}.
VectorEstimator estimator_by_name(const std::string& name, const EstimatorOptions& opts = {});

}  // namespace didmiss
