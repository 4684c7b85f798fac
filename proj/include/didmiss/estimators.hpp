#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "didmiss/panel.hpp"

namespace didmiss {

struct Estimate {
  double point = 0.0;
  std::optional<double> se;
  std::optional<Interval> ci;
  std::optional<double> level;
  std::size_t n_used = 0;
  // bootstrap bookkeeping
  std::size_t replicates = 0;
  std::size_t failed_replicates = 0;
};

// Left-to-right sum divided by the count. Every estimator uses this so that
// identities like "cc = naive DID without missingness" hold bit-for-bit.
double plain_mean(std::span<const double> v);
// Sample variance with n - 1 in the denominator; 0 for fewer than 2 values.
double sample_variance(std::span<const double> v);

// Outcome changes y2 - y1 of the complete cases in arm d, in record order.
std::vector<double> complete_case_changes(const PanelDataset& data, int d);

Estimate did_complete_case(const PanelDataset& data);
Estimate naive_did_all(const PanelDataset& data);

struct BootstrapConfig {
  std::size_t replicates = 200;
  std::uint64_t seed = 0;
  double level = 0.95;
};

using PointEstimator = std::function<double(const PanelDataset&)>;
// Several statistics per replicate, e.g. both ends of a bound.
using VectorEstimator = std::function<std::vector<double>(const PanelDataset&)>;

// Unit-level resample with replacement; the stream depends only on
// (seed, replicate). Throws InputError if the draw misses an arm.
PanelDataset resample(const PanelDataset& data, std::uint64_t seed, std::size_t replicate);

struct ReplicateDraws {
  std::vector<std::vector<double>> values;  // successful replicates, in replicate order
  std::size_t failed = 0;
};

// Runs the estimator on cfg.replicates resamples. If more than half fail,
// the first failure is rethrown with the failure count attached.
ReplicateDraws bootstrap_replicates(const PanelDataset& data, const VectorEstimator& est,
                                    const BootstrapConfig& cfg);

// Type-7 (linear interpolation) percentile interval at `level`.
Interval percentile_interval(std::vector<double> values, double level);

Estimate bootstrap_ci(const PanelDataset& data, const PointEstimator& est,
                      const BootstrapConfig& cfg);

}  // namespace didmiss
