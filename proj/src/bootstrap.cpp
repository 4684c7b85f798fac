#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <string>

#include "didmiss/estimators.hpp"
#include "didmiss/parallel.hpp"

namespace didmiss {

namespace {
constexpr std::uint64_t kBootstrapDomain = 0xb007'57a9'0000'0001ULL;
}

PanelDataset resample(const PanelDataset& data, std::uint64_t seed, std::size_t replicate) {
  auto rng = SplitMix64::stream(seed, replicate, kBootstrapDomain);
  const auto& src = data.records();
  std::uniform_int_distribution<std::size_t> pick(0, src.size() - 1);
  std::vector<PanelRecord> out;
  out.reserve(src.size());
  for (std::size_t i = 0; i < src.size(); ++i) out.push_back(src[pick(rng)]);
  return PanelDataset(std::move(out), data.outcome_support());
}

ReplicateDraws bootstrap_replicates(const PanelDataset& data, const VectorEstimator& est,
                                    const BootstrapConfig& cfg) {
  if (cfg.replicates < 1) throw InputError("bootstrap replicates must be >= 1");
  if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw InputError("level must lie in (0,1)");

  std::vector<std::vector<double>> slots(cfg.replicates);
  std::vector<std::exception_ptr> errors(cfg.replicates);
  parallel_for(cfg.replicates, [&](std::size_t b) {
    try {
      slots[b] = est(resample(data, cfg.seed, b));
    } catch (const std::exception&) {
      errors[b] = std::current_exception();
    }
  });

  ReplicateDraws draws;
  std::exception_ptr first;
  for (std::size_t b = 0; b < cfg.replicates; ++b) {
    if (errors[b]) {
      ++draws.failed;
      if (!first) first = errors[b];
    } else {
      draws.values.push_back(std::move(slots[b]));
    }
  }
  if (2 * draws.failed > cfg.replicates) {
    std::string what;
    try {
      std::rethrow_exception(first);
    } catch (const std::exception& e) {
      what = e.what();
    }
    throw RefusalError("bootstrap: " + std::to_string(draws.failed) + " of " +
                       std::to_string(cfg.replicates) + " replicates failed; first error: " + what);
  }
  return draws;
}

Interval percentile_interval(std::vector<double> values, double level) {
  if (values.empty()) throw RefusalError("no bootstrap replicates to summarise");
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  const double tail = (1.0 - level) / 2.0;
  return {quantile(tail), quantile(1.0 - tail)};
}

Estimate bootstrap_ci(const PanelDataset& data, const PointEstimator& est,
                      const BootstrapConfig& cfg) {
  Estimate out;
  out.point = est(data);
  out.n_used = data.size();
  auto draws = bootstrap_replicates(
      data, [&](const PanelDataset& d) { return std::vector<double>{est(d)}; }, cfg);
  std::vector<double> points;
  points.reserve(draws.values.size());
  for (const auto& v : draws.values) points.push_back(v[0]);
  out.se = std::sqrt(sample_variance(points));
  Interval ci = percentile_interval(points, cfg.level);
  // a percentile interval can miss the point estimate on very skewed draws
  ci.lo = std::min(ci.lo, out.point);
  ci.hi = std::max(ci.hi, out.point);
  out.ci = ci;
  out.level = cfg.level;
  out.replicates = cfg.replicates;
  out.failed_replicates = draws.failed;
  return out;
}

}  // namespace didmiss
