#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "didmiss/estimators.hpp"

namespace didmiss {

// Principal stratum cells (R2(1), R2(0)), in this order.
enum class StrataCell { c11 = 0, c10 = 1, c01 = 2, c00 = 3 };
inline constexpr std::array<const char*, 4> kCellNames = {"11", "10", "01", "00"};

enum class BoundsMode { monotone, no_monotone };

const char* mode_name(BoundsMode m);
BoundsMode parse_mode(const std::string& s);

struct StrataProportions {
  BoundsMode mode = BoundsMode::monotone;
  // pi[d][cell] = Pr(R2(1)=r1, R2(0)=r0 | D=d); points have lo == hi.
  std::array<std::array<Interval, 4>, 2> pi{};
  // Pr(R2(0)=1 | D=1) and Pr(R2(1)=1 | D=0) after clipping (no-monotone mode).
  std::optional<std::array<double, 2>> counterfactual_response;
  std::vector<ClipEvent> clip_events;
  bool refuted = false;  // an interval came out empty

  const Interval& at(int d, StrataCell c) const { return pi[d][static_cast<int>(c)]; }
  bool inconsistent() const { return !clip_events.empty() || refuted; }
};

StrataProportions strata_proportions_monotone(const RateTable& rates);
StrataProportions strata_proportions_bounds(const RateTable& rates);

enum class TrimSide { bottom, top };

// Fractional-weight trimmed mean keeping share `keep` of the values from
// the chosen end. keep == 1 returns plain_mean of the input as given.
double trimmed_mean(std::span<const double> values, double keep, TrimSide side);

struct BoundResult {
  std::string estimand = "ATT-AR";
  double lb = 0.0;
  double ub = 0.0;
  // keep share per arm; empty where the support fallback replaced trimming
  std::array<std::optional<double>, 2> trim_share;
  // no-monotone: keep share at both ends of the pi11 interval
  std::optional<std::array<Interval, 2>> trim_share_range;
  // bounds on E[dY | D=d, always-respondent]
  std::array<Interval, 2> arm_bounds{};
  std::vector<std::string> assumptions_used;
  bool support_fallback = false;
  std::array<bool, 2> arm_fallback{};
  StrataProportions proportions;
  std::vector<ClipEvent> clip_events;  // proportions' events plus trim-share clips

  Interval interval() const { return {lb, ub}; }
};

BoundResult att_ar_bounds(const PanelDataset& data, BoundsMode mode);

struct BoundsBootstrap {
  Interval lb_ci;
  Interval ub_ci;
  Interval outer;  // [lower end of lb_ci, upper end of ub_ci]
  std::size_t replicates = 0;
  std::size_t failed = 0;
};

// Resamples units and reruns proportions + trimming; percentile intervals
// for each end separately.
BoundsBootstrap bootstrap_bounds(const PanelDataset& data, BoundsMode mode,
                                 const BootstrapConfig& cfg);

}  // namespace didmiss
