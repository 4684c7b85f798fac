#include "didmiss/strata.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace didmiss {

namespace {
// Rate arithmetic like 0.5428 - 0.5774 + 0.6084 can land a hair outside
// [0, 1]; that is rounding, not a contradiction in the data.
constexpr double kClipTolerance = 1e-12;
}  // namespace

double clip_logged(const std::string& quantity, double raw, double lo, double hi,
                   std::vector<ClipEvent>& log) {
  if (raw >= lo && raw <= hi) return raw;
  double clipped = raw < lo ? lo : hi;
  if (std::isnan(raw)) clipped = lo;
  const bool rounding = !std::isnan(raw) && std::fabs(raw - clipped) <= kClipTolerance;
  if (!rounding) log.push_back({quantity, raw, clipped});
  return clipped;
}

TreatedStrata monotone_treated_strata(double r1_treated, double r1_control, double r2_treated,
                                      double r2_control, const std::string& label,
                                      std::vector<ClipEvent>& log) {
  TreatedStrata t;
  t.pi11 = clip_logged(label + "_11", r2_control - r1_control + r1_treated, 0.0, 1.0, log);
  const double raw10 = (r2_treated - r2_control) - (r1_treated - r1_control);
  t.pi10 = clip_logged(label + "_10", raw10, 0.0, 1.0 - t.pi11, log);
  t.pi00 = 1.0 - t.pi11 - t.pi10;
  return t;
}

const char* mode_name(BoundsMode m) {
  return m == BoundsMode::monotone ? "monotone" : "no-monotone";
}

BoundsMode parse_mode(const std::string& s) {
  if (s == "monotone") return BoundsMode::monotone;
  if (s == "no-monotone") return BoundsMode::no_monotone;
  throw InputError("unknown bounds mode '" + s + "' (expected monotone or no-monotone)");
}

namespace {

Interval point(double v) { return {v, v}; }

struct FourRates {
  double r1[2];
  double r2[2];
};

FourRates four_rates(const RateTable& rates) {
  FourRates f{};
  for (int d = 0; d < 2; ++d) {
    f.r1[d] = rates.p_r1[d].value();
    f.r2[d] = rates.p_r2[d].value();
  }
  return f;
}

}  // namespace

StrataProportions strata_proportions_monotone(const RateTable& rates) {
  const auto f = four_rates(rates);
  StrataProportions out;
  out.mode = BoundsMode::monotone;
  const auto t =
      monotone_treated_strata(f.r1[1], f.r1[0], f.r2[1], f.r2[0], "pi(1)", out.clip_events);
  out.pi[1] = {point(t.pi11), point(t.pi10), point(0.0), point(t.pi00)};

  // Control respondents are exactly the always-respondents; the control
  // nonrespondents split between if-treated and never in unknown shares.
  const double c11 = clip_logged("pi(0)_11", f.r2[0], 0.0, 1.0, out.clip_events);
  const Interval rest{0.0, 1.0 - c11};
  out.pi[0] = {point(c11), rest, point(0.0), rest};
  return out;
}

StrataProportions strata_proportions_bounds(const RateTable& rates) {
  const auto f = four_rates(rates);
  StrataProportions out;
  out.mode = BoundsMode::no_monotone;
  auto& log = out.clip_events;
  // counterfactual response rates of each arm under the other treatment
  const double a = clip_logged("Pr(R2(0)=1|D=1)", f.r2[0] - f.r1[0] + f.r1[1], 0.0, 1.0, log);
  const double b = clip_logged("Pr(R2(1)=1|D=0)", f.r2[1] - f.r1[1] + f.r1[0], 0.0, 1.0, log);
  out.counterfactual_response = std::array<double, 2>{a, b};

  // arm d: own-treatment response rate `own`, counterfactual rate `cf`
  auto arm = [&](double own, double cf, bool treated) {
    Interval p11{std::max(0.0, cf - (1.0 - own)), std::min(own, cf)};
    // 1 - (1 - own) can exceed own by an ulp
    if (p11.lo > p11.hi) {
      if (p11.lo - p11.hi > kClipTolerance) out.refuted = true;
      p11.lo = p11.hi;
    }
    auto nonneg = [](double lo, double hi) {
      return Interval{std::max(0.0, lo), std::max(0.0, hi)};
    };
    const Interval own_only = nonneg(own - p11.hi, own - p11.lo);
    const Interval cf_only = nonneg(cf - p11.hi, cf - p11.lo);
    const Interval none = nonneg(1.0 - own - cf + p11.lo, 1.0 - own - cf + p11.hi);
    // cells are (R2(1), R2(0)): treated arm observes R2(1), control R2(0)
    if (treated) return std::array<Interval, 4>{p11, own_only, cf_only, none};
    return std::array<Interval, 4>{p11, cf_only, own_only, none};
  };
  out.pi[1] = arm(f.r2[1], a, true);
  out.pi[0] = arm(f.r2[0], b, false);
  return out;
}

double trimmed_mean(std::span<const double> values, double keep, TrimSide side) {
  if (values.empty()) throw InputError("trimmed mean of an empty sample");
  if (!(keep > 0.0 && keep <= 1.0)) throw InputError("trim keep-fraction must lie in (0, 1]");
  if (keep == 1.0) return plain_mean(values);

  std::vector<double> v(values.begin(), values.end());
  if (side == TrimSide::bottom)
    std::stable_sort(v.begin(), v.end());
  else
    std::stable_sort(v.begin(), v.end(), std::greater<>());

  const double n = static_cast<double>(v.size());
  double k = keep * n;
  // 0.3 * 10 is 3.0000000000000004; treat near-integers as integers
  if (std::fabs(k - std::round(k)) < 1e-9) k = std::round(k);
  const auto whole = static_cast<std::size_t>(std::floor(k));
  const double frac = k - static_cast<double>(whole);
  double sum = 0.0;
  for (std::size_t i = 0; i < whole; ++i) sum += v[i];
  if (frac > 0.0) sum += frac * v[whole];
  return sum / k;
}

namespace {

std::vector<std::string> assumption_tags(BoundsMode mode) {
  if (mode == BoundsMode::monotone) return {"pt-principal", "pt-missing", "monotonicity"};
  return {"pt-principal", "pt-missing", "homogeneous-missingness"};
}

Interval worst_case_change(const PanelDataset& data) {
  const auto& s = data.outcome_support();
  if (!s) throw RefusalError("trimming infeasible and no outcome support declared");
  return {s->lo - s->hi, s->hi - s->lo};
}

}  // namespace

BoundResult att_ar_bounds(const PanelDataset& data, BoundsMode mode) {
  std::array<std::vector<double>, 2> dy = {complete_case_changes(data, 0),
                                           complete_case_changes(data, 1)};
  for (int d = 0; d < 2; ++d)
    if (dy[d].empty()) throw RefusalError("no complete cases in arm " + std::to_string(d));

  const RateTable rates = compute_rates(data);
  BoundResult out;
  out.proportions = mode == BoundsMode::monotone ? strata_proportions_monotone(rates)
                                                 : strata_proportions_bounds(rates);
  out.assumptions_used = assumption_tags(mode);
  out.clip_events = out.proportions.clip_events;

  if (mode == BoundsMode::no_monotone) {
    std::array<Interval, 2> range{};
    for (int d = 0; d < 2; ++d) {
      const double r2 = rates.p_r2[d].value();
      const auto& p11 = out.proportions.at(d, StrataCell::c11);
      range[d] = {std::min(1.0, p11.lo / r2), std::min(1.0, p11.hi / r2)};
    }
    out.trim_share_range = range;
  }

  for (int d = 0; d < 2; ++d) {
    double keep = 1.0;
    // under monotonicity every control respondent is an always-respondent
    if (!(mode == BoundsMode::monotone && d == 0)) {
      const double r2 = rates.p_r2[d].value();
      keep = r2 > 0.0 ? out.proportions.at(d, StrataCell::c11).lo / r2
                      : std::numeric_limits<double>::quiet_NaN();
    }
    if (!(keep > 0.0)) {
      out.arm_fallback[d] = true;
      out.support_fallback = true;
      out.arm_bounds[d] = worst_case_change(data);
      continue;
    }
    keep = clip_logged("trim_share(" + std::to_string(d) + ")", keep, 0.0, 1.0, out.clip_events);
    out.trim_share[d] = keep;
    out.arm_bounds[d] = {trimmed_mean(dy[d], keep, TrimSide::bottom),
                         trimmed_mean(dy[d], keep, TrimSide::top)};
  }

  out.lb = out.arm_bounds[1].lo - out.arm_bounds[0].hi;
  out.ub = out.arm_bounds[1].hi - out.arm_bounds[0].lo;
  if (const auto& s = data.outcome_support()) {
    const double span = s->hi - s->lo;
    out.lb = std::clamp(out.lb, -span, span);
    out.ub = std::clamp(out.ub, -span, span);
  }
  return out;
}

BoundsBootstrap bootstrap_bounds(const PanelDataset& data, BoundsMode mode,
                                 const BootstrapConfig& cfg) {
  const BoundResult full = att_ar_bounds(data, mode);
  auto draws = bootstrap_replicates(
      data,
      [mode](const PanelDataset& d) {
        const auto r = att_ar_bounds(d, mode);
        return std::vector<double>{r.lb, r.ub};
      },
      cfg);
  std::vector<double> lbs, ubs;
  for (const auto& v : draws.values) {
    lbs.push_back(v[0]);
    ubs.push_back(v[1]);
  }
  BoundsBootstrap out;
  out.lb_ci = percentile_interval(lbs, cfg.level);
  out.ub_ci = percentile_interval(ubs, cfg.level);
  out.outer = {std::min(out.lb_ci.lo, full.lb), std::max(out.ub_ci.hi, full.ub)};
  out.replicates = cfg.replicates;
  out.failed = draws.failed;
  return out;
}

}  // namespace didmiss
