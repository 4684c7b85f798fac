#include "didmiss/iv.hpp"

#include <cmath>
#include <limits>

namespace didmiss {

namespace {

// Summaries of one arm split by one instrument, all among R1 = 1.
struct InstrumentSplit {
  std::array<std::size_t, 2> n{};        // R1 = 1
  std::array<std::size_t, 2> missing{};  // R1 = 1, R2 = 0
  std::array<std::vector<double>, 2> dy; // complete cases

  double q(int v) const { return static_cast<double>(missing[v]) / static_cast<double>(n[v]); }
  double denom() const { return q(0) - q(1); }
  double trend_gap() const { return plain_mean(dy[1]) - plain_mean(dy[0]); }
  double trend_gap_se() const {
    return std::sqrt(sample_variance(dy[1]) / static_cast<double>(dy[1].size()) +
                     sample_variance(dy[0]) / static_cast<double>(dy[0].size()));
  }
};

struct ArmSummary {
  std::size_t r1 = 0;
  std::size_t r1_missing = 0;
  double missing_share() const {
    return r1 == 0 ? 0.0 : static_cast<double>(r1_missing) / static_cast<double>(r1);
  }
};

void check_index(const PanelDataset& data, std::size_t k) {
  if (k >= data.aux_arity())
    throw InputError("aux index " + std::to_string(k + 1) + " out of range (dataset has " +
                     std::to_string(data.aux_arity()) + " auxiliary indicators)");
}

ArmSummary arm_summary(const PanelDataset& data, int d) {
  ArmSummary a;
  for (const auto& r : data.records()) {
    if (r.d != d || !r.r1()) continue;
    ++a.r1;
    if (!r.r2()) ++a.r1_missing;
  }
  return a;
}

InstrumentSplit split(const PanelDataset& data, int d, std::size_t k) {
  InstrumentSplit s;
  for (const auto& r : data.records()) {
    if (r.d != d || !r.r1()) continue;
    const int v = r.aux[k];
    ++s.n[v];
    if (r.r2())
      s.dy[v].push_back(r.dy());
    else
      ++s.missing[v];
  }
  return s;
}

void require_cells(const InstrumentSplit& s, int d, std::size_t k) {
  for (int v = 0; v < 2; ++v)
    if (s.dy[v].empty())
      throw RefusalError("empty instrument cell: no complete cases in arm " + std::to_string(d) +
                         " with aux" + std::to_string(k + 1) + " = " + std::to_string(v));
}

void require_strength(double denom, int d) {
  if (!(std::fabs(denom) >= kWeakInstrumentEps))
    throw RefusalError("weak instrument in arm " + std::to_string(d) +
                       " (|denominator| < 1e-8)");
}

// Mean trend gap between nonrespondents and respondents, per instrument.
double gap_single(const InstrumentSplit& s, int d, std::size_t k) {
  require_cells(s, d, k);
  require_strength(s.denom(), d);
  return s.trend_gap() / s.denom();
}

double gap_pair(const InstrumentSplit& a, const InstrumentSplit& b, int d, std::size_t k1,
                std::size_t k2) {
  require_cells(a, d, k1);
  require_cells(b, d, k2);
  // Parallel trend gaps across the two instruments identify the common
  // bias through the difference of their missingness gaps.
  const double composite = a.denom() - b.denom();
  require_strength(composite, d);
  return (a.trend_gap() - b.trend_gap()) / composite;
}

}  // namespace

IvResult att_iv(const PanelDataset& data, std::size_t k) {
  check_index(data, k);
  IvResult out;
  out.estimate = did_complete_case(data);
  out.estimate.se.reset();
  auto& diag = out.diagnostics;
  diag.instruments = {k};

  double point = out.estimate.point;
  for (int d = 0; d < 2; ++d) {
    const auto arm = arm_summary(data, d);
    const auto s = split(data, d, k);
    diag.missing_share[d] = arm.missing_share();
    const bool split_ok = s.n[0] > 0 && s.n[1] > 0;
    diag.denom[d] = split_ok ? s.denom() : std::numeric_limits<double>::quiet_NaN();
    diag.trend_gap[d] = (!s.dy[0].empty() && !s.dy[1].empty())
                            ? s.trend_gap()
                            : std::numeric_limits<double>::quiet_NaN();
    diag.trend_gap_se[d] = (!s.dy[0].empty() && !s.dy[1].empty())
                               ? s.trend_gap_se()
                               : std::numeric_limits<double>::quiet_NaN();
    // nothing to correct when every first-wave respondent answered again
    if (arm.r1_missing == 0) {
      diag.bias_correction[d] = 0.0;
      continue;
    }
    diag.bias_correction[d] = gap_single(s, d, k) * diag.missing_share[d];
  }
  point += diag.bias_correction[1] - diag.bias_correction[0];
  out.estimate.point = point;
  return out;
}

IvResult att_iv_multi(const PanelDataset& data, std::size_t k1, std::size_t k2) {
  check_index(data, k1);
  check_index(data, k2);
  bool identical = true;
  for (const auto& r : data.records())
    if (r.complete() && r.aux[k1] != r.aux[k2]) {
      identical = false;
      break;
    }
  if (identical) throw RefusalError("degenerate instrument pair: indicators identical on complete cases");

  IvResult out;
  out.estimate = did_complete_case(data);
  out.estimate.se.reset();
  auto& diag = out.diagnostics;
  diag.instruments = {k1, k2};

  for (int d = 0; d < 2; ++d) {
    const auto arm = arm_summary(data, d);
    const auto a = split(data, d, k1);
    const auto b = split(data, d, k2);
    diag.missing_share[d] = arm.missing_share();
    const bool split_ok = a.n[0] > 0 && a.n[1] > 0 && b.n[0] > 0 && b.n[1] > 0;
    diag.denom[d] = split_ok ? a.denom() - b.denom() : std::numeric_limits<double>::quiet_NaN();
    const bool cells_ok =
        !a.dy[0].empty() && !a.dy[1].empty() && !b.dy[0].empty() && !b.dy[1].empty();
    diag.trend_gap[d] = cells_ok ? a.trend_gap() - b.trend_gap()
                                 : std::numeric_limits<double>::quiet_NaN();
    diag.trend_gap_se[d] =
        cells_ok ? std::hypot(a.trend_gap_se(), b.trend_gap_se())
                 : std::numeric_limits<double>::quiet_NaN();
    if (arm.r1_missing == 0) {
      diag.bias_correction[d] = 0.0;
      continue;
    }
    diag.bias_correction[d] = gap_pair(a, b, d, k1, k2) * diag.missing_share[d];
  }
  out.estimate.point += diag.bias_correction[1] - diag.bias_correction[0];
  return out;
}

double reconstruct_nonrespondent_trend(const PanelDataset& data, std::size_t k, int d) {
  check_index(data, k);
  const auto s = split(data, d, k);
  std::vector<double> cc;
  for (int v = 0; v < 2; ++v) cc.insert(cc.end(), s.dy[v].begin(), s.dy[v].end());
  if (cc.empty()) throw RefusalError("no complete cases in arm " + std::to_string(d));
  return plain_mean(cc) + gap_single(s, d, k);
}

}  // namespace didmiss
