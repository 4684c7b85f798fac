#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "didmiss/panel.hpp"

namespace didmiss {

// Latent response type (R2(1), R2(0)).
enum class Stratum : int { NR = 0, ITR = 1, ICR = 2, AR = 3 };
inline constexpr std::array<Stratum, 4> kStrata = {Stratum::NR, Stratum::ITR, Stratum::ICR,
                                                   Stratum::AR};

inline bool responds(Stratum s, int d) {
  return d == 1 ? (s == Stratum::ITR || s == Stratum::AR) : (s == Stratum::ICR || s == Stratum::AR);
}
inline Stratum stratum_of(bool r2_1, bool r2_0) {
  return r2_1 ? (r2_0 ? Stratum::AR : Stratum::ITR) : (r2_0 ? Stratum::ICR : Stratum::NR);
}
const char* stratum_name(Stratum s);
// Position of s in the (11, 10, 01, 00) cell order used by StrataProportions.
int cell_index(Stratum s);

struct R1Model {
  enum class Kind { always_observed, mcar } kind = Kind::always_observed;
  std::array<double, 2> rate{1.0, 1.0};  // Pr(R1 = 1 | D = d) under mcar
};

// Auxiliary indicators drawn jointly with the stratum. Within arm d a unit
// falls into one cell; the cell fixes its aux vector, stratum and mean
// untreated trend (replacing trend[s]).
struct AuxCell {
  std::vector<std::uint8_t> aux;
  Stratum s = Stratum::AR;
  double prob = 0.0;  // Pr(cell | D = d)
  double trend = 0.0;
};

struct AuxLayer {
  std::array<std::vector<AuxCell>, 2> cells;
};

// Discrete covariate cells modulating strata shares, trends and baselines.
struct CovariateCell {
  std::vector<int> x;
  std::array<double, 2> prob{};                    // Pr(X = x | D = d)
  std::array<std::array<double, 4>, 2> strata{};  // Pr(S = s | D = d, X = x)
  double trend_shift = 0.0;
  double baseline_shift = 0.0;
};

struct CovariateModel {
  std::vector<CovariateCell> cells;
};

struct DgpSpec {
  std::string name = "custom";
  std::size_t n = 10000;
  std::uint64_t seed = 0;
  std::array<std::array<double, 2>, 4> joint_sd{};  // Pr(S = s, D = d)
  std::array<double, 4> trend{};                    // E[Y2(0) - Y1 | S = s], both arms
  std::array<std::array<double, 2>, 4> baseline{};  // E[Y1 | S = s, D = d]
  std::array<double, 4> effect{};
  // Opt-in violation of strata parallel trends: added to arm d's trend.
  std::array<double, 2> arm_trend_delta{};
  double noise_sd = 1.0;
  R1Model r1;
  std::optional<AuxLayer> aux;
  std::optional<CovariateModel> covariates;
  // Assumption tags the preset claims to satisfy; each is checked in tests.
  std::vector<std::string> claims;

  // Throws InputError on an invalid probability table or inconsistent layers.
  void validate() const;
  double treated_share() const;
  // Pr(S = s | D = d)
  double stratum_share(Stratum s, int d) const;
};

struct OracleRecord {
  PanelRecord record;  // the observable view
  Stratum s = Stratum::AR;
  bool r1 = true;
  double y1_full = 0.0;
  double y2_1 = 0.0;
  double y2_0 = 0.0;
  bool r2_1 = true;
  bool r2_0 = true;

  double dy0() const { return y2_0 - y1_full; }
  double dy1() const { return y2_1 - y1_full; }
};

struct OracleTruth {
  double att = 0.0;     // sample mean of Y2(1) - Y2(0) over treated units
  double att_ar = 0.0;  // same over treated always-respondents (NaN if none)
  // pi_table[d][cell] = Pr(R2(1), R2(0) | D = d) in (11, 10, 01, 00) order
  std::array<std::array<double, 4>, 2> pi_table{};
  // population complete-case DID minus population ATT
  double cc_bias = 0.0;
};

struct Simulation {
  PanelDataset data;
  std::vector<OracleRecord> records;
  OracleTruth truth;
};

Simulation simulate_panel(const DgpSpec& spec);

// Exact population quantities implied by a spec (no sampling).
struct PopulationMoments {
  double treated_share = 0.0;
  std::array<std::array<double, 4>, 2> pi_table{};
  double att = 0.0;
  double att_ar = 0.0;
  std::array<double, 2> mean_dy0{};   // E[Y2(0) - Y1 | D = d]
  std::array<double, 2> cc_mean{};    // E[Y2 - Y1 | D = d, R2 = 1]
  double cc_did = 0.0;
  double cc_bias = 0.0;
};

PopulationMoments population_moments(const DgpSpec& spec);

// Fully observed panel built from latent values (y1 and the realised y2).
PanelDataset full_data_view(const std::vector<OracleRecord>& records);

enum class PresetKind {
  cc_valid,
  mnar_baseline,
  monotone,
  no_monotone,
  pi,
  zero_bias,
  homogeneous_bias,
  multi_iv
};

inline constexpr std::array<PresetKind, 8> kPresets = {
    PresetKind::cc_valid,  PresetKind::mnar_baseline, PresetKind::monotone,
    PresetKind::no_monotone, PresetKind::pi,          PresetKind::zero_bias,
    PresetKind::homogeneous_bias, PresetKind::multi_iv};

const char* preset_name(PresetKind k);
PresetKind preset_from_name(const std::string& name);  // InputError if unknown
DgpSpec make_iv_spec(PresetKind kind);
// make_iv_spec with n and seed filled in
DgpSpec make_preset(PresetKind kind, std::size_t n, std::uint64_t seed);

// Solved cell probabilities of the homogeneous-bias preset, exposed so the
// construction can be checked analytically.
struct HomogeneousBiasDesign {
  double p_aux = 0.0;    // Pr(aux = 1)
  double theta = 0.0;    // Pr(V = 1)
  double beta = 0.0;     // trend per unit of V
  std::array<std::array<double, 2>, 2> rho{};  // Pr(R2 = 1 | aux, V), treated arm
  double newton_residual = 0.0;
};
HomogeneousBiasDesign homogeneous_bias_design();

struct DecompositionReport {
  static constexpr std::array<const char*, 5> kTermNames = {
      "treated respondents", "control always-respondents", "control if-treated (latent)",
      "treated never-respondent effect", "treated if-control effect"};
  std::array<double, 5> terms{};
  double sum = 0.0;
  double att = 0.0;
  double gap = 0.0;  // sum - att
  double se = 0.0;   // Monte-Carlo standard error of the gap
  bool within_tolerance = false;  // |gap| <= 3 se
};

// Evaluates the five-term ATT decomposition with oracle access to strata and
// both potential outcomes.
DecompositionReport decompose_att(const std::vector<OracleRecord>& records);

struct CanonicalPtReport {
  std::array<double, 2> direct{};   // E[Y2(0) - Y1 | D = d]
  std::array<double, 2> mixture{};  // sum_s E[Y2(0) - Y1 | D = d, S = s] Pr(S = s | D = d)
  double mixture_error = 0.0;       // max |direct - mixture|
  double gap = 0.0;                 // direct[1] - direct[0]
  double se = 0.0;
  bool canonical_pt_holds = false;  // |gap| < 3 se
};

CanonicalPtReport check_canonical_pt(const std::vector<OracleRecord>& records);

}  // namespace didmiss
