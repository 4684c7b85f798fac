#include "didmiss/simulator.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "didmiss/estimators.hpp"
#include "didmiss/parallel.hpp"

namespace didmiss {

const char* stratum_name(Stratum s) {
  switch (s) {
    case Stratum::NR: return "NR";
    case Stratum::ITR: return "ITR";
    case Stratum::ICR: return "ICR";
    case Stratum::AR: return "AR";
  }
  return "?";
}

int cell_index(Stratum s) {
  switch (s) {
    case Stratum::AR: return 0;
    case Stratum::ITR: return 1;
    case Stratum::ICR: return 2;
    case Stratum::NR: return 3;
  }
  return 3;
}

namespace {

constexpr std::uint64_t kSimDomain = 0x5111'0a7e'0000'0002ULL;
constexpr double kProbTol = 1e-9;

int idx(Stratum s) { return static_cast<int>(s); }

// One (cell, stratum) combination of an arm with everything the generator
// needs; simulation and the population moments both iterate over these.
struct Atom {
  double prob = 0.0;
  Stratum s = Stratum::AR;
  double trend = 0.0;
  double baseline_shift = 0.0;
  const std::vector<std::uint8_t>* aux = nullptr;
  const std::vector<int>* x = nullptr;
};

std::vector<Atom> arm_atoms(const DgpSpec& spec, int d) {
  std::vector<Atom> atoms;
  if (spec.aux) {
    for (const auto& c : spec.aux->cells[d]) atoms.push_back({c.prob, c.s, c.trend, 0.0, &c.aux, nullptr});
  } else if (spec.covariates) {
    for (const auto& c : spec.covariates->cells)
      for (auto s : kStrata)
        atoms.push_back({c.prob[d] * c.strata[d][idx(s)], s, spec.trend[idx(s)] + c.trend_shift,
                         c.baseline_shift, nullptr, &c.x});
  } else {
    for (auto s : kStrata)
      atoms.push_back({spec.stratum_share(s, d), s, spec.trend[idx(s)], 0.0, nullptr, nullptr});
  }
  return atoms;
}

bool is_prob(double p) { return p >= 0.0 && p <= 1.0; }

void require(bool ok, const std::string& what) {
  if (!ok) throw InputError("invalid DGP spec: " + what);
}

}  // namespace

double DgpSpec::treated_share() const {
  double p = 0.0;
  for (const auto& row : joint_sd) p += row[1];
  return p;
}

double DgpSpec::stratum_share(Stratum s, int d) const {
  const double pd = d == 1 ? treated_share() : 1.0 - treated_share();
  return joint_sd[idx(s)][d] / pd;
}

void DgpSpec::validate() const {
  require(n >= 1, "n must be at least 1");
  require(std::isfinite(noise_sd) && noise_sd >= 0.0, "noise_sd must be finite and >= 0");
  double total = 0.0;
  for (const auto& row : joint_sd)
    for (double p : row) {
      require(is_prob(p), "joint_sd entries must lie in [0,1]");
      total += p;
    }
  require(std::fabs(total - 1.0) < kProbTol, "joint_sd must sum to 1");
  const double p1 = treated_share();
  require(p1 > 0.0 && p1 < 1.0, "both treatment arms need positive probability");
  for (double r : r1.rate) require(is_prob(r), "R1 rates must lie in [0,1]");
  require(!(aux && covariates), "aux layer and covariate model cannot be combined");

  auto check_consistent = [&](int d, const std::array<double, 4>& mass) {
    for (auto s : kStrata)
      require(std::fabs(mass[idx(s)] - stratum_share(s, d)) < kProbTol,
              std::string("layer stratum shares disagree with joint_sd for ") + stratum_name(s));
  };

  if (aux) {
    const std::size_t arity = aux->cells[0].empty() ? 0 : aux->cells[0].front().aux.size();
    for (int d = 0; d < 2; ++d) {
      require(!aux->cells[d].empty(), "aux layer needs cells in both arms");
      std::array<double, 4> mass{};
      double sum = 0.0;
      for (const auto& c : aux->cells[d]) {
        require(is_prob(c.prob), "aux cell probability outside [0,1]");
        require(c.aux.size() == arity, "inconsistent aux arity across cells");
        for (auto v : c.aux) require(v <= 1, "aux values must be 0/1");
        require(std::isfinite(c.trend), "aux cell trend must be finite");
        sum += c.prob;
        mass[idx(c.s)] += c.prob;
      }
      require(std::fabs(sum - 1.0) < kProbTol, "aux cell probabilities must sum to 1 per arm");
      check_consistent(d, mass);
    }
  }
  if (covariates) {
    require(!covariates->cells.empty(), "covariate model needs cells");
    const std::size_t arity = covariates->cells.front().x.size();
    for (int d = 0; d < 2; ++d) {
      std::array<double, 4> mass{};
      double sum = 0.0;
      for (const auto& c : covariates->cells) {
        require(c.x.size() == arity, "inconsistent covariate arity across cells");
        for (int v : c.x) require(v >= 0, "covariate categories must be non-negative");
        require(is_prob(c.prob[d]), "covariate cell probability outside [0,1]");
        double row = 0.0;
        for (auto s : kStrata) {
          require(is_prob(c.strata[d][idx(s)]), "covariate strata share outside [0,1]");
          row += c.strata[d][idx(s)];
          mass[idx(s)] += c.prob[d] * c.strata[d][idx(s)];
        }
        require(std::fabs(row - 1.0) < kProbTol, "covariate strata shares must sum to 1");
        sum += c.prob[d];
      }
      require(std::fabs(sum - 1.0) < kProbTol, "covariate cell probabilities must sum to 1 per arm");
      check_consistent(d, mass);
    }
  }
}

PopulationMoments population_moments(const DgpSpec& spec) {
  spec.validate();
  PopulationMoments m;
  m.treated_share = spec.treated_share();
  for (int d = 0; d < 2; ++d)
    for (auto s : kStrata) m.pi_table[d][cell_index(s)] = spec.stratum_share(s, d);

  for (int d = 0; d < 2; ++d) {
    double resp = 0.0, resp_dy = 0.0;
    for (const auto& a : arm_atoms(spec, d)) {
      const double dy0 = a.trend + spec.arm_trend_delta[d];
      m.mean_dy0[d] += a.prob * dy0;
      if (d == 1) m.att += a.prob * spec.effect[idx(a.s)];
      if (!responds(a.s, d)) continue;
      resp += a.prob;
      resp_dy += a.prob * (dy0 + (d == 1 ? spec.effect[idx(a.s)] : 0.0));
    }
    m.cc_mean[d] = resp > 0.0 ? resp_dy / resp : std::numeric_limits<double>::quiet_NaN();
  }
  m.att_ar = spec.stratum_share(Stratum::AR, 1) > 0.0 ? spec.effect[idx(Stratum::AR)]
                                                      : std::numeric_limits<double>::quiet_NaN();
  m.cc_did = m.cc_mean[1] - m.cc_mean[0];
  m.cc_bias = m.cc_did - m.att;
  return m;
}

Simulation simulate_panel(const DgpSpec& spec) {
  spec.validate();
  const double p1 = spec.treated_share();
  const std::array<std::vector<Atom>, 2> atoms = {arm_atoms(spec, 0), arm_atoms(spec, 1)};

  std::vector<OracleRecord> recs(spec.n);
  parallel_for(spec.n, [&](std::size_t i) {
    auto rng = SplitMix64::stream(spec.seed, i, kSimDomain);
    OracleRecord o;
    const int d = rng.uniform() < p1 ? 1 : 0;

    const auto& arm = atoms[d];
    const double u = rng.uniform();
    const Atom* pick = nullptr;
    double cum = 0.0;
    for (const auto& a : arm) {
      if (a.prob <= 0.0) continue;
      pick = &a;  // the last positive atom absorbs rounding in the cumulative sum
      cum += a.prob;
      if (u < cum) break;
    }

    o.s = pick->s;
    o.r1 = spec.r1.kind == R1Model::Kind::always_observed || rng.uniform() < spec.r1.rate[d];
    std::normal_distribution<double> z;
    const double e1 = z(rng), e2 = z(rng);
    o.y1_full = spec.baseline[idx(o.s)][d] + pick->baseline_shift + spec.noise_sd * e1;
    o.y2_0 = o.y1_full + pick->trend + spec.arm_trend_delta[d] + spec.noise_sd * e2;
    o.y2_1 = o.y2_0 + spec.effect[idx(o.s)];
    o.r2_1 = responds(o.s, 1);
    o.r2_0 = responds(o.s, 0);

    auto& r = o.record;
    r.unit_id = std::to_string(i + 1);
    r.d = d;
    if (o.r1) r.y1 = o.y1_full;
    if (d == 1 ? o.r2_1 : o.r2_0) r.y2 = d == 1 ? o.y2_1 : o.y2_0;
    if (pick->aux) r.aux = *pick->aux;
    if (pick->x) r.x = *pick->x;
    recs[i] = std::move(o);
  });

  std::vector<PanelRecord> observed;
  observed.reserve(recs.size());
  for (const auto& o : recs) observed.push_back(o.record);

  OracleTruth truth;
  std::vector<double> effects, ar_effects;
  for (const auto& o : recs) {
    if (o.record.d != 1) continue;
    effects.push_back(o.y2_1 - o.y2_0);
    if (o.s == Stratum::AR) ar_effects.push_back(o.y2_1 - o.y2_0);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  truth.att = effects.empty() ? nan : plain_mean(effects);
  truth.att_ar = ar_effects.empty() ? nan : plain_mean(ar_effects);
  const auto pop = population_moments(spec);
  truth.pi_table = pop.pi_table;
  truth.cc_bias = pop.cc_bias;

  return {PanelDataset(std::move(observed)), std::move(recs), truth};
}

PanelDataset full_data_view(const std::vector<OracleRecord>& records) {
  std::vector<PanelRecord> out;
  out.reserve(records.size());
  for (const auto& o : records) {
    PanelRecord r = o.record;
    r.y1 = o.y1_full;
    r.y2 = r.d == 1 ? o.y2_1 : o.y2_0;
    out.push_back(std::move(r));
  }
  return PanelDataset(std::move(out));
}

namespace {

struct Group {
  std::vector<double> v;
  double mean() const { return v.empty() ? std::numeric_limits<double>::quiet_NaN() : plain_mean(v); }
  double var_of_mean() const {
    return v.size() < 2 ? 0.0 : sample_variance(v) / static_cast<double>(v.size());
  }
};

}  // namespace

DecompositionReport decompose_att(const std::vector<OracleRecord>& records) {
  std::array<std::size_t, 2> n{};
  std::array<std::array<Group, 4>, 2> dy0;  // latent untreated trend by arm and stratum
  std::array<Group, 4> effect;              // treated units
  Group treated_resp;
  std::vector<double> all_effects;
  for (const auto& o : records) {
    const int d = o.record.d;
    ++n[d];
    dy0[d][idx(o.s)].v.push_back(o.dy0());
    if (d == 1) {
      effect[idx(o.s)].v.push_back(o.y2_1 - o.y2_0);
      all_effects.push_back(o.y2_1 - o.y2_0);
      if (o.r2_1) treated_resp.v.push_back(o.dy1());
    }
  }
  DecompositionReport rep;
  if (n[1] == 0) return rep;
  auto share = [&](Stratum s) {
    return static_cast<double>(dy0[1][idx(s)].v.size()) / static_cast<double>(n[1]);
  };
  // a stratum absent from the treated arm contributes nothing
  auto weighted = [&](Stratum s, const Group& g) { return share(s) > 0.0 ? share(s) * g.mean() : 0.0; };

  const double resp_share = static_cast<double>(treated_resp.v.size()) / static_cast<double>(n[1]);
  rep.terms[0] = resp_share > 0.0 ? treated_resp.mean() * resp_share : 0.0;
  rep.terms[1] = -weighted(Stratum::AR, dy0[0][idx(Stratum::AR)]);
  rep.terms[2] = -weighted(Stratum::ITR, dy0[0][idx(Stratum::ITR)]);
  rep.terms[3] = weighted(Stratum::NR, effect[idx(Stratum::NR)]);
  rep.terms[4] = weighted(Stratum::ICR, effect[idx(Stratum::ICR)]);
  for (double t : rep.terms) rep.sum += t;
  rep.att = plain_mean(all_effects);
  rep.gap = rep.sum - rep.att;

  // The gap is sum over AR and ITR of share * (treated - control) latent
  // trend means; everything else cancels within the sample.
  double var = 0.0;
  for (auto s : {Stratum::AR, Stratum::ITR}) {
    const double w = share(s);
    var += w * w * (dy0[1][idx(s)].var_of_mean() + dy0[0][idx(s)].var_of_mean());
  }
  rep.se = std::sqrt(var);
  rep.within_tolerance = std::fabs(rep.gap) <= 3.0 * rep.se + 1e-12;
  return rep;
}

CanonicalPtReport check_canonical_pt(const std::vector<OracleRecord>& records) {
  std::array<Group, 2> all;
  std::array<std::array<Group, 4>, 2> by_s;
  for (const auto& o : records) {
    all[o.record.d].v.push_back(o.dy0());
    by_s[o.record.d][idx(o.s)].v.push_back(o.dy0());
  }
  CanonicalPtReport rep;
  for (int d = 0; d < 2; ++d) {
    rep.direct[d] = all[d].mean();
    const double nd = static_cast<double>(all[d].v.size());
    for (const auto& g : by_s[d])
      if (!g.v.empty()) rep.mixture[d] += g.mean() * static_cast<double>(g.v.size()) / nd;
    rep.mixture_error = std::max(rep.mixture_error, std::fabs(rep.direct[d] - rep.mixture[d]));
  }
  rep.gap = rep.direct[1] - rep.direct[0];
  rep.se = std::sqrt(all[0].var_of_mean() + all[1].var_of_mean());
  rep.canonical_pt_holds = std::fabs(rep.gap) < 3.0 * rep.se;
  return rep;
}

}  // namespace didmiss
