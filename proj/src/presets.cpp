#include <Eigen/Dense>
#include <cmath>

#include "didmiss/simulator.hpp"

namespace didmiss {

namespace {

int idx(Stratum s) { return static_cast<int>(s); }

struct Shares {
  double ar = 0, itr = 0, icr = 0, nr = 0;
  std::array<double, 4> by_stratum() const { return {nr, itr, icr, ar}; }
};

DgpSpec base_spec(const char* name) {
  DgpSpec s;
  s.name = name;
  // baselines differ by stratum and arm; irrelevant for trends but they keep
  // levels from looking identical across groups
  s.baseline[idx(Stratum::NR)] = {0.5, 0.7};
  s.baseline[idx(Stratum::ITR)] = {1.0, 1.1};
  s.baseline[idx(Stratum::ICR)] = {0.0, 0.2};
  s.baseline[idx(Stratum::AR)] = {-0.5, -0.4};
  return s;
}

void set_shares(DgpSpec& s, const Shares& control, const Shares& treated, double p1 = 0.5) {
  const auto c = control.by_stratum(), t = treated.by_stratum();
  for (int k = 0; k < 4; ++k) s.joint_sd[k] = {(1.0 - p1) * c[k], p1 * t[k]};
}

void set_by_stratum(std::array<double, 4>& out, double ar, double itr, double icr, double nr) {
  out[idx(Stratum::AR)] = ar;
  out[idx(Stratum::ITR)] = itr;
  out[idx(Stratum::ICR)] = icr;
  out[idx(Stratum::NR)] = nr;
}

// joint_sd implied by an aux layer, so the layer and the table agree.
void shares_from_aux(DgpSpec& s, double p1 = 0.5) {
  for (auto& row : s.joint_sd) row = {0.0, 0.0};
  for (int d = 0; d < 2; ++d)
    for (const auto& c : s.aux->cells[d]) s.joint_sd[idx(c.s)][d] += (d ? p1 : 1.0 - p1) * c.prob;
}

void shares_from_covariates(DgpSpec& s, double p1 = 0.5) {
  for (auto& row : s.joint_sd) row = {0.0, 0.0};
  for (int d = 0; d < 2; ++d)
    for (const auto& c : s.covariates->cells)
      for (auto st : kStrata)
        s.joint_sd[idx(st)][d] += (d ? p1 : 1.0 - p1) * c.prob[d] * c.strata[d][idx(st)];
}

DgpSpec cc_valid() {
  auto s = base_spec("cc-valid");
  const Shares sh{0.7, 0.1, 0.1, 0.1};
  set_shares(s, sh, sh);
  s.trend.fill(0.5);
  s.effect.fill(1.0);
  s.claims = {"pt-principal", "strata-independent-of-treatment", "pt-outcome", "pt-observed"};
  return s;
}

DgpSpec mnar_baseline() {
  auto s = base_spec("mnar-baseline");
  set_shares(s, {0.5, 0.1, 0.15, 0.25}, {0.6, 0.2, 0.05, 0.15});
  set_by_stratum(s.trend, 1.0, 2.0, 0.5, 1.5);
  set_by_stratum(s.effect, 1.0, 2.0, 0.0, -1.0);
  s.claims = {"pt-principal"};
  return s;
}

DgpSpec monotone() {
  auto s = base_spec("monotone");
  set_shares(s, {0.6, 0.25, 0.0, 0.15}, {0.7, 0.2, 0.0, 0.1});
  set_by_stratum(s.trend, 0.5, 0.5, 0.0, 1.0);
  // if-treated respondents gain more, so their changes sit above the
  // always-respondents' but overlap them
  set_by_stratum(s.effect, 1.0, 1.5, 0.0, -0.5);
  s.r1 = {R1Model::Kind::mcar, {0.85, 0.95}};
  s.claims = {"pt-principal", "monotonicity", "pt-missing"};
  return s;
}

DgpSpec no_monotone() {
  auto s = base_spec("no-monotone");
  set_shares(s, {0.5, 0.2, 0.1, 0.2}, {0.6, 0.2, 0.1, 0.1});
  set_by_stratum(s.trend, 0.5, 0.5, 1.0, 1.0);
  set_by_stratum(s.effect, 1.0, 1.5, 0.5, -0.5);
  s.r1 = {R1Model::Kind::mcar, {0.85, 0.95}};
  s.claims = {"pt-principal", "pt-missing", "homogeneous-missingness"};
  return s;
}

DgpSpec principal_ignorability() {
  auto s = base_spec("pi");
  s.trend.fill(1.0);
  s.effect.fill(1.0);
  CovariateModel cm;
  auto cell = [](int x, std::array<double, 4> control, std::array<double, 4> treated,
                 double trend_shift, double baseline_shift) {
    CovariateCell c;
    c.x = {x};
    c.prob = {0.5, 0.5};
    c.strata = {control, treated};
    c.trend_shift = trend_shift;
    c.baseline_shift = baseline_shift;
    return c;
  };
  // strata order NR, ITR, ICR, AR; the x = 1 trend shift is chosen so the
  // complete-case DID is off by exactly 0.2
  cm.cells.push_back(cell(0, {0.2, 0.2, 0.0, 0.6}, {0.1, 0.3, 0.0, 0.6}, 0.0, 0.0));
  cm.cells.push_back(cell(1, {0.05, 0.05, 0.0, 0.9}, {0.05, 0.05, 0.0, 0.9}, -2.3125, 0.5));
  s.covariates = std::move(cm);
  shares_from_covariates(s);
  s.claims = {"monotonicity", "pt-missing-cov", "principal-ignorability", "covariates-independent-of-treatment"};
  return s;
}

// Two-arm layer with a single instrument whose response rate depends only
// on the instrument; trend constant.
AuxLayer instrument_only_layer(double p_aux, std::array<double, 2> rho, double trend) {
  AuxLayer layer;
  for (int d = 0; d < 2; ++d)
    for (std::uint8_t z = 0; z < 2; ++z) {
      const double pz = z ? p_aux : 1.0 - p_aux;
      layer.cells[d].push_back({{z}, Stratum::AR, pz * rho[z], trend});
      layer.cells[d].push_back({{z}, Stratum::NR, pz * (1.0 - rho[z]), trend});
    }
  return layer;
}

DgpSpec zero_bias() {
  auto s = base_spec("zero-bias");
  s.effect.fill(1.0);
  s.noise_sd = 0.5;
  s.aux = instrument_only_layer(0.5, {0.5, 0.9}, 0.5);
  shares_from_aux(s);
  s.claims = {"iv-relevance", "bias-homogeneity", "pt-outcome"};
  return s;
}

// E[V | R] gap (nonrespondents minus respondents) for response rates r0, r1
// at V = 0, 1.
double v_gap(double theta, double beta, double r0, double r1) {
  const double ev_resp = theta * r1 / (theta * r1 + (1.0 - theta) * r0);
  const double ev_non = theta * (1.0 - r1) / (theta * (1.0 - r1) + (1.0 - theta) * (1.0 - r0));
  return beta * (ev_non - ev_resp);
}

}  // namespace

HomogeneousBiasDesign homogeneous_bias_design() {
  HomogeneousBiasDesign h;
  h.p_aux = 0.2;
  h.theta = 0.5;
  h.beta = 1.0;
  const double relevance = 0.3;
  h.rho[0] = {0.2, 0.8};
  const double target_gap = v_gap(h.theta, h.beta, h.rho[0][0], h.rho[0][1]);
  const double q0 = 1.0 - (h.theta * h.rho[0][1] + (1.0 - h.theta) * h.rho[0][0]);

  // Unknowns: response rates in the aux = 1 group at V = 0, 1. Equal
  // respondent/nonrespondent gap, and missingness lower by `relevance`.
  auto f = [&](const Eigen::Vector2d& r) {
    return Eigen::Vector2d(v_gap(h.theta, h.beta, r(0), r(1)) - target_gap,
                           1.0 - (h.theta * r(1) + (1.0 - h.theta) * r(0)) - (q0 - relevance));
  };
  Eigen::Vector2d r(0.7, 0.9);
  for (int it = 0; it < 100; ++it) {
    const Eigen::Vector2d fr = f(r);
    if (fr.cwiseAbs().maxCoeff() < 1e-15) break;
    Eigen::Matrix2d jac;
    for (int j = 0; j < 2; ++j) {
      const double step = 1e-7;
      Eigen::Vector2d hi = r, lo = r;
      hi(j) += step;
      lo(j) -= step;
      jac.col(j) = (f(hi) - f(lo)) / (2.0 * step);
    }
    r -= jac.partialPivLu().solve(fr);
  }
  h.rho[1] = {r(0), r(1)};
  h.newton_residual = f(r).cwiseAbs().maxCoeff();
  if (!(h.newton_residual < 1e-10) || !(r(0) > 0 && r(0) < 1 && r(1) > 0 && r(1) < 1))
    throw std::logic_error("homogeneous-bias design failed to converge");
  return h;
}

namespace {

DgpSpec homogeneous_bias() {
  const auto h = homogeneous_bias_design();
  auto s = base_spec("homogeneous-bias");
  s.effect.fill(1.0);
  s.noise_sd = 0.1;
  AuxLayer layer;
  // treated arm: response depends on the instrument and on a latent V that
  // also drives the trend
  for (std::uint8_t z = 0; z < 2; ++z)
    for (int v = 0; v < 2; ++v) {
      const double p = (z ? h.p_aux : 1.0 - h.p_aux) * (v ? h.theta : 1.0 - h.theta);
      const double rho = h.rho[z][v];
      layer.cells[1].push_back({{z}, Stratum::AR, p * rho, h.beta * v});
      layer.cells[1].push_back({{z}, Stratum::NR, p * (1.0 - rho), h.beta * v});
    }
  // control arm: missingness ignorable, same mean trend
  layer.cells[0] = instrument_only_layer(h.p_aux, {0.5, 0.8}, h.beta * h.theta).cells[0];
  s.aux = std::move(layer);
  shares_from_aux(s);
  s.claims = {"iv-relevance", "bias-homogeneity", "pt-outcome"};
  return s;
}

DgpSpec multi_iv() {
  auto s = base_spec("multi-iv");
  s.effect.fill(1.0);
  s.noise_sd = 0.15;
  const double p[2] = {0.1, 0.5};  // Pr(aux1 = 1), Pr(aux2 = 1), independent
  // The second instrument's relevance is set so that its trend gap can
  // equal the first one's with zero respondent/nonrespondent gap in every
  // single-instrument group: p1(1-p1)*0.3 = p2(1-p2)*a2.
  const double a1 = 0.3, a2 = p[0] * (1 - p[0]) * a1 / (p[1] * (1 - p[1]));
  const double planted_gap = 0.3, mu0 = 1.0;

  struct Cell {
    int a, c, r;
    double prob;
  };
  std::vector<Cell> cells;
  for (int a = 0; a < 2; ++a)
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 2; ++r) {
        const double rho = 0.55 + a1 * a + a2 * c;
        const double pac = (a ? p[0] : 1 - p[0]) * (c ? p[1] : 1 - p[1]);
        cells.push_back({a, c, r, pac * (r ? rho : 1 - rho)});
      }

  // Linear restrictions on the eight cell trend means: within each
  // single-instrument group respondents and nonrespondents share the mean
  // trend; each instrument shifts the mean trend by planted_gap; the
  // overall mean is mu0.
  auto cond_row = [&](auto pred) {
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(8);
    double mass = 0.0;
    for (int k = 0; k < 8; ++k)
      if (pred(cells[k])) {
        row(k) = cells[k].prob;
        mass += cells[k].prob;
      }
    return Eigen::RowVectorXd(row / mass);
  };
  Eigen::MatrixXd A(7, 8);
  Eigen::VectorXd y(7);
  int eq = 0;
  for (int k = 0; k < 2; ++k)
    for (int v = 0; v < 2; ++v) {
      auto in = [k, v](const Cell& c) { return (k == 0 ? c.a : c.c) == v; };
      A.row(eq) = cond_row([&](const Cell& c) { return in(c) && c.r == 0; }) -
                  cond_row([&](const Cell& c) { return in(c) && c.r == 1; });
      y(eq++) = 0.0;
    }
  for (int k = 0; k < 2; ++k) {
    A.row(eq) = cond_row([k](const Cell& c) { return (k == 0 ? c.a : c.c) == 1; }) -
                cond_row([k](const Cell& c) { return (k == 0 ? c.a : c.c) == 0; });
    y(eq++) = planted_gap;
  }
  A.row(eq) = cond_row([](const Cell&) { return true; });
  y(eq) = mu0;
  const Eigen::VectorXd mu = A.completeOrthogonalDecomposition().solve(y);
  if ((A * mu - y).cwiseAbs().maxCoeff() > 1e-10)
    throw std::logic_error("multi-iv design is inconsistent");

  AuxLayer layer;
  for (int k = 0; k < 8; ++k) {
    const auto& c = cells[k];
    const std::vector<std::uint8_t> aux{static_cast<std::uint8_t>(c.a), static_cast<std::uint8_t>(c.c)};
    const Stratum st = c.r ? Stratum::AR : Stratum::NR;
    layer.cells[1].push_back({aux, st, c.prob, mu(k)});
    layer.cells[0].push_back({aux, st, c.prob, mu0});
  }
  s.aux = std::move(layer);
  shares_from_aux(s);
  s.claims = {"iv-relevance", "parallel-difference-in-trends", "pt-outcome"};
  return s;
}

}  // namespace

const char* preset_name(PresetKind k) {
  switch (k) {
    case PresetKind::cc_valid: return "cc-valid";
    case PresetKind::mnar_baseline: return "mnar-baseline";
    case PresetKind::monotone: return "monotone";
    case PresetKind::no_monotone: return "no-monotone";
    case PresetKind::pi: return "pi";
    case PresetKind::zero_bias: return "zero-bias";
    case PresetKind::homogeneous_bias: return "homogeneous-bias";
    case PresetKind::multi_iv: return "multi-iv";
  }
  return "?";
}

PresetKind preset_from_name(const std::string& name) {
  for (auto k : kPresets)
    if (name == preset_name(k)) return k;
  if (name == "iv-homogeneous-bias") return PresetKind::homogeneous_bias;
  std::string known;
  for (auto k : kPresets) known += std::string(known.empty() ? "" : ", ") + preset_name(k);
  throw InputError("unknown preset '" + name + "' (known: " + known + ")");
}

DgpSpec make_iv_spec(PresetKind kind) {
  switch (kind) {
    case PresetKind::cc_valid: return cc_valid();
    case PresetKind::mnar_baseline: return mnar_baseline();
    case PresetKind::monotone: return monotone();
    case PresetKind::no_monotone: return no_monotone();
    case PresetKind::pi: return principal_ignorability();
    case PresetKind::zero_bias: return zero_bias();
    case PresetKind::homogeneous_bias: return homogeneous_bias();
    case PresetKind::multi_iv: return multi_iv();
  }
  throw InputError("unknown preset");
}

DgpSpec make_preset(PresetKind kind, std::size_t n, std::uint64_t seed) {
  auto s = make_iv_spec(kind);
  s.n = n;
  s.seed = seed;
  return s;
}

}  // namespace didmiss
