#include "didmiss/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "didmiss/iv.hpp"
#include "didmiss/principal.hpp"
#include "didmiss/registry.hpp"
#include "didmiss/simulator.hpp"
#include "didmiss/strata.hpp"

namespace didmiss::cli {

using Json = nlohmann::ordered_json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

struct Options {
  std::string input;
  std::vector<double> support;
  std::size_t bootstrap = 0;
  std::uint64_t seed = 0;
  double level = 0.95;
  bool pretty = false;
  std::size_t aux = 0;
  std::size_t aux2 = 0;
  std::string mode = "monotone";
  std::string covariates;
  std::string preset;
  std::size_t n = 10000;
  std::string out;
  std::string truth;
};

// NaN and infinities have no JSON form; they become null.
Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json interval(const Interval& i) { return Json::array({num(i.lo), num(i.hi)}); }

Json rate(const Rate& r) { return r.present() ? num(r.value()) : Json(nullptr); }

template <class T, std::size_t N, class F>
Json per_arm(const std::array<T, N>& a, F f) {
  Json j = Json::array();
  for (const auto& v : a) j.push_back(f(v));
  return j;
}

Json clip_events(const std::vector<ClipEvent>& events) {
  Json j = Json::array();
  for (const auto& e : events)
    j.push_back({{"quantity", e.quantity}, {"raw", num(e.raw)}, {"clipped", num(e.clipped)}});
  return j;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

struct Loaded {
  PanelDataset data;
  std::string bytes;
  std::vector<std::string> covariate_names;
};

std::vector<std::string> header_fields(const std::string& bytes) {
  const auto eol = bytes.find_first_of("\r\n");
  std::string line = bytes.substr(0, eol);
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) {
    field.erase(std::remove(field.begin(), field.end(), '"'), field.end());
    const auto b = field.find_first_not_of(" \t"), e = field.find_last_not_of(" \t");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

std::optional<Interval> parse_support(const Options& o) {
  if (o.support.empty()) return std::nullopt;
  const Interval s{o.support[0], o.support[1]};
  if (!(std::isfinite(s.lo) && std::isfinite(s.hi) && s.lo <= s.hi))
    throw InputError("--support needs finite MIN <= MAX");
  return s;
}

Loaded load(const Options& o) {
  std::string bytes;
  if (o.input == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    bytes = ss.str();
  } else {
    std::ifstream f(o.input, std::ios::binary);
    if (!f) throw InputError("cannot open input file '" + o.input + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    bytes = ss.str();
  }
  std::istringstream in(bytes);
  auto data = load_panel(in, parse_support(o));
  const auto mapping = ColumnMapping::from_header(header_fields(bytes));
  return {std::move(data), std::move(bytes), mapping.covariates};
}

Json dataset_block(const Loaded& l) {
  const auto& d = l.data;
  const auto rates = compute_rates(d);
  auto missing = [](const Rate& r) { return r.present() ? num(1.0 - r.value()) : Json(nullptr); };
  Json j;
  j["rows"] = d.size();
  j["arm_sizes"] = {d.arm_size(0), d.arm_size(1)};
  j["missing_y1"] = per_arm(rates.p_r1, missing);
  j["missing_y2"] = per_arm(rates.p_r2, missing);
  j["aux_arity"] = d.aux_arity();
  j["covariate_arity"] = d.covariate_arity();
  j["outcome_support"] = d.outcome_support() ? interval(*d.outcome_support()) : Json(nullptr);
  j["fingerprint"] = "fnv1a64:" + hex64(fnv1a64(l.bytes));
  return j;
}

BootstrapConfig boot_config(const Options& o) {
  if (!(o.level > 0.0 && o.level < 1.0)) throw InputError("--level must lie in (0,1)");
  return {o.bootstrap, o.seed, o.level};
}

Json estimate_json(const Estimate& e) {
  Json j;
  j["point"] = num(e.point);
  j["se"] = e.se ? num(*e.se) : Json(nullptr);
  j["n_used"] = e.n_used;
  return j;
}

// Bootstrap block for scalar estimators, or null when not requested.
Json bootstrap_block(const Options& o, const PanelDataset& data, const VectorEstimator& est) {
  if (o.bootstrap == 0) return nullptr;
  const auto b = bootstrap_ci(data, [&](const PanelDataset& d) { return est(d)[0]; }, boot_config(o));
  return {{"replicates", b.replicates}, {"failed", b.failed_replicates}, {"seed", o.seed},
          {"level", o.level},           {"se", num(*b.se)},              {"ci", interval(*b.ci)}};
}

std::size_t to_index(std::size_t one_based, const char* flag) {
  if (one_based == 0) throw InputError(std::string(flag) + " is 1-based; 0 is not a valid index");
  return one_based - 1;
}

Json cmd_rates(const Loaded& l) {
  const auto t = compute_rates(l.data);
  Json j;
  j["n"] = {t.n[0], t.n[1]};
  j["p_r1"] = per_arm(t.p_r1, rate);
  j["p_r2"] = per_arm(t.p_r2, rate);
  j["p_r2_given_r1"] = per_arm(t.p_r2_given_r1, rate);
  Json aux = Json::array();
  for (int d = 0; d < 2; ++d) {
    Json arm = Json::array();
    for (const auto& kv : t.p_r2_given_aux[d]) arm.push_back({rate(kv[0]), rate(kv[1])});
    aux.push_back(arm);
  }
  j["p_r2_given_aux_r1"] = aux;
  return j;
}

Json cmd_cc(const Options& o, const Loaded& l, Json& diag) {
  Json j;
  j["estimator"] = "cc-did";
  j["estimate"] = estimate_json(did_complete_case(l.data));
  j["bootstrap"] = bootstrap_block(o, l.data, estimator_by_name("cc-did"));
  diag = Json::object();
  return j;
}

Json cmd_iv(const Options& o, const Loaded& l, Json& diag) {
  EstimatorOptions eo;
  eo.aux = to_index(o.aux, "--aux");
  if (o.aux2) eo.aux2 = to_index(o.aux2, "--aux2");
  const auto r = eo.aux2 ? att_iv_multi(l.data, *eo.aux, *eo.aux2) : att_iv(l.data, *eo.aux);
  const auto& g = r.diagnostics;
  Json j;
  j["estimator"] = "iv";
  j["estimand"] = g.estimand;
  j["estimate"] = estimate_json(r.estimate);
  j["bootstrap"] = bootstrap_block(o, l.data, estimator_by_name("iv", eo));
  Json inst = Json::array();
  for (auto k : g.instruments) inst.push_back(k + 1);
  auto arr = [](const std::array<double, 2>& a) { return per_arm(a, num); };
  diag["instruments"] = inst;
  diag["denom"] = arr(g.denom);
  diag["missing_share"] = arr(g.missing_share);
  diag["bias_correction"] = arr(g.bias_correction);
  diag["trend_gap"] = arr(g.trend_gap);
  diag["trend_gap_se"] = arr(g.trend_gap_se);
  diag["weak_instrument"] = false;
  return j;
}

Json pi_table_json(const StrataProportions& p) {
  Json t;
  for (int d = 1; d >= 0; --d) {
    Json arm;
    for (int c = 0; c < 4; ++c) arm[kCellNames[c]] = interval(p.pi[d][c]);
    t[d ? "treated" : "control"] = arm;
  }
  return t;
}

Json cmd_bounds(const Options& o, const Loaded& l, Json& diag) {
  const BoundsMode mode = parse_mode(o.mode);
  const auto r = att_ar_bounds(l.data, mode);
  Json j;
  j["estimator"] = "att-ar-bounds";
  j["estimand"] = r.estimand;
  j["mode"] = mode_name(mode);
  j["lb"] = num(r.lb);
  j["ub"] = num(r.ub);
  j["trim_share"] = per_arm(r.trim_share, [](const std::optional<double>& v) {
    return v ? num(*v) : Json(nullptr);
  });
  j["trim_share_range"] = r.trim_share_range ? per_arm(*r.trim_share_range, interval) : Json(nullptr);
  j["arm_bounds"] = per_arm(r.arm_bounds, interval);
  j["assumptions_used"] = r.assumptions_used;
  j["pi"] = pi_table_json(r.proportions);
  j["counterfactual_response"] = r.proportions.counterfactual_response
                                     ? per_arm(*r.proportions.counterfactual_response, num)
                                     : Json(nullptr);
  if (o.bootstrap) {
    const auto b = bootstrap_bounds(l.data, mode, boot_config(o));
    j["bootstrap"] = {{"replicates", b.replicates}, {"failed", b.failed},  {"seed", o.seed},
                      {"level", o.level},           {"lb_ci", interval(b.lb_ci)},
                      {"ub_ci", interval(b.ub_ci)}, {"outer", interval(b.outer)}};
  } else {
    j["bootstrap"] = nullptr;
  }
  diag["support_fallback"] = r.support_fallback;
  diag["arm_fallback"] = r.arm_fallback;
  diag["model_inconsistent_rates"] = !r.clip_events.empty();
  diag["assumptions_refuted"] = r.proportions.refuted;
  diag["clip_events"] = clip_events(r.clip_events);
  return j;
}

std::vector<std::size_t> parse_covariates(const std::string& list, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  if (list.empty()) return out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto it = std::find(names.begin(), names.end(), item);
    if (it == names.end())
      throw InputError("unknown covariate column '" + item + "'");
    out.push_back(static_cast<std::size_t>(it - names.begin()));
  }
  return out;
}

Json cmd_pi(const Options& o, const Loaded& l, Json& diag) {
  EstimatorOptions eo;
  eo.covariates = parse_covariates(o.covariates, l.covariate_names);
  const auto r = att_principal_ignorability(l.data, eo.covariates);
  Json j;
  j["estimator"] = "pi";
  j["estimate"] = estimate_json(r.estimate);
  j["bootstrap"] = bootstrap_block(o, l.data, estimator_by_name("pi", eo));
  Json strata = Json::array();
  for (int s = 0; s < 3; ++s) {
    Json e{{"stratum", kScoreStrata[s]}, {"share", num(r.scores.normalizers[s])}};
    if (r.strata[s]) {
      e["effect"] = num(r.strata[s]->effect);
      e["means"] = {{"treated_post", num(r.strata[s]->means[0])},
                    {"treated_pre", num(r.strata[s]->means[1])},
                    {"control_post", num(r.strata[s]->means[2])},
                    {"control_pre", num(r.strata[s]->means[3])}};
    } else {
      e["effect"] = nullptr;
    }
    strata.push_back(e);
  }
  j["strata"] = strata;
  Json cov = Json::array();
  for (auto c : r.scores.covariates) cov.push_back(l.covariate_names.at(c));
  j["covariates"] = cov;
  Json cells = Json::array();
  for (const auto& c : r.scores.cells)
    cells.push_back({{"x", c.x},
                     {"e11", num(c.e11)},
                     {"e10", num(c.e10)},
                     {"e00", num(c.e00)},
                     {"n", c.n},
                     {"complete", c.complete}});
  j["cells"] = cells;
  diag["clip_events"] = clip_events(r.scores.clip_events);
  diag["model_inconsistent_rates"] = !r.scores.clip_events.empty();
  return j;
}

Json truth_json(const Simulation& sim, const DgpSpec& spec) {
  const auto pop = population_moments(spec);
  Json pi;
  for (int d = 1; d >= 0; --d) {
    Json arm;
    for (int c = 0; c < 4; ++c) arm[kCellNames[c]] = num(sim.truth.pi_table[d][c]);
    pi[d ? "treated" : "control"] = arm;
  }
  Json j;
  j["preset"] = spec.name;
  j["n"] = spec.n;
  j["seed"] = spec.seed;
  j["claims"] = spec.claims;
  j["att"] = num(sim.truth.att);
  j["att_ar"] = num(sim.truth.att_ar);
  j["cc_bias"] = num(sim.truth.cc_bias);
  j["pi_table"] = pi;
  j["population"] = {{"att", num(pop.att)},
                     {"att_ar", num(pop.att_ar)},
                     {"cc_did", num(pop.cc_did)},
                     {"treated_share", num(pop.treated_share)}};
  return j;
}

DgpSpec preset_spec(const Options& o) {
  if (o.preset.empty()) throw InputError("--preset is required");
  if (o.n < 1) throw InputError("--n must be at least 1");
  return make_preset(preset_from_name(o.preset), o.n, o.seed);
}

Json cmd_simulate(const Options& o) {
  const auto spec = preset_spec(o);
  const auto sim = simulate_panel(spec);
  {
    std::ofstream f(o.out, std::ios::binary);
    if (!f) throw InputError("cannot write '" + o.out + "'");
    write_panel_csv(f, sim.data);
  }
  const Json truth = truth_json(sim, spec);
  if (!o.truth.empty()) {
    std::ofstream f(o.truth, std::ios::binary);
    if (!f) throw InputError("cannot write '" + o.truth + "'");
    f << truth.dump(2) << "\n";
  }
  Json j;
  j["out"] = o.out;
  j["truth_file"] = o.truth.empty() ? Json(nullptr) : Json(o.truth);
  j["rows"] = sim.data.size();
  j["arm_sizes"] = {sim.data.arm_size(0), sim.data.arm_size(1)};
  j["truth"] = truth;
  return j;
}

Json cmd_decompose(const Options& o) {
  const auto spec = preset_spec(o);
  const auto sim = simulate_panel(spec);
  const auto d = decompose_att(sim.records);
  const auto pt = check_canonical_pt(sim.records);
  Json terms = Json::array();
  for (int k = 0; k < 5; ++k)
    terms.push_back({{"term", DecompositionReport::kTermNames[k]}, {"value", num(d.terms[k])}});
  Json j;
  j["preset"] = spec.name;
  j["n"] = spec.n;
  j["terms"] = terms;
  j["sum"] = num(d.sum);
  j["att"] = num(d.att);
  j["gap"] = num(d.gap);
  j["se"] = num(d.se);
  j["within_tolerance"] = d.within_tolerance;
  j["canonical_pt"] = {{"direct", per_arm(pt.direct, num)},
                       {"mixture", per_arm(pt.mixture, num)},
                       {"mixture_error", num(pt.mixture_error)},
                       {"gap", num(pt.gap)},
                       {"se", num(pt.se)},
                       {"holds", pt.canonical_pt_holds}};
  j["cc_did"] = num(did_complete_case(sim.data).point);
  j["cc_bias_population"] = num(sim.truth.cc_bias);
  return j;
}

// ---- human-readable output

std::string scalar_text(const Json& v) {
  if (v.is_null()) return "-";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_float()) {
    std::ostringstream s;
    s << std::setprecision(6) << v.get<double>();
    return s.str();
  }
  return v.dump();
}

void flatten(const Json& v, const std::string& path, std::vector<std::pair<std::string, std::string>>& rows) {
  if (v.is_object()) {
    for (auto it = v.begin(); it != v.end(); ++it)
      flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), rows);
  } else if (v.is_array()) {
    const bool flat = std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_primitive(); });
    if (flat) {
      std::string s = "[";
      for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + scalar_text(v[i]);
      rows.emplace_back(path, s + "]");
    } else {
      for (std::size_t i = 0; i < v.size(); ++i) flatten(v[i], path + "[" + std::to_string(i) + "]", rows);
    }
  } else {
    rows.emplace_back(path, scalar_text(v));
  }
}

void print_pretty(const Json& report, std::ostream& out) {
  std::vector<std::pair<std::string, std::string>> rows;
  flatten(report, "", rows);
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.first.size());
  for (const auto& r : rows) out << std::left << std::setw(static_cast<int>(width) + 2) << r.first << r.second << "\n";
}

int report_error(const char* kind, const std::string& msg, int code, std::ostream& out,
                 std::ostream& err) {
  Json j;
  j["error"] = {{"kind", kind}, {"message", msg}, {"exit_code", code}};
  out << j.dump(2) << "\n";
  err << "did-miss: " << msg << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Difference-in-differences for panels with missing outcomes", "did-miss"};
  app.require_subcommand(1);
  Options o;

  auto data_opts = [&](CLI::App* sc) {
    sc->add_option("--input", o.input, "CSV panel (id,d,y1,y2,auxK|wK,xJ); '-' reads stdin")->required();
    sc->add_option("--support", o.support, "declared outcome range MIN MAX")->expected(2);
    sc->add_flag("--pretty", o.pretty, "aligned text instead of JSON");
  };
  auto boot_opts = [&](CLI::App* sc) {
    sc->add_option("--bootstrap", o.bootstrap, "bootstrap replicates (0 = none)");
    sc->add_option("--seed", o.seed, "bootstrap seed");
    sc->add_option("--level", o.level, "confidence level");
  };
  auto sim_opts = [&](CLI::App* sc) {
    sc->add_option("--preset", o.preset, "DGP preset")->required();
    sc->add_option("--n", o.n, "sample size");
    sc->add_option("--seed", o.seed, "simulation seed");
    sc->add_flag("--pretty", o.pretty, "aligned text instead of JSON");
  };

  auto* cc = app.add_subcommand("cc", "complete-case DID");
  data_opts(cc);
  boot_opts(cc);
  auto* iv = app.add_subcommand("iv", "DID corrected with baseline response instruments");
  data_opts(iv);
  boot_opts(iv);
  iv->add_option("--aux", o.aux, "instrument column (1-based)")->required();
  iv->add_option("--aux2", o.aux2, "second instrument column (1-based)");
  auto* bounds = app.add_subcommand("bounds", "trimming bounds for the always-respondent ATT");
  data_opts(bounds);
  boot_opts(bounds);
  bounds->add_option("--mode", o.mode, "monotone | no-monotone");
  auto* pi = app.add_subcommand("pi", "principal-ignorability ATT");
  data_opts(pi);
  boot_opts(pi);
  pi->add_option("--covariates", o.covariates, "comma-separated covariate columns (default all)");
  auto* rates = app.add_subcommand("rates", "response rates by arm");
  data_opts(rates);
  auto* simulate = app.add_subcommand("simulate", "generate a panel from a preset");
  sim_opts(simulate);
  simulate->add_option("--out", o.out, "CSV output path")->required();
  simulate->add_option("--truth", o.truth, "JSON file for the latent truth");
  auto* decompose = app.add_subcommand("decompose", "oracle decomposition of the ATT on a preset");
  sim_opts(decompose);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << (app.get_subcommands().empty() ? app.help() : app.get_subcommands().front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    return report_error("usage", e.what(), 1, out, err);
  }

  const auto* sc = app.get_subcommands().front();
  const std::string name = sc->get_name();
  Json report;
  report["command"] = args;
  report["version"] = kVersion;
  try {
    Json diag = Json::object();
    Json result;
    if (name == "simulate" || name == "decompose") {
      report["seed"] = o.seed;
      result = name == "simulate" ? cmd_simulate(o) : cmd_decompose(o);
    } else {
      if (o.aux2 && o.aux2 == o.aux) throw InputError("--aux and --aux2 must differ");
      const auto loaded = load(o);
      const bool boots = name != "rates" && o.bootstrap > 0;
      report["seed"] = boots ? Json(o.seed) : Json(nullptr);
      report["dataset"] = dataset_block(loaded);
      if (name == "rates") result = cmd_rates(loaded);
      else if (name == "cc") result = cmd_cc(o, loaded, diag);
      else if (name == "iv") result = cmd_iv(o, loaded, diag);
      else if (name == "bounds") result = cmd_bounds(o, loaded, diag);
      else result = cmd_pi(o, loaded, diag);
    }
    report["result"] = result;
    report["diagnostics"] = diag;
  } catch (const RefusalError& e) {
    return report_error("refusal", e.what(), 2, out, err);
  } catch (const InputError& e) {
    return report_error("input", e.what(), 1, out, err);
  } catch (const std::exception& e) {
    return report_error("internal", e.what(), 1, out, err);
  }

  if (o.pretty)
    print_pretty(report, out);
  else
    out << report.dump(2) << "\n";
  return 0;
}

}  // namespace didmiss::cli
