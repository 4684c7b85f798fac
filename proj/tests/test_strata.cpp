#include <catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>
#include <random>

#include "didmiss/simulator.hpp"
#include "didmiss/strata.hpp"
#include "support.hpp"

using namespace didmiss;
using namespace testutil;
using Catch::Matchers::ContainsSubstring;

namespace {

// Independent trimmed-mean evaluation for keep = j / 10: every value is
// given ten copies, so the kept share is exactly j * n of the 10 n copies.
double brute_trimmed(std::vector<double> v, int j, bool bottom) {
  std::vector<double> copies;
  for (double x : v)
    for (int c = 0; c < 10; ++c) copies.push_back(x);
  std::sort(copies.begin(), copies.end());
  if (!bottom) std::reverse(copies.begin(), copies.end());
  const std::size_t take = static_cast<std::size_t>(j) * v.size();
  double s = 0;
  for (std::size_t i = 0; i < take; ++i) s += copies[i];
  return s / static_cast<double>(take);
}

bool has_clip(const std::vector<ClipEvent>& ev, const std::string& needle) {
  return std::any_of(ev.begin(), ev.end(),
                     [&](const ClipEvent& e) { return e.quantity.find(needle) != std::string::npos; });
}

PanelDataset with_y2_shift(const PanelDataset& data, double c1, double c2) {
  auto rs = data.records();
  for (auto& r : rs) {
    if (r.y1) *r.y1 += c1;
    if (r.y2) *r.y2 += c2;
  }
  return PanelDataset(std::move(rs));
}

}  // namespace

TEST_CASE("monotone proportions from four survey response rates") {
  const auto p = strata_proportions_monotone(RateTable::given({0.5774, 0.6084}, {0.5428, 0.5513}));
  CHECK(p.at(1, StrataCell::c11).lo == Catch::Approx(0.5738).epsilon(0).margin(1e-9));
  CHECK(p.at(1, StrataCell::c11).hi == p.at(1, StrataCell::c11).lo);
  CHECK(p.at(1, StrataCell::c10).lo == 0.0);
  REQUIRE(p.clip_events.size() == 1);
  CHECK(p.clip_events[0].quantity.find("_10") != std::string::npos);
  CHECK(p.clip_events[0].raw == Catch::Approx(-0.0225).epsilon(0).margin(1e-9));
  CHECK(p.inconsistent());
  CHECK(p.at(1, StrataCell::c01).hi == 0.0);
  CHECK(p.at(0, StrataCell::c01).hi == 0.0);
  CHECK(p.at(0, StrataCell::c11).lo == 0.5428);
  // treated cells still sum to one after clipping
  double sum = 0;
  for (int c = 0; c < 4; ++c) sum += p.pi[1][c].lo;
  CHECK(sum == Catch::Approx(1.0).epsilon(0).margin(1e-12));
}

TEST_CASE("no missingness: everyone is an always-respondent") {
  const auto t = RateTable::given({1, 1}, {1, 1});
  for (const auto& p : {strata_proportions_monotone(t), strata_proportions_bounds(t)}) {
    for (int d = 0; d < 2; ++d) {
      CHECK(p.at(d, StrataCell::c11) == Interval{1, 1});
      for (auto c : {StrataCell::c10, StrataCell::c01, StrataCell::c00})
        CHECK(p.at(d, c) == Interval{0, 0});
    }
    CHECK(p.clip_events.empty());
    CHECK(!p.refuted);
  }
}

TEST_CASE("bounds on the always-respondent share: hand example") {
  const auto p = strata_proportions_bounds(RateTable::given({1, 1}, {0.9, 0.8}));
  REQUIRE(p.counterfactual_response);
  CHECK((*p.counterfactual_response)[0] == Catch::Approx(0.9).epsilon(0).margin(1e-15));
  CHECK(p.at(1, StrataCell::c11).lo == Catch::Approx(0.7).epsilon(0).margin(1e-12));
  CHECK(p.at(1, StrataCell::c11).hi == Catch::Approx(0.8).epsilon(0).margin(1e-12));
  CHECK(p.at(0, StrataCell::c11).lo == Catch::Approx(0.7).epsilon(0).margin(1e-12));
  CHECK(p.at(0, StrataCell::c11).hi == Catch::Approx(0.8).epsilon(0).margin(1e-12));
}

TEST_CASE("bounds: linear constraints hold at both endpoints") {
  std::mt19937_64 g(17);
  std::uniform_real_distribution<double> u(0.3, 1.0);
  for (int rep = 0; rep < 500; ++rep) {
    const std::array<double, 2> r1 = {u(g), u(g)}, r2 = {u(g), u(g)};
    const auto p = strata_proportions_bounds(RateTable::given(r1, r2));
    const double a = (*p.counterfactual_response)[0], b = (*p.counterfactual_response)[1];
    for (int end = 0; end < 2; ++end) {
      auto at = [&](int d, StrataCell c) {
        const auto& i = p.at(d, c);
        // 11 and 00 move with the endpoint, 10 and 01 against it
        const bool with = c == StrataCell::c11 || c == StrataCell::c00;
        return (end == 0) == with ? i.lo : i.hi;
      };
      for (int d = 0; d < 2; ++d) {
        double total = 0;
        for (int c = 0; c < 4; ++c) total += at(d, static_cast<StrataCell>(c));
        CHECK(total == Catch::Approx(1.0).epsilon(0).margin(1e-12));
      }
      // treated: R2(1) observed; control: R2(0) observed
      CHECK(at(1, StrataCell::c11) + at(1, StrataCell::c10) == Catch::Approx(r2[1]).epsilon(0).margin(1e-12));
      CHECK(at(1, StrataCell::c11) + at(1, StrataCell::c01) == Catch::Approx(a).epsilon(0).margin(1e-12));
      CHECK(at(0, StrataCell::c11) + at(0, StrataCell::c01) == Catch::Approx(r2[0]).epsilon(0).margin(1e-12));
      CHECK(at(0, StrataCell::c11) + at(0, StrataCell::c10) == Catch::Approx(b).epsilon(0).margin(1e-12));
    }
    for (int d = 0; d < 2; ++d)
      for (int c = 0; c < 4; ++c) {
        CHECK(p.pi[d][c].lo >= -1e-12);
        CHECK(p.pi[d][c].lo <= p.pi[d][c].hi);
      }
  }
}

TEST_CASE("absent rates cannot feed the proportions") {
  RateTable t;
  CHECK_THROWS_AS(strata_proportions_monotone(t), RefusalError);
}

TEST_CASE("trimmed mean: hand examples and errors") {
  const std::vector<double> v = {4, 2, 1, 3};
  CHECK(trimmed_mean(v, 0.5, TrimSide::bottom) == 1.5);
  CHECK(trimmed_mean(v, 0.5, TrimSide::top) == 3.5);
  const std::vector<double> w = {1, 2, 3};
  CHECK(trimmed_mean(w, 0.5, TrimSide::bottom) == Catch::Approx(4.0 / 3.0).epsilon(0).margin(1e-15));
  CHECK(trimmed_mean(w, 0.5, TrimSide::top) == Catch::Approx(8.0 / 3.0).epsilon(0).margin(1e-15));
  const std::vector<double> z = {0.1, 0.7, 0.2, 1e3, -5};
  CHECK(trimmed_mean(z, 1.0, TrimSide::bottom) == plain_mean(z));
  CHECK(trimmed_mean(z, 1.0, TrimSide::top) == plain_mean(z));
  CHECK_THROWS_AS(trimmed_mean(std::vector<double>{}, 0.5, TrimSide::bottom), InputError);
  CHECK_THROWS_AS(trimmed_mean(w, 0.0, TrimSide::bottom), InputError);
  CHECK_THROWS_AS(trimmed_mean(w, 1.5, TrimSide::top), InputError);
}

TEST_CASE("trimmed mean: brute-force oracle and ordering properties") {
  std::mt19937_64 g(99);
  std::uniform_int_distribution<int> size(1, 12), grid(-6, 6);
  for (int rep = 0; rep < 400; ++rep) {
    std::vector<double> v(size(g));
    for (auto& x : v) x = grid(g) * 0.5;
    const double mean = plain_mean(v);
    const bool constant = std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
    double prev_bottom = -1e300, prev_top = 1e300;
    for (int j = 1; j <= 10; ++j) {
      const double p = j / 10.0;
      const double lo = trimmed_mean(v, p, TrimSide::bottom);
      const double hi = trimmed_mean(v, p, TrimSide::top);
      CHECK(lo == Catch::Approx(brute_trimmed(v, j, true)).epsilon(0).margin(1e-12));
      CHECK(hi == Catch::Approx(brute_trimmed(v, j, false)).epsilon(0).margin(1e-12));
      CHECK(lo <= mean + 1e-12);
      CHECK(hi >= mean - 1e-12);
      if (j < 10 && !constant) {
        // strict unless the kept part already equals the mean
        CHECK(lo <= hi);
      }
      CHECK(lo >= prev_bottom - 1e-12);
      CHECK(hi <= prev_top + 1e-12);
      prev_bottom = lo;
      prev_top = hi;
    }
  }
}

TEST_CASE("trimmed mean is strictly inside for non-constant data") {
  const std::vector<double> v = {1, 5, 2, 8, 3};
  for (double p : {0.1, 0.35, 0.5, 0.77, 0.99}) {
    CHECK(trimmed_mean(v, p, TrimSide::bottom) < plain_mean(v));
    CHECK(trimmed_mean(v, p, TrimSide::top) > plain_mean(v));
  }
}

TEST_CASE("monotone bounds collapse to the complete-case DID without missingness") {
  for (auto kind : kPresets) {
    const auto sim = simulate_panel(make_preset(kind, 500, 4));
    const auto full = full_data_view(sim.records);
    const auto b = att_ar_bounds(full, BoundsMode::monotone);
    const double cc = did_complete_case(full).point;
    CHECK(b.lb == cc);
    CHECK(b.ub == cc);
    CHECK(*b.trim_share[0] == 1.0);
    CHECK(*b.trim_share[1] == 1.0);
    const auto nb = att_ar_bounds(full, BoundsMode::no_monotone);
    CHECK(nb.lb == cc);
    CHECK(nb.ub == cc);
  }
}

TEST_CASE("bounds: shift invariance, ordering and nesting") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto sim = simulate_panel(make_preset(PresetKind::monotone, 4000, seed));
    const auto m = att_ar_bounds(sim.data, BoundsMode::monotone);
    const auto nm = att_ar_bounds(sim.data, BoundsMode::no_monotone);
    CHECK(m.lb <= m.ub);
    CHECK(nm.lb <= nm.ub);
    CHECK(nm.interval().contains(m.interval()));
    CHECK(m.assumptions_used == std::vector<std::string>{"pt-principal", "pt-missing", "monotonicity"});
    CHECK(nm.assumptions_used ==
          std::vector<std::string>{"pt-principal", "pt-missing", "homogeneous-missingness"});

    for (auto [c1, c2] : {std::pair{2.5, 2.5}, std::pair{0.0, -1.75}}) {
      const auto s = att_ar_bounds(with_y2_shift(sim.data, c1, c2), BoundsMode::monotone);
      CHECK(s.lb == Catch::Approx(m.lb).epsilon(0).margin(1e-12));
      CHECK(s.ub == Catch::Approx(m.ub).epsilon(0).margin(1e-12));
    }
  }
}

TEST_CASE("bounds: trim share follows the always-respondent share") {
  const auto sim = simulate_panel(make_preset(PresetKind::monotone, 20000, 2));
  const auto b = att_ar_bounds(sim.data, BoundsMode::monotone);
  const auto t = compute_rates(sim.data);
  CHECK(*b.trim_share[1] ==
        Catch::Approx(b.proportions.at(1, StrataCell::c11).lo / t.p_r2[1].value()).epsilon(0).margin(1e-15));
  CHECK(*b.trim_share[0] == 1.0);
  std::vector<double> dy1 = complete_case_changes(sim.data, 1);
  CHECK(b.arm_bounds[1].lo == trimmed_mean(dy1, *b.trim_share[1], TrimSide::bottom));
  CHECK(b.arm_bounds[1].hi == trimmed_mean(dy1, *b.trim_share[1], TrimSide::top));
  CHECK(b.lb == b.arm_bounds[1].lo - plain_mean(complete_case_changes(sim.data, 0)));
}

TEST_CASE("bounds: null effect is covered") {
  auto spec = make_preset(PresetKind::monotone, 50000, 8);
  spec.effect.fill(0.0);
  const auto sim = simulate_panel(spec);
  CHECK(att_ar_bounds(sim.data, BoundsMode::monotone).interval().contains(0.0));
  CHECK(att_ar_bounds(sim.data, BoundsMode::no_monotone).interval().contains(0.0));
}

TEST_CASE("bounds: support fallback when trimming is infeasible") {
  // treated arm: no always-respondents implied (control response drops far
  // more than first-wave response differs)
  std::vector<PanelRecord> rs;
  for (int i = 0; i < 10; ++i) rs.push_back(rec(1, i < 3 ? std::optional<double>(0.0) : na(), i < 4 ? std::optional<double>(i % 2) : na()));
  for (int i = 0; i < 10; ++i) rs.push_back(rec(0, 1.0, i < 2 ? std::optional<double>(1.0 - i % 2) : na()));
  const PanelDataset bare(rs);
  CHECK_THROWS_AS(att_ar_bounds(bare, BoundsMode::monotone), RefusalError);
  CHECK_THROWS_WITH(att_ar_bounds(bare, BoundsMode::monotone),
                    ContainsSubstring("trimming infeasible and no outcome support declared"));

  const auto data = bare.with_support(Interval{0.0, 1.0});
  const auto b = att_ar_bounds(data, BoundsMode::monotone);
  CHECK(b.support_fallback);
  CHECK(b.arm_fallback[1]);
  CHECK(!b.trim_share[1]);
  // treated arm spans [-1, 1]; control mean change is -0.5; clamped to the span
  CHECK(b.arm_bounds[1] == Interval{-1.0, 1.0});
  CHECK(b.arm_bounds[0] == Interval{-0.5, -0.5});
  CHECK(b.lb == -0.5);
  CHECK(b.ub == 1.0);
}

TEST_CASE("bounds: refusal without control complete cases") {
  std::vector<PanelRecord> rs = {rec(1, 0.0, 1.0), rec(1, 0.0, 2.0), rec(0, na(), 1.0), rec(0, 1.0, na())};
  CHECK_THROWS_WITH(att_ar_bounds(PanelDataset(rs), BoundsMode::monotone),
                    ContainsSubstring("no complete cases in arm 0"));
}

TEST_CASE("bounds bootstrap is deterministic and brackets the estimate") {
  const auto sim = simulate_panel(make_preset(PresetKind::no_monotone, 3000, 6));
  const auto b = att_ar_bounds(sim.data, BoundsMode::no_monotone);
  const auto x = bootstrap_bounds(sim.data, BoundsMode::no_monotone, {100, 5, 0.9});
  const auto y = bootstrap_bounds(sim.data, BoundsMode::no_monotone, {100, 5, 0.9});
  CHECK(x.outer == y.outer);
  CHECK(x.lb_ci == y.lb_ci);
  CHECK(x.outer.contains(b.interval()));
  CHECK(x.outer.lo == std::min(x.lb_ci.lo, b.lb));
  CHECK(x.failed == 0);
}

TEST_CASE("mode names round trip") {
  CHECK(parse_mode("monotone") == BoundsMode::monotone);
  CHECK(parse_mode(mode_name(BoundsMode::no_monotone)) == BoundsMode::no_monotone);
  CHECK_THROWS_AS(parse_mode("both"), InputError);
}

TEST_CASE("clip helper logs only real violations") {
  std::vector<ClipEvent> log;
  CHECK(clip_logged("a", 0.5, 0, 1, log) == 0.5);
  CHECK(clip_logged("b", 1.0 + 1e-15, 0, 1, log) == 1.0);
  CHECK(log.empty());
  CHECK(clip_logged("c", -0.2, 0, 1, log) == 0.0);
  CHECK(has_clip(log, "c"));
}
