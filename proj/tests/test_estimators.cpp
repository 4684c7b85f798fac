#include <catch_amalgamated.hpp>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include "didmiss/estimators.hpp"
#include "didmiss/simulator.hpp"
#include "support.hpp"

using namespace didmiss;
using namespace testutil;
using Catch::Matchers::ContainsSubstring;

namespace {

PanelDataset random_panel(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  std::bernoulli_distribution coin(0.5), miss(0.2);
  std::vector<PanelRecord> rs;
  for (std::size_t i = 0; i < n; ++i) {
    const int d = i < 2 ? static_cast<int>(i) : coin(g);
    std::optional<double> y1 = z(g), y2 = z(g) + d;
    if (i >= 4 && miss(g)) y1.reset();
    if (i >= 4 && miss(g)) y2.reset();
    rs.push_back(rec(d, y1, y2));
  }
  // guarantee complete cases in both arms
  rs[0].y1 = rs[0].y2 = 0.5;
  rs[1].y1 = rs[1].y2 = 0.25;
  return PanelDataset(std::move(rs));
}

PanelDataset transform(const PanelDataset& data, double a, double b1, double b2) {
  std::vector<PanelRecord> rs = data.records();
  for (auto& r : rs) {
    if (r.y1) r.y1 = a * *r.y1 + b1;
    if (r.y2) r.y2 = a * *r.y2 + b2;
  }
  return PanelDataset(std::move(rs));
}

}  // namespace

TEST_CASE("complete-case DID: hand examples") {
  CHECK(did_complete_case(changes({2, 4}, {1, 1})).point == 2.0);
  CHECK(did_complete_case(changes({2, 4}, {1, 1})).n_used == 4);

  std::vector<PanelRecord> rs;
  for (int i = 0; i < 6; ++i) rs.push_back(rec(i % 2, 3.0, 3.0));
  const auto e = did_complete_case(PanelDataset(rs));
  CHECK(e.point == 0.0);
  CHECK(*e.se == 0.0);
}

TEST_CASE("complete-case DID ignores incomplete records") {
  std::vector<PanelRecord> rs = {rec(1, 0.0, 2.0), rec(1, na(), 100.0), rec(1, 5.0, na()),
                                 rec(0, 1.0, 1.5), rec(0, na(), -50.0)};
  const auto e = did_complete_case(PanelDataset(rs));
  CHECK(e.point == 1.5);
  CHECK(e.n_used == 2);
}

TEST_CASE("complete-case DID refuses an arm without complete cases") {
  std::vector<PanelRecord> rs = {rec(1, 0.0, 2.0), rec(0, na(), 1.0), rec(0, 1.0, na())};
  CHECK_THROWS_AS(did_complete_case(PanelDataset(rs)), RefusalError);
  CHECK_THROWS_WITH(did_complete_case(PanelDataset(rs)), ContainsSubstring("no complete cases in arm 0"));
}

TEST_CASE("naive full-data DID") {
  CHECK(naive_did_all(changes({2, 2, 2}, {0.5, 0.25, 0.75})).point == 1.5);
  std::vector<PanelRecord> rs = {rec(1, 0.0, na()), rec(0, 0.0, 1.0), rec(1, 0.0, 1.0)};
  CHECK_THROWS_WITH(naive_did_all(PanelDataset(rs)), ContainsSubstring("dataset contains missing outcomes"));
}

TEST_CASE("without missingness the two DIDs coincide exactly") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto sim = simulate_panel(make_preset(PresetKind::mnar_baseline, 300, seed));
    const auto full = full_data_view(sim.records);
    CHECK(did_complete_case(full).point == naive_did_all(full).point);
  }
}

TEST_CASE("location, scale and permutation properties") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    const auto data = random_panel(seed, 60);
    const double base = did_complete_case(data).point;
    // shifting every y2 by c cancels across arms
    CHECK(did_complete_case(transform(data, 1.0, 0.0, 3.7)).point ==
          Catch::Approx(base).epsilon(0).margin(1e-12));
    // scale by a power of two is exact in floating point
    CHECK(did_complete_case(transform(data, 4.0, 0.0, 0.0)).point == 4.0 * base);
    CHECK(did_complete_case(transform(data, 2.5, 0.0, 0.0)).point ==
          Catch::Approx(2.5 * base).epsilon(1e-13).margin(1e-13));

    std::vector<PanelRecord> rs = data.records();
    std::mt19937_64 g(seed);
    std::shuffle(rs.begin(), rs.end(), g);
    CHECK(did_complete_case(PanelDataset(rs)).point == Catch::Approx(base).epsilon(0).margin(1e-12));
  }
}

TEST_CASE("percentile interval is type 7") {
  // numpy.percentile([1..5], [2.5, 97.5]) = [1.1, 4.9]
  const auto ci = percentile_interval({5, 1, 4, 2, 3}, 0.95);
  CHECK(ci.lo == Catch::Approx(1.1).epsilon(0).margin(1e-12));
  CHECK(ci.hi == Catch::Approx(4.9).epsilon(0).margin(1e-12));
  const auto one = percentile_interval({7.0}, 0.9);
  CHECK(one.lo == 7.0);
  CHECK(one.hi == 7.0);
}

TEST_CASE("bootstrap: constant data, determinism, failure accounting") {
  std::vector<PanelRecord> rs;
  for (int i = 0; i < 20; ++i) rs.push_back(rec(i % 2, 1.0, 1.0));
  const PanelDataset flat(rs);
  const PointEstimator cc = [](const PanelDataset& d) { return did_complete_case(d).point; };
  const auto e = bootstrap_ci(flat, cc, {50, 3, 0.95});
  CHECK(*e.se == 0.0);
  CHECK(e.ci->lo == 0.0);
  CHECK(e.ci->hi == 0.0);

  const auto data = random_panel(11, 80);
  const auto a = bootstrap_ci(data, cc, {200, 42, 0.9});
  const auto b = bootstrap_ci(data, cc, {200, 42, 0.9});
  CHECK(a.point == b.point);
  CHECK(*a.se == *b.se);
  CHECK(a.ci->lo == b.ci->lo);
  CHECK(a.ci->hi == b.ci->hi);
  CHECK(a.ci->contains(a.point));
  CHECK(*a.se >= 0.0);
  CHECK(*a.level == 0.9);
  const auto c = bootstrap_ci(data, cc, {200, 43, 0.9});
  CHECK(c.ci->lo != a.ci->lo);

  // a minority of failing replicates is dropped and counted
  std::size_t calls = 0;
  std::mutex mu;
  const PointEstimator flaky = [&](const PanelDataset& d) {
    std::lock_guard lock(mu);
    if (++calls % 4 == 0) throw RefusalError("flaky");
    return did_complete_case(d).point;
  };
  const auto f = bootstrap_ci(data, flaky, {40, 1, 0.95});
  CHECK(f.failed_replicates > 0);
  CHECK(f.failed_replicates < 20);

  const PointEstimator broken = [&](const PanelDataset& d) -> double {
    if (d.size() > 0) throw RefusalError("always");
    return 0.0;
  };
  CHECK_THROWS_WITH(bootstrap_replicates(
                        data, [&](const PanelDataset& d) { return std::vector<double>{broken(d)}; },
                        {10, 1, 0.95}),
                    ContainsSubstring("10 of 10 replicates failed"));
}

TEST_CASE("bootstrap result does not depend on the worker count") {
  const auto data = random_panel(5, 100);
  const PointEstimator cc = [](const PanelDataset& d) { return did_complete_case(d).point; };
  setenv("DIDMISS_THREADS", "1", 1);
  const auto one = bootstrap_ci(data, cc, {64, 9, 0.95});
  setenv("DIDMISS_THREADS", "4", 1);
  const auto four = bootstrap_ci(data, cc, {64, 9, 0.95});
  unsetenv("DIDMISS_THREADS");
  CHECK(*one.se == *four.se);
  CHECK(one.ci->lo == four.ci->lo);
  CHECK(one.ci->hi == four.ci->hi);
}

TEST_CASE("bootstrap config validation") {
  const auto data = random_panel(5, 30);
  const PointEstimator cc = [](const PanelDataset& d) { return did_complete_case(d).point; };
  CHECK_THROWS_AS(bootstrap_ci(data, cc, {0, 1, 0.95}), InputError);
  CHECK_THROWS_AS(bootstrap_ci(data, cc, {10, 1, 1.0}), InputError);
}
