#include "didmiss/principal.hpp"

#include <map>
#include <string>

namespace didmiss {

namespace {

std::string cell_label(const std::vector<int>& x) {
  std::string s = "(";
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(x[i]);
  }
  return s + ")";
}

std::vector<std::size_t> resolve_columns(const PanelDataset& data,
                                         const std::vector<std::size_t>& covariates) {
  if (covariates.empty()) {
    std::vector<std::size_t> all(data.covariate_arity());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    return all;
  }
  for (auto j : covariates)
    if (j >= data.covariate_arity())
      throw InputError("covariate index " + std::to_string(j + 1) + " out of range (dataset has " +
                       std::to_string(data.covariate_arity()) + " covariates)");
  return covariates;
}

std::vector<int> key_of(const PanelRecord& r, const std::vector<std::size_t>& cols) {
  std::vector<int> k;
  k.reserve(cols.size());
  for (auto j : cols) k.push_back(r.x[j]);
  return k;
}

struct Counts {
  std::array<std::size_t, 2> n{}, r1{}, r2{}, cc{};
};

}  // namespace

PrincipalScoreTable principal_scores(const PanelDataset& data,
                                     const std::vector<std::size_t>& covariates) {
  PrincipalScoreTable t;
  t.covariates = resolve_columns(data, covariates);

  std::map<std::vector<int>, Counts> counts;
  for (const auto& r : data.records()) {
    auto& c = counts[key_of(r, t.covariates)];
    ++c.n[r.d];
    if (r.r1()) ++c.r1[r.d];
    if (r.r2()) ++c.r2[r.d];
    if (r.complete()) ++c.cc[r.d];
  }

  std::string empty;
  for (const auto& [x, c] : counts)
    for (int d = 0; d < 2; ++d)
      if (c.n[d] == 0) {
        if (!empty.empty()) empty += "; ";
        empty += "x=" + cell_label(x) + ", arm " + std::to_string(d);
      }
  if (!empty.empty()) throw RefusalError("empty covariate cell (" + empty + ")");

  const double n1 = static_cast<double>(data.arm_size(1));
  for (const auto& [x, c] : counts) {
    ScoreCell cell;
    cell.x = x;
    cell.n = c.n;
    cell.complete = c.cc;
    for (int d = 0; d < 2; ++d) {
      cell.p_r1[d] = static_cast<double>(c.r1[d]) / static_cast<double>(c.n[d]);
      cell.p_r2[d] = static_cast<double>(c.r2[d]) / static_cast<double>(c.n[d]);
    }
    const auto s = monotone_treated_strata(cell.p_r1[1], cell.p_r1[0], cell.p_r2[1],
                                           cell.p_r2[0], "e" + cell_label(x), t.clip_events);
    cell.e11 = s.pi11;
    cell.e10 = s.pi10;
    cell.e00 = s.pi00;
    for (int k = 0; k < 3; ++k)
      t.normalizers[k] += static_cast<double>(c.n[1]) * t.score(cell, k);
    t.cells.push_back(std::move(cell));
  }
  for (auto& v : t.normalizers) v /= n1;
  return t;
}

PiResult att_principal_ignorability(const PanelDataset& data,
                                    const std::vector<std::size_t>& covariates) {
  PiResult out;
  out.scores = principal_scores(data, covariates);
  const auto& table = out.scores;

  std::map<std::vector<int>, const ScoreCell*> by_x;
  for (const auto& c : table.cells) {
    for (int d = 0; d < 2; ++d)
      if (c.complete[d] == 0)
        throw RefusalError("no complete cases in covariate cell x=" + cell_label(c.x) +
                           ", arm " + std::to_string(d));
    by_x[c.x] = &c;
  }

  // Per complete case: its cell, so each stratum's weight is a lookup.
  struct Row {
    int d;
    const ScoreCell* cell;
    double y1, y2, dy;
  };
  std::vector<Row> rows;
  for (const auto& r : data.records())
    if (r.complete()) rows.push_back({r.d, by_x.at(key_of(r, table.covariates)), *r.y1, *r.y2, r.dy()});

  double att = 0.0;
  std::size_t used = 0;
  for (int s = 0; s < 3; ++s) {
    const double share = table.normalizers[s];
    if (!(share > 0.0)) continue;
    // Complete cases of arm d in cell x stand in for all n_d(x) units of
    // that cell, so the weighted means target the arm's covariate mix.
    std::array<double, 2> wsum{}, dsum{}, post{}, pre{};
    for (const auto& row : rows) {
      const auto& c = *row.cell;
      const double w = table.score(c, s) / share * static_cast<double>(c.n[row.d]) /
                       static_cast<double>(c.complete[row.d]);
      wsum[row.d] += w;
      dsum[row.d] += w * row.dy;
      post[row.d] += w * row.y2;
      pre[row.d] += w * row.y1;
    }
    for (int d = 0; d < 2; ++d)
      if (!(wsum[d] > 0.0))
        throw RefusalError("stratum " + std::string(kScoreStrata[s]) +
                           " has no weight among arm " + std::to_string(d) + " complete cases");
    StratumEffect e;
    e.share = share;
    e.effect = dsum[1] / wsum[1] - dsum[0] / wsum[0];
    e.means = {post[1] / wsum[1], pre[1] / wsum[1], post[0] / wsum[0], pre[0] / wsum[0]};
    att += share * e.effect;
    out.strata[s] = e;
    used = rows.size();
  }
  out.estimate.point = att;
  out.estimate.n_used = used;
  return out;
}

}  // namespace didmiss
