#include "didmiss/panel.hpp"

namespace didmiss {

Rate Rate::counted(std::size_t hits, std::size_t trials) {
  Rate r;
  r.hits_ = hits;
  r.trials_ = trials;
  if (trials > 0) {
    r.present_ = true;
    r.value_ = static_cast<double>(hits) / static_cast<double>(trials);
  }
  return r;
}

Rate Rate::given(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("rate outside [0,1]");
  Rate r;
  r.present_ = true;
  r.value_ = p;
  return r;
}

double Rate::value() const {
  if (!present_) throw RefusalError("rate absent (zero denominator)");
  return value_;
}

RateTable RateTable::given(std::array<double, 2> p_r1, std::array<double, 2> p_r2) {
  RateTable t;
  for (int d = 0; d < 2; ++d) {
    t.p_r1[d] = Rate::given(p_r1[d]);
    t.p_r2[d] = Rate::given(p_r2[d]);
  }
  return t;
}

RateTable compute_rates(const PanelDataset& data) {
  const std::size_t K = data.aux_arity();
  std::array<std::size_t, 2> n{}, r1{}, r2{}, r1r2{};
  // [d][k][v] -> (R1=1 count, R1=1 & R2=1 count)
  std::array<std::vector<std::array<std::array<std::size_t, 2>, 2>>, 2> aux{};
  for (int d = 0; d < 2; ++d) aux[d].assign(K, {});

  for (const auto& r : data.records()) {
    ++n[r.d];
    if (r.r1()) ++r1[r.d];
    if (r.r2()) ++r2[r.d];
    if (r.complete()) ++r1r2[r.d];
    if (!r.r1()) continue;
    for (std::size_t k = 0; k < K; ++k) {
      auto& cell = aux[r.d][k][r.aux[k]];
      ++cell[0];
      if (r.r2()) ++cell[1];
    }
  }

  RateTable t;
  t.n = n;
  for (int d = 0; d < 2; ++d) {
    t.p_r1[d] = Rate::counted(r1[d], n[d]);
    t.p_r2[d] = Rate::counted(r2[d], n[d]);
    t.p_r2_given_r1[d] = Rate::counted(r1r2[d], r1[d]);
    t.p_r2_given_aux[d].resize(K);
    for (std::size_t k = 0; k < K; ++k)
      for (int v = 0; v < 2; ++v)
        t.p_r2_given_aux[d][k][v] = Rate::counted(aux[d][k][v][1], aux[d][k][v][0]);
  }
  return t;
}

}  // namespace didmiss
