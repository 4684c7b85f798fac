#include "didmiss/estimators.hpp"

#include <cmath>
#include <string>

namespace didmiss {

double plain_mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sample_variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = plain_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return ss / static_cast<double>(v.size() - 1);
}

std::vector<double> complete_case_changes(const PanelDataset& data, int d) {
  std::vector<double> out;
  for (const auto& r : data.records())
    if (r.d == d && r.complete()) out.push_back(r.dy());
  return out;
}

namespace {
Estimate difference_of_means(const std::vector<double>& treated,
                             const std::vector<double>& control) {
  Estimate e;
  e.point = plain_mean(treated) - plain_mean(control);
  e.se = std::sqrt(sample_variance(treated) / static_cast<double>(treated.size()) +
                   sample_variance(control) / static_cast<double>(control.size()));
  e.n_used = treated.size() + control.size();
  return e;
}
}  // namespace

Estimate did_complete_case(const PanelDataset& data) {
  std::vector<double> arm[2] = {complete_case_changes(data, 0), complete_case_changes(data, 1)};
  for (int d = 0; d < 2; ++d)
    if (arm[d].empty()) throw RefusalError("no complete cases in arm " + std::to_string(d));
  return difference_of_means(arm[1], arm[0]);
}

Estimate naive_did_all(const PanelDataset& data) {
  std::vector<double> arm[2];
  for (const auto& r : data.records()) {
    if (!r.complete()) throw InputError("dataset contains missing outcomes");
    arm[r.d].push_back(r.dy());
  }
  for (int d = 0; d < 2; ++d)
    if (arm[d].empty()) throw InputError("no records in arm " + std::to_string(d));
  return difference_of_means(arm[1], arm[0]);
}

}  // namespace didmiss
