#include "didmiss/registry.hpp"

#include "didmiss/iv.hpp"
#include "didmiss/principal.hpp"

namespace didmiss {

VectorEstimator estimator_by_name(const std::string& name, const EstimatorOptions& opts) {
  if (name == "cc-did")
    return [](const PanelDataset& d) { return std::vector<double>{did_complete_case(d).point}; };
  if (name == "iv") {
    if (!opts.aux) throw InputError("iv needs an aux index");
    const std::size_t k = *opts.aux;
    if (opts.aux2) {
      const std::size_t k2 = *opts.aux2;
      return [k, k2](const PanelDataset& d) {
        return std::vector<double>{att_iv_multi(d, k, k2).estimate.point};
      };
    }
    return [k](const PanelDataset& d) { return std::vector<double>{att_iv(d, k).estimate.point}; };
  }
  if (name == "att-ar-bounds") {
    const BoundsMode mode = opts.mode;
    return [mode](const PanelDataset& d) {
      const auto r = att_ar_bounds(d, mode);
      return std::vector<double>{r.lb, r.ub};
    };
  }
  if (name == "pi") {
    const auto cols = opts.covariates;
    return [cols](const PanelDataset& d) {
      return std::vector<double>{att_principal_ignorability(d, cols).estimate.point};
    };
  }
  throw InputError("unknown estimator '" + name + "'");
}

}  // namespace didmiss
