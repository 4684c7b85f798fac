#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace didmiss {

// Malformed or invalid input. The CLI maps this to exit code 1.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The estimator cannot run on these data (weak instrument, no complete
// cases, infeasible trimming). The CLI maps this to exit code 2.
struct RefusalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const { return lo <= v && v <= hi; }
  bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
  double width() const { return hi - lo; }
  bool operator==(const Interval&) const = default;
};

// A probability that fell outside its admissible range and was clipped.
struct ClipEvent {
  std::string quantity;
  double raw = 0.0;
  double clipped = 0.0;
};

// Clip `raw` into [lo, hi]; out-of-range values are logged.
double clip_logged(const std::string& quantity, double raw, double lo, double hi,
                   std::vector<ClipEvent>& log);

// Treated-arm strata shares under monotonicity and parallel missingness
// trends, from the four response rates. Shared by the strata proportions
// and the per-cell principal scores so both clip identically.
struct TreatedStrata {
  double pi11 = 0.0;
  double pi10 = 0.0;
  double pi00 = 0.0;
};

TreatedStrata monotone_treated_strata(double r1_treated, double r1_control,
                                      double r2_treated, double r2_control,
                                      const std::string& label,
                                      std::vector<ClipEvent>& log);

}  // namespace didmiss
