#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "didmiss/common.hpp"

namespace didmiss {

struct PanelRecord {
  std::string unit_id;
  int d = 0;
  std::optional<double> y1;
  std::optional<double> y2;
  std::vector<std::uint8_t> aux;  // auxiliary response indicators, 0/1
  std::vector<int> x;             // discrete covariate categories

  bool r1() const { return y1.has_value(); }
  bool r2() const { return y2.has_value(); }
  bool complete() const { return r1() && r2(); }
  // Only meaningful for complete records.
  double dy() const { return *y2 - *y1; }

  bool operator==(const PanelRecord&) const = default;
};

// Immutable after construction; copies share the record storage.
class PanelDataset {
 public:
  explicit PanelDataset(std::vector<PanelRecord> records,
                        std::optional<Interval> outcome_support = std::nullopt);

  const std::vector<PanelRecord>& records() const { return *records_; }
  std::size_t size() const { return records_->size(); }
  std::size_t arm_size(int d) const { return arm_size_[d]; }
  std::size_t aux_arity() const { return aux_arity_; }
  std::size_t covariate_arity() const { return cov_arity_; }
  const std::optional<Interval>& outcome_support() const { return support_; }

  // Same records, different declared support (validated again).
  PanelDataset with_support(std::optional<Interval> support) const;

 private:
  std::shared_ptr<const std::vector<PanelRecord>> records_;
  std::optional<Interval> support_;
  std::array<std::size_t, 2> arm_size_{};
  std::size_t aux_arity_ = 0;
  std::size_t cov_arity_ = 0;
};

enum class AuxKind { indicator, variable };

struct AuxColumn {
  std::string name;
  AuxKind kind = AuxKind::indicator;
};

struct ColumnMapping {
  std::string id = "id";
  std::string d = "d";
  std::string y1 = "y1";
  std::string y2 = "y2";
  std::vector<AuxColumn> aux;
  std::vector<std::string> covariates;

  // Standard layout: id,d,y1,y2 plus auxK (0/1), wK (variables whose
  // presence is the indicator) and xJ columns, ordered by their index.
  static ColumnMapping from_header(const std::vector<std::string>& header);
};

// CSV with a header row. Empty cells and "NA" (any case) are missing.
PanelDataset load_panel(std::istream& in, const ColumnMapping& schema,
                        std::optional<Interval> outcome_support = std::nullopt);
// Infers the mapping from the header.
PanelDataset load_panel(std::istream& in,
                        std::optional<Interval> outcome_support = std::nullopt);

// Writes the standard layout (aux as 0/1 indicator columns); reloading
// with load_panel reproduces the records exactly.
void write_panel_csv(std::ostream& out, const PanelDataset& data);

// Shortest round-trip decimal form of a double.
std::string format_double(double v);

class Rate {
 public:
  Rate() = default;  // absent
  static Rate counted(std::size_t hits, std::size_t trials);
  static Rate given(double p);

  bool present() const { return present_; }
  // Throws RefusalError when absent.
  double value() const;
  std::size_t hits() const { return hits_; }
  std::size_t trials() const { return trials_; }

 private:
  bool present_ = false;
  double value_ = 0.0;
  std::size_t hits_ = 0;
  std::size_t trials_ = 0;
};

struct RateTable {
  std::array<std::size_t, 2> n{};
  std::array<Rate, 2> p_r1;
  std::array<Rate, 2> p_r2;
  std::array<Rate, 2> p_r2_given_r1;
  // [d][k][v] = Pr(R2 = 1 | D = d, aux_k = v, R1 = 1)
  std::array<std::vector<std::array<Rate, 2>>, 2> p_r2_given_aux;

  // Rates supplied directly, e.g. taken from a report.
  static RateTable given(std::array<double, 2> p_r1, std::array<double, 2> p_r2);
};

RateTable compute_rates(const PanelDataset& data);

}  // namespace didmiss
