#include "didmiss/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <iterator>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

namespace didmiss {

namespace {

std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    // skip blank lines
    if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty())
          throw InputError("malformed CSV: stray quote on line " + std::to_string(line));
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (quoted) throw InputError("malformed CSV: unterminated quote");
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

bool is_missing(const std::string& s) {
  if (s.empty()) return true;
  if (s.size() != 2) return false;
  return (s[0] == 'N' || s[0] == 'n') && (s[1] == 'A' || s[1] == 'a');
}

std::string where(std::size_t row, const std::string& column) {
  return " (data row " + std::to_string(row) + ", column '" + column + "')";
}

std::optional<double> parse_outcome(const std::string& raw, std::size_t row,
                                    const std::string& col) {
  std::string s = trim(raw);
  if (is_missing(s)) return std::nullopt;
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("unparseable numeric value '" + s + "'" + where(row, col));
  if (!std::isfinite(v)) throw InputError("non-finite value '" + s + "'" + where(row, col));
  return v;
}

long parse_integer(const std::string& raw, std::size_t row, const std::string& col) {
  std::string s = trim(raw);
  if (is_missing(s)) throw InputError("missing value not allowed" + where(row, col));
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw InputError("expected an integer, got '" + s + "'" + where(row, col));
  return v;
}

}  // namespace

PanelDataset::PanelDataset(std::vector<PanelRecord> records, std::optional<Interval> support)
    : support_(support) {
  if (records.empty()) throw InputError("empty dataset");
  aux_arity_ = records.front().aux.size();
  cov_arity_ = records.front().x.size();
  if (support_ && !(support_->lo <= support_->hi))
    throw InputError("outcome support must satisfy min <= max");
  for (const auto& r : records) {
    if (r.d != 0 && r.d != 1)
      throw InputError("treatment value outside {0,1} for unit '" + r.unit_id + "'");
    if (r.aux.size() != aux_arity_) throw InputError("inconsistent aux arity");
    if (r.x.size() != cov_arity_) throw InputError("inconsistent covariate arity");
    for (auto a : r.aux)
      if (a > 1) throw InputError("auxiliary indicator outside {0,1} for unit '" + r.unit_id + "'");
    for (auto v : r.x)
      if (v < 0) throw InputError("negative covariate category for unit '" + r.unit_id + "'");
    for (const auto& y : {r.y1, r.y2}) {
      if (!y) continue;
      if (!std::isfinite(*y)) throw InputError("non-finite outcome for unit '" + r.unit_id + "'");
      if (support_ && (*y < support_->lo || *y > support_->hi))
        throw InputError("outcome outside declared support for unit '" + r.unit_id + "'");
    }
    ++arm_size_[r.d];
  }
  if (arm_size_[0] == 0 || arm_size_[1] == 0) throw InputError("single-arm dataset");
  records_ = std::make_shared<const std::vector<PanelRecord>>(std::move(records));
}

PanelDataset PanelDataset::with_support(std::optional<Interval> support) const {
  PanelDataset copy = *this;
  if (support) {
    if (!(support->lo <= support->hi)) throw InputError("outcome support must satisfy min <= max");
    for (const auto& r : *records_)
      for (const auto& y : {r.y1, r.y2})
        if (y && (*y < support->lo || *y > support->hi))
          throw InputError("outcome outside declared support for unit '" + r.unit_id + "'");
  }
  copy.support_ = support;
  return copy;
}

ColumnMapping ColumnMapping::from_header(const std::vector<std::string>& header) {
  ColumnMapping m;
  static const std::regex aux_re("aux([0-9]+)");
  static const std::regex var_re("w([0-9]+)");
  static const std::regex cov_re("x([0-9]+)");
  std::map<std::pair<long, int>, AuxColumn> aux;
  std::map<long, std::string> cov;
  for (const auto& raw : header) {
    std::string h = trim(raw);
    std::smatch mt;
    if (std::regex_match(h, mt, aux_re))
      aux[{std::stol(mt[1]), 0}] = {h, AuxKind::indicator};
    else if (std::regex_match(h, mt, var_re))
      aux[{std::stol(mt[1]), 1}] = {h, AuxKind::variable};
    else if (std::regex_match(h, mt, cov_re))
      cov[std::stol(mt[1])] = h;
  }
  for (auto& [k, col] : aux) m.aux.push_back(col);
  for (auto& [k, name] : cov) m.covariates.push_back(name);
  return m;
}

PanelDataset load_panel(std::istream& in, const ColumnMapping& schema,
                        std::optional<Interval> support) {
  auto rows = parse_csv(in);
  if (rows.empty()) throw InputError("empty dataset");
  std::vector<std::string> header;
  for (const auto& h : rows.front()) header.push_back(trim(h));

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!index.emplace(header[i], i).second)
      throw InputError("malformed CSV: duplicate column '" + header[i] + "'");
  }
  auto column = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw InputError("missing required column '" + name + "'");
    return it->second;
  };
  const std::size_t c_id = column(schema.id), c_d = column(schema.d), c_y1 = column(schema.y1),
                    c_y2 = column(schema.y2);
  std::vector<std::size_t> c_aux, c_cov;
  for (const auto& a : schema.aux) c_aux.push_back(column(a.name));
  for (const auto& x : schema.covariates) c_cov.push_back(column(x));

  std::vector<PanelRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size())
      throw InputError("malformed CSV: data row " + std::to_string(r) + " has " +
                       std::to_string(row.size()) + " fields, header has " +
                       std::to_string(header.size()));
    PanelRecord rec;
    rec.unit_id = row[c_id];
    long d = parse_integer(row[c_d], r, schema.d);
    if (d != 0 && d != 1)
      throw InputError("treatment value outside {0,1}" + where(r, schema.d));
    rec.d = static_cast<int>(d);
    rec.y1 = parse_outcome(row[c_y1], r, schema.y1);
    rec.y2 = parse_outcome(row[c_y2], r, schema.y2);
    for (std::size_t k = 0; k < c_aux.size(); ++k) {
      const auto& col = schema.aux[k];
      const std::string cell = trim(row[c_aux[k]]);
      if (col.kind == AuxKind::variable) {
        rec.aux.push_back(is_missing(cell) ? 0 : 1);
        if (!is_missing(cell)) parse_outcome(cell, r, col.name);  // must still be numeric
      } else {
        long v = parse_integer(cell, r, col.name);
        if (v != 0 && v != 1)
          throw InputError("auxiliary indicator outside {0,1}" + where(r, col.name));
        rec.aux.push_back(static_cast<std::uint8_t>(v));
      }
    }
    for (std::size_t j = 0; j < c_cov.size(); ++j) {
      long v = parse_integer(row[c_cov[j]], r, schema.covariates[j]);
      if (v < 0 || v > 1'000'000)
        throw InputError("covariate must be a small non-negative integer" +
                         where(r, schema.covariates[j]));
      rec.x.push_back(static_cast<int>(v));
    }
    records.push_back(std::move(rec));
  }
  return PanelDataset(std::move(records), support);
}

PanelDataset load_panel(std::istream& in, std::optional<Interval> support) {
  std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::istringstream probe(text);
  auto rows = parse_csv(probe);
  if (rows.empty()) throw InputError("empty dataset");
  ColumnMapping m = ColumnMapping::from_header(rows.front());
  std::istringstream again(text);
  return load_panel(again, m, support);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

namespace {
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos && s == trim(s) && !is_missing(s))
    return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q.push_back('"');
    q.push_back(c);
  }
  q.push_back('"');
  return q;
}
}  // namespace

void write_panel_csv(std::ostream& out, const PanelDataset& data) {
  out << "id,d,y1,y2";
  for (std::size_t k = 0; k < data.aux_arity(); ++k) out << ",aux" << k + 1;
  for (std::size_t j = 0; j < data.covariate_arity(); ++j) out << ",x" << j + 1;
  out << '\n';
  for (const auto& r : data.records()) {
    out << csv_field(r.unit_id) << ',' << r.d << ',';
    if (r.y1) out << format_double(*r.y1);
    out << ',';
    if (r.y2) out << format_double(*r.y2);
    for (auto a : r.aux) out << ',' << int(a);
    for (auto x : r.x) out << ',' << x;
    out << '\n';
  }
}

}  // namespace didmiss
