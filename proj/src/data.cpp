#include "aghq/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <unordered_map>

#include "aghq/error.hpp"

namespace aghq {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// Comma separated, optional double quotes around a field.
std::vector<std::string> split_row(const std::string &line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

double parse_number(const std::string &cell, std::size_t row, const std::string &col,
                    const std::string &source) {
  if (cell.empty())
    throw ParseError(source + ": row " + std::to_string(row) + ", column '" + col +
                     "': missing value (not supported)");
  double v = 0.0;
  const char *first = cell.data();
  const char *last = cell.data() + cell.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || !std::isfinite(v))
    throw ParseError(source + ": row " + std::to_string(row) + ", column '" + col + "': '" +
                     cell + "' is not a number");
  return v;
}

std::string format17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

GroupedDataset::GroupedDataset(std::vector<Group> groups, std::vector<std::string> fixed_names,
                               std::vector<std::string> raneff_names,
                               std::vector<std::string> response_names)
    : groups_(std::move(groups)), fixed_names_(std::move(fixed_names)),
      raneff_names_(std::move(raneff_names)), response_names_(std::move(response_names)) {
  if (groups_.empty()) throw std::invalid_argument("dataset has no groups");
  if (response_names_.empty() || response_names_.size() > 2)
    throw std::invalid_argument("dataset needs one response column or (time, status)");
  m_min_ = std::numeric_limits<int>::max();
  for (const Group &g : groups_) {
    const int m = g.size();
    if (m < 1) throw std::invalid_argument("group '" + g.id + "' has no rows");
    if (g.X.rows() != m || g.X.cols() != d() || g.V.rows() != m || g.V.cols() != p())
      throw std::invalid_argument("group '" + g.id + "' has inconsistent design dimensions");
    if (survival() != (g.status.size() == m))
      throw std::invalid_argument("group '" + g.id + "' has inconsistent status column");
    n_ += static_cast<std::size_t>(m);
    m_min_ = std::min(m_min_, m);
    m_max_ = std::max(m_max_, m);
  }
}

DatasetSummary summary(const GroupedDataset &data) {
  DatasetSummary s;
  s.M = data.M();
  s.n = data.n();
  s.m_min = data.m_min();
  s.m_max = data.m_max();
  for (const Group &g : data.groups()) s.sizes.push_back(g.size());
  return s;
}

std::vector<std::string> read_csv_header(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::string line;
  while (std::getline(in, line))
    if (!trim(line).empty()) return split_row(line);
  throw ParseError(path + ": empty file");
}

GroupedDataset parse_csv(std::istream &in, const CsvSchema &schema, const std::string &source) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (!trim(line).empty()) {
      header = split_row(line);
      break;
    }
  }
  if (header.empty()) throw ParseError(source + ": empty file");

  auto column = [&](const std::string &name) -> int {
    if (name == "1") return -1;
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError(source + ": missing column '" + name + "'");
    return static_cast<int>(it - header.begin());
  };
  if (schema.response_cols.empty() || schema.response_cols.size() > 2)
    throw std::invalid_argument("schema needs one response column or (time, status)");
  const int gcol = column(schema.group_col);
  if (gcol < 0) throw std::invalid_argument("schema: group column cannot be '1'");
  std::vector<int> rcols, xcols, vcols;
  for (const auto &c : schema.response_cols) rcols.push_back(column(c));
  for (const auto &c : schema.fixed_cols) xcols.push_back(column(c));
  for (const auto &c : schema.raneff_cols) vcols.push_back(column(c));
  for (int c : rcols)
    if (c < 0) throw std::invalid_argument("schema: response column cannot be '1'");

  struct Rows {
    std::vector<double> y, status;
    std::vector<std::vector<double>> x, v;
  };
  std::vector<std::string> order;
  std::unordered_map<std::string, Rows> rows;

  auto cell_value = [&](const std::vector<std::string> &cells, int col, std::size_t row) {
    return col < 0 ? 1.0 : parse_number(cells[col], row, header[col], source);
  };

  std::size_t row = 1; // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    auto cells = split_row(line);
    if (cells.size() != header.size())
      throw ParseError(source + ": row " + std::to_string(row) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(header.size()));
    const std::string &gid = cells[gcol];
    if (gid.empty())
      throw ParseError(source + ": row " + std::to_string(row) + ": empty group id");
    auto [it, inserted] = rows.try_emplace(gid);
    if (inserted) order.push_back(gid);
    Rows &r = it->second;
    r.y.push_back(cell_value(cells, rcols[0], row));
    if (rcols.size() == 2) r.status.push_back(cell_value(cells, rcols[1], row));
    std::vector<double> x, v;
    for (int c : xcols) x.push_back(cell_value(cells, c, row));
    for (int c : vcols) v.push_back(cell_value(cells, c, row));
    r.x.push_back(std::move(x));
    r.v.push_back(std::move(v));
  }
  if (order.empty()) throw ParseError(source + ": no data rows");

  const auto d = static_cast<Eigen::Index>(xcols.size());
  const auto p = static_cast<Eigen::Index>(vcols.size());
  std::vector<Group> groups;
  groups.reserve(order.size());
  for (const auto &gid : order) {
    Rows &r = rows.at(gid);
    const auto m = static_cast<Eigen::Index>(r.y.size());
    if (m == 0) throw ParseError(source + ": group '" + gid + "' has zero rows");
    Group g;
    g.id = gid;
    g.y = Eigen::Map<Eigen::VectorXd>(r.y.data(), m);
    if (!r.status.empty()) g.status = Eigen::Map<Eigen::VectorXd>(r.status.data(), m);
    g.X.resize(m, d);
    g.V.resize(m, p);
    for (Eigen::Index i = 0; i < m; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) g.X(i, j) = r.x[i][j];
      for (Eigen::Index j = 0; j < p; ++j) g.V(i, j) = r.v[i][j];
    }
    groups.push_back(std::move(g));
  }
  return GroupedDataset(std::move(groups), schema.fixed_cols, schema.raneff_cols,
                        schema.response_cols);
}

GroupedDataset read_csv(const std::string &path, const CsvSchema &schema) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  return parse_csv(in, schema, path);
}

CsvSchema schema_for(const GroupedDataset &data, const std::string &group_col) {
  CsvSchema s;
  s.group_col = group_col;
  s.response_cols = data.response_names();
  s.fixed_cols = data.fixed_names();
  s.raneff_cols = data.raneff_names();
  return s;
}

void write_csv(const GroupedDataset &data, std::ostream &out, const std::string &group_col) {
  // Stored columns, each written once; design columns named "1" are implicit.
  struct Source {
    std::string name;
    bool fixed;
    int index;
  };
  std::vector<Source> cols;
  auto add = [&](const std::string &name, bool fixed, int index) {
    if (name == "1") return;
    for (const auto &c : cols)
      if (c.name == name) return;
    cols.push_back({name, fixed, index});
  };
  for (int j = 0; j < data.d(); ++j) add(data.fixed_names()[j], true, j);
  for (int j = 0; j < data.p(); ++j) add(data.raneff_names()[j], false, j);

  out << group_col;
  for (const auto &r : data.response_names()) out << ',' << r;
  for (const auto &c : cols) out << ',' << c.name;
  out << '\n';
  for (const Group &g : data.groups()) {
    for (int i = 0; i < g.size(); ++i) {
      out << g.id << ',' << format17(g.y(i));
      if (data.survival()) out << ',' << format17(g.status(i));
      for (const auto &c : cols)
        out << ',' << format17(c.fixed ? g.X(i, c.index) : g.V(i, c.index));
      out << '\n';
    }
  }
}

void write_csv(const GroupedDataset &data, const std::string &path, const std::string &group_col) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  write_csv(data, out, group_col);
}

void check_compatible(const GroupedDataset &data, const ModelSpec &spec) {
  spec.validate();
  if (data.d() != spec.d || data.p() != spec.p)
    throw std::invalid_argument("dataset has d=" + std::to_string(data.d()) +
                                ", p=" + std::to_string(data.p()) + " but model expects d=" +
                                std::to_string(spec.d) + ", p=" + std::to_string(spec.p));
  if (data.survival() != spec.survival())
    throw std::invalid_argument(spec.survival()
                                    ? "weibull_ph needs (time, status) response columns"
                                    : "family takes a single response column");
  for (const Group &g : data.groups())
    for (int i = 0; i < g.size(); ++i) {
      try {
        check_response(spec.response, g.y(i), spec.survival() ? g.status(i) : 0.0);
      } catch (const std::invalid_argument &e) {
        throw std::invalid_argument("group '" + g.id + "', row " + std::to_string(i) + ": " +
                                    e.what());
      }
    }
}

ModelSpec spec_for(const GroupedDataset &data, ResponseFamily response, RaneffFamily raneff) {
  ModelSpec s;
  s.response = response;
  s.raneff = raneff;
  s.d = data.d();
  s.p = data.p();
  return s;
}

} // namespace aghq
