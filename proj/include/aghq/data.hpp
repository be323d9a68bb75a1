#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aghq/families.hpp"

namespace aghq {

/// Observations sharing one random-effects vector.
struct Group {
  std::string id;
  Eigen::VectorXd y;      ///< response, or event/censoring time for survival data
  Eigen::VectorXd status; ///< 1 = event, 0 = censored; empty unless survival
  Eigen::MatrixXd X;      ///< m x d fixed-effect design
  Eigen::MatrixXd V;      ///< m x p random-effect design

  int size() const noexcept { return static_cast<int>(y.size()); }
};

/// Column mapping for CSV ingestion. The name "1" in fixed_cols or
/// raneff_cols denotes a constant (intercept) column.
struct CsvSchema {
  std::string group_col = "group";
  std::vector<std::string> response_cols{"y"};
  std::vector<std::string> fixed_cols{"1"};
  std::vector<std::string> raneff_cols{"1"};
};

class GroupedDataset {
public:
  GroupedDataset() = default;
  GroupedDataset(std::vector<Group> groups, std::vector<std::string> fixed_names,
                 std::vector<std::string> raneff_names, std::vector<std::string> response_names);

  const std::vector<Group> &groups() const noexcept { return groups_; }
  const Group &group(std::size_t i) const { return groups_.at(i); }
  std::size_t M() const noexcept { return groups_.size(); }
  std::size_t n() const noexcept { return n_; }
  int m_min() const noexcept { return m_min_; }
  int m_max() const noexcept { return m_max_; }
  int d() const noexcept { return static_cast<int>(fixed_names_.size()); }
  int p() const noexcept { return static_cast<int>(raneff_names_.size()); }
  bool survival() const noexcept { return response_names_.size() == 2; }

  const std::vector<std::string> &fixed_names() const noexcept { return fixed_names_; }
  const std::vector<std::string> &raneff_names() const noexcept { return raneff_names_; }
  const std::vector<std::string> &response_names() const noexcept { return response_names_; }

private:
  std::vector<Group> groups_;
  std::vector<std::string> fixed_names_;
  std::vector<std::string> raneff_names_;
  std::vector<std::string> response_names_;
  std::size_t n_ = 0;
  int m_min_ = 0;
  int m_max_ = 0;
};

struct DatasetSummary {
  std::size_t M = 0;
  std::size_t n = 0;
  int m_min = 0;
  int m_max = 0;
  std::vector<int> sizes;
};

DatasetSummary summary(const GroupedDataset &data);

/// Groups rows by schema.group_col in order of first appearance. Throws
/// ParseError for a missing column, empty file, empty or non-numeric cell.
GroupedDataset read_csv(const std::string &path, const CsvSchema &schema);
/// Column names from the first non-blank line.
std::vector<std::string> read_csv_header(const std::string &path);

GroupedDataset parse_csv(std::istream &in, const CsvSchema &schema,
                         const std::string &source = "<stream>");

/// Writes every stored column with 17 significant digits. Constant "1"
/// columns are left implicit; schema_for() gives the schema to read it back.
void write_csv(const GroupedDataset &data, std::ostream &out, const std::string &group_col = "group");
void write_csv(const GroupedDataset &data, const std::string &path,
               const std::string &group_col = "group");
CsvSchema schema_for(const GroupedDataset &data, const std::string &group_col = "group");

/// Checks dimensions against spec and every response against the family.
void check_compatible(const GroupedDataset &data, const ModelSpec &spec);

/// Spec with d and p taken from the dataset.
ModelSpec spec_for(const GroupedDataset &data, ResponseFamily response, RaneffFamily raneff);

} // namespace aghq
