#pragma once

#include <stdexcept>
#include <string>

namespace aghq {

/// Malformed input file or cell.
class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A model evaluation produced something unusable (NaN, non-PD Hessian,
/// inner optimizer failure). Carries the offending group when known.
class ModelError : public std::runtime_error {
public:
  ModelError(const std::string &what, std::string group = {})
      : std::runtime_error(group.empty() ? what
                                         : "group '" + group + "': " + what),
        group_(std::move(group)) {}

  const std::string &group() const noexcept { return group_; }

private:
  std::string group_;
};

} // namespace aghq
