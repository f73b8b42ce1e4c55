#pragma once

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dacglm/family.hpp"

namespace dacglm {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Index = Eigen::Index;

class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Response plus design. Column names are optional (empty or length p).
struct Dataset {
    VectorXd y;
    MatrixXd X;
    std::vector<std::string> column_names;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }

    /// Rows selected by index, in the given order.
    Dataset subset(std::span<const Index> rows) const;

    /// Copy with a leading column of ones named "(Intercept)".
    Dataset with_intercept() const;

    /// Column name, falling back to "x<j+1>".
    std::string column_name(Index j) const;
};

/// Throws DataError on shape mismatch, non-finite entries, or responses
/// outside the family's support.
void validate(const Dataset& data, const FamilySpec& family);

}  // namespace dacglm
