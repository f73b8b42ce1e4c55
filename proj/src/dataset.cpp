#include "dacglm/dataset.hpp"

#include <cmath>

namespace dacglm {

Dataset Dataset::subset(std::span<const Index> rows) const {
    Dataset out;
    out.y.resize(static_cast<Index>(rows.size()));
    out.X.resize(static_cast<Index>(rows.size()), X.cols());
    for (Index i = 0; i < static_cast<Index>(rows.size()); ++i) {
        out.y(i) = y(rows[i]);
        out.X.row(i) = X.row(rows[i]);
    }
    out.column_names = column_names;
    return out;
}

Dataset Dataset::with_intercept() const {
    Dataset out;
    out.y = y;
    out.X.resize(n(), p() + 1);
    out.X.col(0).setOnes();
    out.X.rightCols(p()) = X;
    out.column_names.reserve(static_cast<std::size_t>(p() + 1));
    out.column_names.push_back("(Intercept)");
    for (Index j = 0; j < p(); ++j) out.column_names.push_back(column_name(j));
    return out;
}

std::string Dataset::column_name(Index j) const {
    if (static_cast<std::size_t>(j) < column_names.size()) return column_names[j];
    return "x" + std::to_string(j + 1);
}

void validate(const Dataset& data, const FamilySpec& family) {
    if (data.y.size() != data.X.rows())
        throw DataError("response length " + std::to_string(data.y.size()) +
                        " does not match design rows " + std::to_string(data.X.rows()));
    if (!data.column_names.empty() &&
        static_cast<Index>(data.column_names.size()) != data.X.cols())
        throw DataError("column_names length does not match design columns");
    if (data.n() == 0) throw DataError("empty dataset");
    for (Index j = 0; j < data.X.cols(); ++j)
        for (Index i = 0; i < data.X.rows(); ++i)
            if (!std::isfinite(data.X(i, j)))
                throw DataError("non-finite design entry at row " + std::to_string(i + 1) +
                                ", column '" + data.column_name(j) + "'");
    for (Index i = 0; i < data.n(); ++i) {
        const double v = data.y(i);
        if (!std::isfinite(v))
            throw DataError("non-finite response at row " + std::to_string(i + 1));
        if (family.kind == FamilyKind::logistic && v != 0.0 && v != 1.0)
            throw DataError("logistic response must be 0 or 1; row " + std::to_string(i + 1) +
                            " has " + std::to_string(v));
        if (family.kind == FamilyKind::poisson && (v < 0.0 || v != std::floor(v)))
            throw DataError("poisson response must be a nonnegative integer; row " +
                            std::to_string(i + 1) + " has " + std::to_string(v));
    }
}

}  // namespace dacglm
