#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace kgvs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Bad arguments or malformed input. The CLI maps this to exit code 2.
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Degenerate data or a failed factorization. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Rows are observations, columns are variables.
struct Dataset {
    Matrix X;
    Vector y;

    Index n() const { return X.rows(); }
    Index p() const { return X.cols(); }
};

inline bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.allFinite(); }

/// Shape mismatches and non-finite entries are InputError; fewer than 2 observations is a
/// NumericalError (degenerate data).
inline void validate(const Dataset& data) {
    if (data.X.rows() != data.y.size())
        throw InputError("dataset: X has " + std::to_string(data.X.rows()) + " rows but y has " +
                         std::to_string(data.y.size()) + " entries");
    if (data.X.rows() < 2) throw NumericalError("dataset: need at least 2 observations");
    if (data.X.cols() < 1) throw InputError("dataset: need at least 1 variable");
    if (!data.X.allFinite() || !data.y.allFinite()) throw InputError("dataset: non-finite entries");
}

/// Compensated (Kahan) accumulator. Summation order is whatever order add() is called in.
class KahanSum {
public:
    void add(double v) {
        const double y = v - comp_;
        const double t = sum_ + y;
        comp_ = (t - sum_) - y;
        sum_ = t;
    }
    double value() const { return sum_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Rows of X selected by `rows`, in the given order.
inline Matrix take_rows(const Matrix& X, std::span<const Index> rows) {
    Matrix out(static_cast<Index>(rows.size()), X.cols());
    for (Index r = 0; r < out.rows(); ++r) out.row(r) = X.row(rows[static_cast<std::size_t>(r)]);
    return out;
}

inline Vector take(const Vector& v, std::span<const Index> rows) {
    Vector out(static_cast<Index>(rows.size()));
    for (Index r = 0; r < out.size(); ++r) out(r) = v(rows[static_cast<std::size_t>(r)]);
    return out;
}

inline Dataset take_rows(const Dataset& d, std::span<const Index> rows) {
    return {take_rows(d.X, rows), take(d.y, rows)};
}

/// Columns of X selected by `cols`, in the given order.
inline Matrix take_cols(const Matrix& X, std::span<const Index> cols) {
    Matrix out(X.rows(), static_cast<Index>(cols.size()));
    for (Index c = 0; c < out.cols(); ++c) out.col(c) = X.col(cols[static_cast<std::size_t>(c)]);
    return out;
}

}  // namespace kgvs
