#pragma once

#include <cmath>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "mmhp/error.hpp"

namespace mmhp {

// Upper bound on the number of hidden states. Van Loan blocks are 2M x 2M.
inline constexpr int kMaxStates = 10;
inline constexpr int kMaxBlock = 2 * kMaxStates;

// Small dense matrices live on the stack: dynamic size, fixed capacity.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxBlock, kMaxBlock>;
using Vector = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxBlock, 1>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic, Eigen::RowMajor, 1, kMaxBlock>;

/// Matrix exponential e^{A t}.
///
/// Backed by Eigen's scaling-and-squaring Pade implementation, which picks
/// the approximant degree (3 to 13) from the 1-norm of A t.
inline Matrix expm(const Matrix& a, double t = 1.0) {
    if (a.rows() != a.cols() || a.rows() < 1) {
        throw InvalidInput("expm: matrix must be square and non-empty");
    }
    if (!std::isfinite(t) || !a.allFinite()) {
        throw InvalidInput("expm: non-finite input");
    }
    Matrix scaled = a * t;
    Matrix result = scaled.exp();
    if (!result.allFinite()) {
        throw NumericalError("expm: non-finite result");
    }
    return result;
}

// Block data for the integral  int_0^dt e^{A (dt - x)} W e^{A x} dx.
struct VanLoanBlock {
    Matrix a;
    Matrix w;
    double dt{0.0};
};

struct VanLoanResult {
    Matrix exp_a;     // e^{A dt}, the diagonal blocks
    Matrix integral;  // the upper-right block
};

/// Exponentiates [[A, W], [0, A]] dt and returns both distinct blocks.
inline VanLoanResult vanloan(const VanLoanBlock& block) {
    const Eigen::Index m = block.a.rows();
    if (block.a.cols() != m || block.w.rows() != m || block.w.cols() != m) {
        throw InvalidInput("vanloan: block dimensions do not match");
    }
    if (2 * m > kMaxBlock) {
        throw InvalidInput("vanloan: too many states");
    }
    if (block.dt < 0.0) {
        throw InvalidInput("vanloan: negative time step");
    }
    Matrix big = Matrix::Zero(2 * m, 2 * m);
    big.topLeftCorner(m, m) = block.a;
    big.topRightCorner(m, m) = block.w;
    big.bottomRightCorner(m, m) = block.a;
    const Matrix e = expm(big, block.dt);
    return {e.topLeftCorner(m, m), e.topRightCorner(m, m)};
}

inline Matrix vanloan_upper_right(const VanLoanBlock& block) {
    return vanloan(block).integral;
}

}  // namespace mmhp
