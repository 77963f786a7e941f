#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ltpsid/error.hpp"

namespace ltpsid {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline constexpr double pi = std::numbers::pi;

/// Nonnegative representative of t mod P; t may be negative.
inline std::size_t cyclic(std::int64_t t, std::size_t period) noexcept
{
    const auto p = static_cast<std::int64_t>(period);
    const auto m = t % p;
    return static_cast<std::size_t>(m < 0 ? m + p : m);
}

/// Twiddle factor exp(sign * j * 2*pi * idx / n), evaluated with idx reduced mod n
/// so that large products n*k do not lose accuracy.
inline Complex unit_root(std::int64_t idx, std::int64_t n, int sign) noexcept
{
    const auto reduced = static_cast<double>(cyclic(idx, static_cast<std::size_t>(n)));
    const double angle = sign * 2.0 * pi * reduced / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

template <typename MatrixType>
struct PseudoInverse {
    MatrixType matrix;
    Index rank = 0;
    double largest_singular_value = 0.0;
    double smallest_singular_value = 0.0;
};

/// Moore-Penrose pseudo-inverse through a thin SVD. Singular values at or below
/// rel_tol * sigma_max are treated as zero.
template <typename MatrixType>
PseudoInverse<typename MatrixType::PlainObject> pseudo_inverse(const Eigen::MatrixBase<MatrixType>& m,
                                                               double rel_tol = 1e-10)
{
    using Plain = typename MatrixType::PlainObject;
    PseudoInverse<Plain> out;
    out.matrix = Plain::Zero(m.cols(), m.rows());
    if (m.size() == 0) {
        return out;
    }
    Eigen::JacobiSVD<Plain> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    out.largest_singular_value = s.size() ? s(0) : 0.0;
    out.smallest_singular_value = s.size() ? s(s.size() - 1) : 0.0;
    const double cutoff = rel_tol * out.largest_singular_value;
    for (Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff && s(i) > 0.0) {
            out.matrix.noalias() += svd.matrixV().col(i) * (1.0 / s(i)) * svd.matrixU().col(i).adjoint();
            ++out.rank;
        }
    }
    return out;
}

inline Eigen::VectorXcd eigenvalues(const Matrix& m)
{
    if (m.rows() != m.cols()) {
        fail(ErrorCode::DimensionMismatch, "eigenvalues of a non-square matrix");
    }
    if (m.size() == 0) {
        return {};
    }
    Eigen::EigenSolver<Matrix> solver(m, false);
    if (solver.info() != Eigen::Success) {
        fail(ErrorCode::NumericalError, "eigenvalue iteration did not converge");
    }
    return solver.eigenvalues();
}

inline double spectral_radius(const Matrix& m)
{
    const auto ev = eigenvalues(m);
    return ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
}

inline Vector singular_values(const Matrix& m)
{
    if (m.size() == 0) {
        return {};
    }
    Eigen::BDCSVD<Matrix> svd(m);
    return svd.singularValues();
}

inline double condition_number(const Matrix& m)
{
    const Vector s = singular_values(m);
    if (s.size() == 0) {
        return 0.0;
    }
    const double smallest = s(s.size() - 1);
    return smallest > 0.0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
}

/// Integer power by repeated squaring.
inline Matrix matrix_power(const Matrix& m, std::size_t exponent)
{
    Matrix result = Matrix::Identity(m.rows(), m.cols());
    Matrix base = m;
    while (exponent > 0) {
        if (exponent & 1U) {
            result = result * base;
        }
        exponent >>= 1U;
        if (exponent > 0) {
            base = base * base;
        }
    }
    return result;
}

/// Solves (I - M) X = rhs, throwing SingularMatrix when I - M is numerically singular.
inline Matrix solve_identity_minus(const Matrix& m, const Matrix& rhs, const char* what)
{
    const Matrix lhs = Matrix::Identity(m.rows(), m.cols()) - m;
    Eigen::FullPivLU<Matrix> lu(lhs);
    if (!lu.isInvertible()) {
        fail(ErrorCode::SingularMatrix, std::string(what) + ": (I - M) is singular to working precision");
    }
    return lu.solve(rhs);
}

/// Returns X (I - M)^{-1}, throwing SingularMatrix when I - M is numerically singular.
inline Matrix right_solve_identity_minus(const Matrix& x, const Matrix& m, const char* what)
{
    return solve_identity_minus(m.transpose(), x.transpose(), what).transpose();
}

} // namespace ltpsid
