#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ltpsid/error.hpp"
#include "ltpsid/linalg.hpp"

namespace ltpsid {

/// Checks that every A_t is n_x x n_x, every B_t is n_x x n_u and every C_t is
/// n_y x n_x, with the dimensions taken from the first entry of each sequence.
/// Throws DimensionMismatch naming the first offending sequence and index.
inline void validate(const std::vector<Matrix>& A, const std::vector<Matrix>& B, const std::vector<Matrix>& C)
{
    if (A.empty()) {
        fail(ErrorCode::DimensionMismatch, "period must be positive (A is empty)");
    }
    const std::size_t period = A.size();
    auto count_error = [&](const char* which, std::size_t found) {
        fail(ErrorCode::DimensionMismatch, std::string(which) + ": expected " + std::to_string(period)
                                               + " matrices, found " + std::to_string(found));
    };
    if (B.size() != period) {
        count_error("B", B.size());
    }
    if (C.size() != period) {
        count_error("C", C.size());
    }
    const Index nx = A[0].rows();
    const Index nu = B[0].cols();
    const Index ny = C[0].rows();
    auto check = [](const char* which, std::size_t t, const Matrix& m, Index rows, Index cols) {
        if (m.rows() != rows || m.cols() != cols) {
            fail(ErrorCode::DimensionMismatch,
                 std::string(which) + "[" + std::to_string(t) + "]: expected " + std::to_string(rows) + "x"
                     + std::to_string(cols) + ", found " + std::to_string(m.rows()) + "x"
                     + std::to_string(m.cols()));
        }
    };
    for (std::size_t t = 0; t < period; ++t) {
        check("A", t, A[t], nx, nx);
    }
    for (std::size_t t = 0; t < period; ++t) {
        check("B", t, B[t], nx, nu);
    }
    for (std::size_t t = 0; t < period; ++t) {
        check("C", t, C[t], ny, nx);
    }
}

/// Strictly causal periodic state-space model
///   x(t+1) = A_t x(t) + B_t u(t),   y(t) = C_t x(t),
/// with A_{t+P} = A_t (likewise B, C). Accessors take any integer time and
/// reduce it cyclically.
class LtpModel {
public:
    LtpModel(std::vector<Matrix> A, std::vector<Matrix> B, std::vector<Matrix> C)
        : A_(std::move(A)), B_(std::move(B)), C_(std::move(C))
    {
        ltpsid::validate(A_, B_, C_);
    }

    std::size_t period() const noexcept { return A_.size(); }
    Index nx() const noexcept { return A_[0].rows(); }
    Index nu() const noexcept { return B_[0].cols(); }
    Index ny() const noexcept { return C_[0].rows(); }

    const Matrix& A(std::int64_t t) const noexcept { return A_[cyclic(t, period())]; }
    const Matrix& B(std::int64_t t) const noexcept { return B_[cyclic(t, period())]; }
    const Matrix& C(std::int64_t t) const noexcept { return C_[cyclic(t, period())]; }

    const std::vector<Matrix>& A_seq() const noexcept { return A_; }
    const std::vector<Matrix>& B_seq() const noexcept { return B_; }
    const std::vector<Matrix>& C_seq() const noexcept { return C_; }

private:
    std::vector<Matrix> A_;
    std::vector<Matrix> B_;
    std::vector<Matrix> C_;
};

/// Re-checks dimensional consistency; a constructed LtpModel always passes.
inline void validate(const LtpModel& model)
{
    validate(model.A_seq(), model.B_seq(), model.C_seq());
}

/// Coefficients indexed by tag time t in [0, P) and lag r in [1, max_lag].
class ImpulseResponseTable {
public:
    ImpulseResponseTable(std::size_t period, std::size_t max_lag, Index ny, Index nu)
        : period_(period), max_lag_(max_lag), ny_(ny), nu_(nu),
          entries_(period * max_lag, Matrix::Zero(ny, nu))
    {
    }

    std::size_t period() const noexcept { return period_; }
    std::size_t max_lag() const noexcept { return max_lag_; }
    Index ny() const noexcept { return ny_; }
    Index nu() const noexcept { return nu_; }

    Matrix& at(std::int64_t t, std::size_t r) { return entries_[offset(t, r)]; }
    const Matrix& at(std::int64_t t, std::size_t r) const { return entries_[offset(t, r)]; }

    double max_abs_difference(const ImpulseResponseTable& other) const
    {
        if (other.period_ != period_ || other.max_lag_ != max_lag_ || other.ny_ != ny_ || other.nu_ != nu_) {
            fail(ErrorCode::DimensionMismatch, "impulse response tables differ in shape");
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < entries_.size(); ++i) {
            worst = std::max(worst, (entries_[i] - other.entries_[i]).cwiseAbs().maxCoeff());
        }
        return worst;
    }

private:
    std::size_t offset(std::int64_t t, std::size_t r) const
    {
        if (r < 1 || r > max_lag_) {
            fail(ErrorCode::PreconditionViolated,
                 "lag " + std::to_string(r) + " outside [1, " + std::to_string(max_lag_) + "]");
        }
        return cyclic(t, period_) * max_lag_ + (r - 1);
    }

    std::size_t period_;
    std::size_t max_lag_;
    Index ny_;
    Index nu_;
    std::vector<Matrix> entries_;
};

/// LTI realization of one period of the LTP system, sampled at t = kP.
/// Inputs and outputs stack the P slots of one period.
struct LiftedLtiModel {
    Matrix state;       // n_x x n_x
    Matrix input;       // n_x x P n_u
    Matrix output;      // P n_y x n_x
    Matrix feedthrough; // P n_y x P n_u, block strictly lower triangular
};

/// Lifted frequency response on the N-point grid w_k = 2 pi k / N.
struct LiftedFrequencyResponse {
    std::size_t period = 1;
    Index ny = 0;
    Index nu = 0;
    std::vector<CMatrix> values; // one (P n_y) x (P n_u) matrix per k

    std::size_t grid_size() const noexcept { return values.size(); }
    double frequency(std::size_t k) const noexcept
    {
        return 2.0 * pi * static_cast<double>(k) / static_cast<double>(values.size());
    }
    CMatrix block(std::size_t k, std::size_t l, std::size_t m) const
    {
        return values[k].block(static_cast<Index>(l) * ny, static_cast<Index>(m) * nu, ny, nu);
    }
};

/// Ordered product A_{t-1} A_{t-2} ... A_{t-P}.
inline Matrix monodromy(const LtpModel& model, std::int64_t t)
{
    Matrix psi = Matrix::Identity(model.nx(), model.nx());
    for (std::int64_t i = 1; i <= static_cast<std::int64_t>(model.period()); ++i) {
        psi = psi * model.A(t - i);
    }
    return psi;
}

struct StabilityReport {
    bool stable = false;
    double spectral_radius = 0.0;
};

inline StabilityReport is_stable(const LtpModel& model)
{
    const double rho = spectral_radius(monodromy(model, 0));
    return {rho < 1.0, rho};
}

inline void require_stable(const LtpModel& model, const char* op)
{
    const auto report = is_stable(model);
    if (!report.stable) {
        fail(ErrorCode::PreconditionViolated, std::string(op) + " requires a stable model, spectral radius "
                                                  + std::to_string(report.spectral_radius));
    }
}

/// g^t_r = C_t A_{t-1} ... A_{t-r+1} B_{t-r}, r >= 1.
inline Matrix impulse_response(const LtpModel& model, std::int64_t t, std::size_t r)
{
    if (r < 1) {
        fail(ErrorCode::PreconditionViolated, "impulse response lag must be >= 1");
    }
    Matrix left = model.C(t);
    const auto lag = static_cast<std::int64_t>(r);
    for (std::int64_t i = 1; i < lag; ++i) {
        left = left * model.A(t - i);
    }
    return left * model.B(t - lag);
}

/// All g^t_r for t in [0, P), r in [1, max_lag], by running the product
/// recursion once per tag time.
inline ImpulseResponseTable impulse_response_table(const LtpModel& model, std::size_t max_lag)
{
    ImpulseResponseTable table(model.period(), max_lag, model.ny(), model.nu());
    for (std::size_t t = 0; t < model.period(); ++t) {
        const auto tt = static_cast<std::int64_t>(t);
        Matrix left = model.C(tt);
        for (std::size_t r = 1; r <= max_lag; ++r) {
            const auto lag = static_cast<std::int64_t>(r);
            table.at(tt, r) = left * model.B(tt - lag);
            left = left * model.A(tt - lag);
        }
    }
    return table;
}

/// Closed form of the time-aliased response sum_{i>=0} g^t_{r+iNP} using the
/// inverse (I - Psi_{t-p}^N)^{-1} inserted after p state factors, p in [0, r).
inline Matrix aliased_impulse_response_entry(const LtpModel& model, std::size_t N, std::int64_t t, std::size_t r,
                                             std::size_t p)
{
    if (r < 1 || p >= r) {
        fail(ErrorCode::PreconditionViolated, "aliased entry needs r >= 1 and p < r");
    }
    Matrix left = model.C(t);
    const auto split = static_cast<std::int64_t>(p);
    for (std::int64_t i = 1; i <= split; ++i) {
        left = left * model.A(t - i);
    }
    const Matrix psi_n = matrix_power(monodromy(model, t - split), N);
    Matrix right = model.B(t - static_cast<std::int64_t>(r));
    for (std::int64_t i = static_cast<std::int64_t>(r) - 1; i > split; --i) {
        right = model.A(t - i) * right;
    }
    return left * solve_identity_minus(psi_n, right, "aliased impulse response");
}

/// h^t_r for all t in [0, P), r in [1, NP], with the inverse placed directly
/// after C_t (p = 0).
inline ImpulseResponseTable aliased_impulse_response_true(const LtpModel& model, std::size_t N)
{
    if (N < 1) {
        fail(ErrorCode::PreconditionViolated, "N must be positive");
    }
    require_stable(model, "aliased_impulse_response_true");
    const std::size_t max_lag = N * model.period();
    ImpulseResponseTable table(model.period(), max_lag, model.ny(), model.nu());
    for (std::size_t t = 0; t < model.period(); ++t) {
        const auto tt = static_cast<std::int64_t>(t);
        const Matrix psi_n = matrix_power(monodromy(model, tt), N);
        Matrix left = right_solve_identity_minus(model.C(tt), psi_n, "aliased impulse response");
        for (std::size_t r = 1; r <= max_lag; ++r) {
            const auto lag = static_cast<std::int64_t>(r);
            table.at(tt, r) = left * model.B(tt - lag);
            left = left * model.A(tt - lag);
        }
    }
    return table;
}

/// One-period lifting starting at t = 0.
inline LiftedLtiModel lift_model(const LtpModel& model)
{
    const auto P = static_cast<Index>(model.period());
    const Index nx = model.nx();
    const Index nu = model.nu();
    const Index ny = model.ny();
    LiftedLtiModel lifted;
    lifted.state = monodromy(model, 0);
    lifted.input = Matrix::Zero(nx, P * nu);
    lifted.output = Matrix::Zero(P * ny, nx);
    lifted.feedthrough = Matrix::Zero(P * ny, P * nu);

    // Transition from slot m+1 to the end of the period: A_{P-1} ... A_{m+1}.
    Matrix tail = Matrix::Identity(nx, nx);
    for (Index m = P - 1; m >= 0; --m) {
        lifted.input.middleCols(m * nu, nu) = tail * model.B(m);
        tail = tail * model.A(m);
    }
    Matrix head = Matrix::Identity(nx, nx); // A_{l-1} ... A_0
    for (Index l = 0; l < P; ++l) {
        lifted.output.middleRows(l * ny, ny) = model.C(l) * head;
        Matrix chain = model.C(l); // C_l A_{l-1} ... A_{m+1}
        for (Index m = l - 1; m >= 0; --m) {
            lifted.feedthrough.block(l * ny, m * nu, ny, nu) = chain * model.B(m);
            chain = chain * model.A(m);
        }
        head = model.A(l) * head;
    }
    return lifted;
}

/// Transfer function D + C (zI - A)^{-1} B of the lifted model at z = e^{j w}.
inline CMatrix lifted_transfer(const LiftedLtiModel& lifted, double omega)
{
    const Complex z = std::polar(1.0, omega);
    const Index nx = lifted.state.rows();
    CMatrix resolvent_lhs = z * CMatrix::Identity(nx, nx) - lifted.state.cast<Complex>();
    Eigen::FullPivLU<CMatrix> lu(resolvent_lhs);
    if (!lu.isInvertible()) {
        fail(ErrorCode::SingularMatrix, "zI - state matrix is singular at omega = " + std::to_string(omega));
    }
    const CMatrix x = lu.solve(lifted.input.cast<Complex>());
    return lifted.feedthrough.cast<Complex>() + lifted.output.cast<Complex>() * x;
}

inline LiftedFrequencyResponse true_lifted_frequency_response(const LtpModel& model, std::size_t N)
{
    if (N < 1) {
        fail(ErrorCode::PreconditionViolated, "N must be positive");
    }
    require_stable(model, "true_lifted_frequency_response");
    const LiftedLtiModel lifted = lift_model(model);
    LiftedFrequencyResponse response;
    response.period = model.period();
    response.ny = model.ny();
    response.nu = model.nu();
    response.values.reserve(N);
    for (std::size_t k = 0; k < N; ++k) {
        response.values.push_back(lifted_transfer(lifted, 2.0 * pi * static_cast<double>(k) / static_cast<double>(N)));
    }
    return response;
}

/// Mean of all (P n_y)(P n_u) entries of the lifted DC response G(e^{j0}).
inline double mean_dc_gain(const LtpModel& model)
{
    require_stable(model, "mean_dc_gain");
    return lifted_transfer(lift_model(model), 0.0).real().mean();
}

/// Scales every B_t by 1 / mean_dc_gain so that the normalized model has unit
/// average DC gain.
inline LtpModel normalize_gain(const LtpModel& model)
{
    const double gamma = mean_dc_gain(model);
    if (std::abs(gamma) < 1e-12) {
        fail(ErrorCode::DegenerateGain, "mean DC gain " + std::to_string(gamma) + " is too small to normalize");
    }
    std::vector<Matrix> B = model.B_seq();
    for (auto& b : B) {
        b /= gamma;
    }
    return LtpModel(model.A_seq(), std::move(B), model.C_seq());
}

/// Periodic change of state coordinates x' = T_t x:
/// A'_t = T_{t+1} A_t T_t^{-1}, B'_t = T_{t+1} B_t, C'_t = C_t T_t^{-1}.
inline LtpModel similarity_transform(const LtpModel& model, const std::vector<Matrix>& T)
{
    const std::size_t P = model.period();
    if (T.size() != P) {
        fail(ErrorCode::DimensionMismatch, "similarity transform needs one matrix per tag time");
    }
    std::vector<Matrix> A(P), B(P), C(P);
    for (std::size_t t = 0; t < P; ++t) {
        const Matrix& next = T[cyclic(static_cast<std::int64_t>(t) + 1, P)];
        Eigen::FullPivLU<Matrix> lu(T[t]);
        if (!lu.isInvertible()) {
            fail(ErrorCode::SingularMatrix, "similarity transform T_" + std::to_string(t) + " is singular");
        }
        const Matrix inv = lu.inverse();
        A[t] = next * model.A_seq()[t] * inv;
        B[t] = next * model.B_seq()[t];
        C[t] = model.C_seq()[t] * inv;
    }
    return LtpModel(std::move(A), std::move(B), std::move(C));
}

} // namespace ltpsid
