#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ltpsid/etfe.hpp"
#include "ltpsid/linalg.hpp"
#include "ltpsid/model.hpp"
#include "ltpsid/signal.hpp"

namespace ltpsid {

/// IDFT over the frequency grid of every block of a lifted response:
/// w(n) = (1/N) sum_k G(w_k) exp(j 2 pi n k / N), stored as full lifted
/// matrices so block (l, m) of w[n] is w_{l,m}(n).
struct IdftBlocks {
    std::size_t period = 1;
    Index ny = 0;
    Index nu = 0;
    std::vector<CMatrix> w;

    std::size_t grid_size() const noexcept { return w.size(); }
    CMatrix block(std::size_t l, std::size_t m, std::size_t n) const
    {
        return w[n].block(static_cast<Index>(l) * ny, static_cast<Index>(m) * nu, ny, nu);
    }
    double max_imaginary() const
    {
        double worst = 0.0;
        for (const auto& wn : w) {
            worst = std::max(worst, wn.imag().cwiseAbs().maxCoeff());
        }
        return worst;
    }
};

inline IdftBlocks idft_blocks(const LiftedFrequencyResponse& response)
{
    const auto N = static_cast<Index>(response.grid_size());
    if (N < 1) {
        fail(ErrorCode::PreconditionViolated, "frequency response grid is empty");
    }
    const Index rows = response.values[0].rows();
    const Index cols = response.values[0].cols();
    CMatrix stacked(rows * cols, N);
    for (Index k = 0; k < N; ++k) {
        const CMatrix& G = response.values[static_cast<std::size_t>(k)];
        if (G.rows() != rows || G.cols() != cols) {
            fail(ErrorCode::DimensionMismatch, "response shape changes across the grid");
        }
        stacked.col(k) = G.reshaped();
    }
    const CMatrix time = idft(stacked);
    IdftBlocks blocks;
    blocks.period = response.period;
    blocks.ny = response.ny;
    blocks.nu = response.nu;
    blocks.w.reserve(static_cast<std::size_t>(N));
    for (Index n = 0; n < N; ++n) {
        blocks.w.push_back(time.col(n).reshaped(rows, cols));
    }
    return blocks;
}

struct AliasIndex {
    std::size_t tag = 0;
    std::size_t lag = 0;
};

/// Where w_{l,m}(n) lands in the time-aliased periodic impulse response:
/// tag l, lag nP + l - m when positive, else (n + N)P + l - m.
inline constexpr AliasIndex alias_index(std::size_t l, std::size_t m, std::size_t n, std::size_t period,
                                        std::size_t N) noexcept
{
    const auto P = static_cast<std::int64_t>(period);
    auto lag = static_cast<std::int64_t>(n) * P + static_cast<std::int64_t>(l) - static_cast<std::int64_t>(m);
    if (lag <= 0) {
        lag += static_cast<std::int64_t>(N) * P;
    }
    return {l, static_cast<std::size_t>(lag)};
}

struct AliasedImpulseResponse {
    std::size_t N = 0;
    ImpulseResponseTable h; // max_lag = N P
    double max_imaginary_residue = 0.0;
};

inline AliasedImpulseResponse assemble_aliased(const IdftBlocks& blocks, double residue_tol = 1e-6)
{
    const std::size_t P = blocks.period;
    const std::size_t N = blocks.grid_size();
    const double residue = blocks.max_imaginary();
    if (residue > residue_tol) {
        fail(ErrorCode::NonRealResidue,
             "imaginary residue " + std::to_string(residue) + " exceeds " + std::to_string(residue_tol));
    }
    AliasedImpulseResponse out{N, ImpulseResponseTable(P, N * P, blocks.ny, blocks.nu), residue};
    std::vector<char> seen(P * N * P, 0);
    for (std::size_t l = 0; l < P; ++l) {
        for (std::size_t m = 0; m < P; ++m) {
            for (std::size_t n = 0; n < N; ++n) {
                const auto [t, r] = alias_index(l, m, n, P, N);
                char& mark = seen[t * N * P + (r - 1)];
                if (mark != 0) {
                    fail(ErrorCode::IndexCollision, "(t=" + std::to_string(t) + ", r=" + std::to_string(r)
                                                        + ") assigned twice");
                }
                mark = 1;
                out.h.at(static_cast<std::int64_t>(t), r) = blocks.block(l, m, n).real();
            }
        }
    }
    if (std::find(seen.begin(), seen.end(), 0) != seen.end()) {
        fail(ErrorCode::IndexCollision, "aliased impulse response is incomplete");
    }
    return out;
}

struct PeriodicHankelSet {
    std::size_t q = 0;
    std::size_t r = 0;
    std::vector<Matrix> H; // one (q n_y) x (r n_u) matrix per tag time tau
};

/// Block (i, j) of H^tau is h^{tau+i}_{i+j+1}.
inline PeriodicHankelSet build_hankels(const ImpulseResponseTable& h, std::size_t q, std::size_t r)
{
    if (q < 1 || r < 1) {
        fail(ErrorCode::BlockRangeExceeded, "q and r must be positive");
    }
    if (q + r - 1 > h.max_lag()) {
        fail(ErrorCode::BlockRangeExceeded, "q + r - 1 = " + std::to_string(q + r - 1)
                                                + " exceeds NP = " + std::to_string(h.max_lag()));
    }
    const Index ny = h.ny();
    const Index nu = h.nu();
    PeriodicHankelSet set{q, r, {}};
    set.H.reserve(h.period());
    for (std::size_t tau = 0; tau < h.period(); ++tau) {
        Matrix H(static_cast<Index>(q) * ny, static_cast<Index>(r) * nu);
        for (std::size_t i = 0; i < q; ++i) {
            for (std::size_t j = 0; j < r; ++j) {
                H.block(static_cast<Index>(i) * ny, static_cast<Index>(j) * nu, ny, nu)
                    = h.at(static_cast<std::int64_t>(tau + i), i + j + 1);
            }
        }
        set.H.push_back(std::move(H));
    }
    return set;
}

/// Either a known order or a threshold on sigma_i / sigma_1.
struct OrderSpec {
    std::optional<Index> fixed;
    double relative_threshold = 1e-8;

    static OrderSpec known(Index order) { return {order, 0.0}; }
    static OrderSpec threshold(double tol) { return {std::nullopt, tol}; }
};

struct ObservabilityBases {
    std::vector<Matrix> U;               // leading left singular vectors per tau, (q n_y) x n_x
    std::vector<Vector> singular_values; // full spectrum per tau, descending
    std::vector<Index> counts;           // per-tau threshold counts (threshold mode only)
    Index order = 0;
    bool ambiguous = false;
};

/// SVD of each H^tau and a single shared order. In threshold mode the order is
/// the largest per-tau count of sigma_i > threshold * sigma_1; disagreement
/// across tau is flagged in `ambiguous` rather than raised.
inline ObservabilityBases svd_order(const PeriodicHankelSet& hankels, const OrderSpec& spec)
{
    ObservabilityBases out;
    std::vector<Matrix> full_u;
    for (const auto& H : hankels.H) {
        Eigen::BDCSVD<Matrix> svd(H, Eigen::ComputeThinU);
        out.singular_values.push_back(svd.singularValues());
        full_u.push_back(svd.matrixU());
    }
    const Index capacity = hankels.H.empty() ? 0 : std::min(hankels.H[0].rows(), hankels.H[0].cols());
    if (spec.fixed) {
        out.order = *spec.fixed;
        if (out.order < 1) {
            fail(ErrorCode::InvalidConfig, "model order must be at least 1");
        }
    } else {
        for (const auto& s : out.singular_values) {
            const double cutoff = spec.relative_threshold * (s.size() ? s(0) : 0.0);
            Index count = 0;
            for (Index i = 0; i < s.size(); ++i) {
                count += s(i) > cutoff ? 1 : 0;
            }
            out.counts.push_back(count);
        }
        out.order = *std::max_element(out.counts.begin(), out.counts.end());
        out.ambiguous = std::adjacent_find(out.counts.begin(), out.counts.end(), std::not_equal_to<>())
                        != out.counts.end();
        if (out.order < 1) {
            fail(ErrorCode::NumericalError, "all Hankel matrices are zero; no order can be determined");
        }
    }
    if (out.order > capacity) {
        fail(ErrorCode::OrderTooLarge, "order " + std::to_string(out.order) + " exceeds min(q n_y, r n_u) = "
                                           + std::to_string(capacity));
    }
    for (const auto& u : full_u) {
        out.U.push_back(u.leftCols(out.order));
    }
    return out;
}

struct StateOutputEstimate {
    std::vector<Matrix> A;
    std::vector<Matrix> C;
};

/// Shift-invariance recovery A_tau = (J1 U_{tau+1})^+ J2 U_tau, C_tau = J3 U_tau,
/// with U_P = U_0.
inline StateOutputEstimate estimate_AC(const std::vector<Matrix>& bases, Index ny, double rank_tol = 1e-12)
{
    const std::size_t P = bases.size();
    if (P == 0) {
        fail(ErrorCode::PreconditionViolated, "no observability bases");
    }
    const Index rows = bases[0].rows();
    const Index nx = bases[0].cols();
    if (ny < 1 || rows % ny != 0) {
        fail(ErrorCode::DimensionMismatch, "basis row count is not a multiple of n_y");
    }
    const Index shifted = rows - ny;
    StateOutputEstimate out;
    for (std::size_t tau = 0; tau < P; ++tau) {
        if (shifted < nx) {
            fail(ErrorCode::ShiftRankDeficient, "tau=" + std::to_string(tau) + ": (q-1) n_y = "
                                                    + std::to_string(shifted) + " < n_x = " + std::to_string(nx));
        }
        const Matrix& current = bases[tau];
        const Matrix& next = bases[(tau + 1) % P];
        const auto pinv = pseudo_inverse(next.topRows(shifted), rank_tol);
        if (pinv.rank < nx) {
            fail(ErrorCode::ShiftRankDeficient, "tau=" + std::to_string(tau) + ": shifted basis has rank "
                                                    + std::to_string(pinv.rank) + " < n_x = " + std::to_string(nx));
        }
        out.A.push_back(pinv.matrix * current.bottomRows(shifted));
        out.C.push_back(current.topRows(ny));
    }
    return out;
}

struct InputEstimate {
    std::vector<Matrix> B;
    double residual = 0.0; // total squared Frobenius residual
    std::vector<double> condition_numbers; // per residue class beta
};

/// Least-squares fit of B to the aliased response. Terms with
/// (tau - r) mod P = beta only involve B_beta, so P independent problems are
/// solved with regressors Q^tau_r = C_tau (I - Psi_tau^N)^{-1} A_{tau-1} ... A_{tau-r+1}.
inline InputEstimate estimate_B(const std::vector<Matrix>& A, const std::vector<Matrix>& C,
                                const ImpulseResponseTable& h, std::size_t N, double max_condition = 1e12)
{
    const std::size_t P = A.size();
    if (C.size() != P || h.period() != P) {
        fail(ErrorCode::DimensionMismatch, "A, C and h disagree on the period");
    }
    if (h.max_lag() != N * P) {
        fail(ErrorCode::DimensionMismatch, "aliased response must cover lags 1..NP");
    }
    const Index nx = A[0].rows();
    const Index ny = h.ny();
    const Index nu = h.nu();
    auto a_at = [&](std::int64_t t) -> const Matrix& { return A[cyclic(t, P)]; };

    std::vector<Matrix> psi(P);
    for (std::size_t tau = 0; tau < P; ++tau) {
        psi[tau] = Matrix::Identity(nx, nx);
        for (std::int64_t i = 1; i <= static_cast<std::int64_t>(P); ++i) {
            psi[tau] = psi[tau] * a_at(static_cast<std::int64_t>(tau) - i);
        }
    }
    const double rho = spectral_radius(psi[0]);
    if (!(rho < 1.0)) {
        fail(ErrorCode::UnstableEstimate, "estimated monodromy has spectral radius " + std::to_string(rho));
    }

    const auto blocks_per_class = static_cast<Index>(N * P);
    std::vector<Matrix> regressors(P, Matrix(blocks_per_class * ny, nx));
    std::vector<Matrix> targets(P, Matrix(blocks_per_class * ny, nu));
    std::vector<Index> filled(P, 0);
    for (std::size_t tau = 0; tau < P; ++tau) {
        const auto t = static_cast<std::int64_t>(tau);
        // C_tau (I - Psi^N)^{-1}
        Matrix q_row = right_solve_identity_minus(C[tau], matrix_power(psi[tau], N), "estimate_B");
        for (std::size_t r = 1; r <= N * P; ++r) {
            const auto lag = static_cast<std::int64_t>(r);
            const std::size_t beta = cyclic(t - lag, P);
            regressors[beta].middleRows(filled[beta] * ny, ny) = q_row;
            targets[beta].middleRows(filled[beta] * ny, ny) = h.at(t, r);
            ++filled[beta];
            q_row = q_row * a_at(t - lag);
        }
    }

    InputEstimate out;
    for (std::size_t beta = 0; beta < P; ++beta) {
        Eigen::JacobiSVD<Matrix> svd(regressors[beta], Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Vector& s = svd.singularValues();
        const double smallest = s(s.size() - 1);
        const double cond = smallest > 0.0 ? s(0) / smallest : std::numeric_limits<double>::infinity();
        out.condition_numbers.push_back(cond);
        if (!(cond <= max_condition)) {
            fail(ErrorCode::IllConditioned, "regressor for B_" + std::to_string(beta) + " has condition number "
                                                + std::to_string(cond));
        }
        Matrix b = svd.solve(targets[beta]);
        out.residual += (regressors[beta] * b - targets[beta]).squaredNorm();
        out.B.push_back(std::move(b));
    }
    return out;
}

/// q = r = floor((NP + 1) / 2), which keeps q + r - 1 <= NP.
inline std::size_t default_block_rows(std::size_t N, std::size_t period)
{
    return (N * period + 1) / 2;
}

struct IdentifyOptions {
    std::size_t q = 0; // 0 selects default_block_rows
    std::size_t r = 0;
    OrderSpec order = OrderSpec::threshold(1e-8);
    double rank_tol = 1e-10;
    double residue_tol = 1e-6;
};

struct IdentificationResult {
    LtpModel model;
    std::vector<Vector> singular_values; // per tau, descending
    std::vector<Index> order_counts;
    Index order_used = 0;
    bool order_ambiguous = false;
    std::size_t q = 0;
    std::size_t r = 0;
    double b_residual = 0.0;
    double max_imaginary_residue = 0.0;
    AliasedImpulseResponse h_hat;
    Matrix reconstruction_error; // P x NP, Frobenius norm of h_hat - h(model)
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const Error& e) {
        if (!e.stage().empty()) {
            throw;
        }
        throw e.with_stage(stage);
    }
}

} // namespace detail

/// Identification from a lifted frequency response already on the full
/// N-point grid: IDFT onward.
inline IdentificationResult identify_from_response(const LiftedFrequencyResponse& response,
                                                   const IdentifyOptions& options = {})
{
    const std::size_t P = response.period;
    const std::size_t N = response.grid_size();
    const std::size_t q = options.q ? options.q : default_block_rows(N, P);
    const std::size_t r = options.r ? options.r : default_block_rows(N, P);

    const auto blocks = detail::run_stage("idft", [&] { return idft_blocks(response); });
    auto aliased = detail::run_stage("assemble", [&] { return assemble_aliased(blocks, options.residue_tol); });
    const auto hankels = detail::run_stage("hankel", [&] { return build_hankels(aliased.h, q, r); });
    const auto bases = detail::run_stage("svd", [&] { return svd_order(hankels, options.order); });
    const auto ac = detail::run_stage("estimate_AC", [&] { return estimate_AC(bases.U, response.ny); });
    const auto b = detail::run_stage("estimate_B", [&] { return estimate_B(ac.A, ac.C, aliased.h, N); });

    LtpModel model(ac.A, b.B, ac.C);
    const auto reconstructed = detail::run_stage("diagnostics", [&] { return aliased_impulse_response_true(model, N); });
    Matrix recon(static_cast<Index>(P), static_cast<Index>(N * P));
    for (std::size_t t = 0; t < P; ++t) {
        for (std::size_t lag = 1; lag <= N * P; ++lag) {
            const auto tt = static_cast<std::int64_t>(t);
            recon(static_cast<Index>(t), static_cast<Index>(lag - 1))
                = (aliased.h.at(tt, lag) - reconstructed.at(tt, lag)).norm();
        }
    }
    return IdentificationResult{std::move(model),
                                bases.singular_values,
                                bases.counts,
                                bases.order,
                                bases.ambiguous,
                                q,
                                r,
                                b.residual,
                                aliased.max_imaginary_residue,
                                std::move(aliased),
                                std::move(recon)};
}

/// Full pipeline: lift, DFT, generalized ETFE, then identify_from_response.
inline IdentificationResult identify(const Ensemble& ensemble, const IdentifyOptions& options = {})
{
    const auto spectra = detail::run_stage("lift", [&] { return assemble_spectra(ensemble); });
    const auto q = options.q ? options.q : default_block_rows(ensemble.periods_per_record, ensemble.period);
    const auto r = options.r ? options.r : default_block_rows(ensemble.periods_per_record, ensemble.period);
    if (q < 1 || r < 1 || q + r - 1 > ensemble.record_length()) {
        throw Error(ErrorCode::BlockRangeExceeded, "q + r - 1 = " + std::to_string(q + r - 1) + " exceeds NP = "
                                                       + std::to_string(ensemble.record_length()))
            .with_stage("config");
    }
    const auto response = detail::run_stage("etfe", [&] { return etfe(spectra, options.rank_tol); });
    return identify_from_response(response, options);
}

/// Output fit 100 (1 - ||y - y_hat|| / ||y - mean(y)||) of a model's
/// steady-state response against every experiment in the ensemble.
inline double output_fit(const LtpModel& model, const Ensemble& ensemble)
{
    double num = 0.0;
    double den = 0.0;
    double sum = 0.0;
    double count = 0.0;
    for (const auto& e : ensemble.experiments) {
        sum += e.output.sum();
        count += static_cast<double>(e.output.size());
    }
    const double mean = count > 0 ? sum / count : 0.0;
    for (const auto& e : ensemble.experiments) {
        const Experiment predicted = simulate_steady_state(model, e.input);
        num += (e.output - predicted.output).squaredNorm();
        den += (e.output.array() - mean).matrix().squaredNorm();
    }
    if (den <= 0.0) {
        fail(ErrorCode::DegenerateReference, "validation outputs have zero variance");
    }
    return 100.0 * (1.0 - std::sqrt(num / den));
}

struct BlockRowSelection {
    std::size_t q = 0;
    std::vector<std::size_t> candidates;
    std::vector<double> scores; // -inf for candidates whose identification failed
};

/// Picks q = r from candidates by identifying on `train` and scoring the
/// output fit on the held-out `validation` ensemble.
inline BlockRowSelection select_block_rows(const Ensemble& train, const Ensemble& validation,
                                           const std::vector<std::size_t>& candidates, const IdentifyOptions& base)
{
    BlockRowSelection out;
    double best = -std::numeric_limits<double>::infinity();
    for (const std::size_t q : candidates) {
        IdentifyOptions options = base;
        options.q = q;
        options.r = q;
        double score = -std::numeric_limits<double>::infinity();
        try {
            score = output_fit(identify(train, options).model, validation);
        } catch (const Error&) {
        }
        out.candidates.push_back(q);
        out.scores.push_back(score);
        if (score > best) {
            best = score;
            out.q = q;
        }
    }
    if (out.q == 0) {
        fail(ErrorCode::NumericalError, "identification failed for every block-row candidate");
    }
    return out;
}

} // namespace ltpsid
