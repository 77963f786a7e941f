#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ltpsid/linalg.hpp"
#include "ltpsid/model.hpp"

namespace ltpsid {

// Signals are stored channel-major: a Matrix with one row per channel and one
// column per time sample.

enum class SeedRole : std::uint64_t { Input = 1, Noise = 2, Trial = 3 };

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30U)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27U)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31U);
}

/// Seed for one (experiment, role) pair, mixed from the master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index, SeedRole role) noexcept
{
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ index);
    return splitmix64(h ^ static_cast<std::uint64_t>(role));
}

struct ExperimentMeta {
    std::uint64_t input_seed = 0;
    std::uint64_t noise_seed = 0;
    double sigma = 0.0;
    std::size_t burn_in_periods = 0; // pattern repetitions before recording
};

struct Experiment {
    Matrix input;  // n_u x NP
    Matrix output; // n_y x NP
    ExperimentMeta meta;
};

struct Ensemble {
    std::size_t period = 1;
    std::size_t periods_per_record = 1; // N
    std::vector<Experiment> experiments;

    std::size_t size() const noexcept { return experiments.size(); }
    Index nu() const noexcept { return experiments.empty() ? 0 : experiments[0].input.rows(); }
    Index ny() const noexcept { return experiments.empty() ? 0 : experiments[0].output.rows(); }
    std::size_t record_length() const noexcept { return period * periods_per_record; }
};

/// Checks shapes and the J >= P n_u excitation requirement.
inline void validate(const Ensemble& ensemble)
{
    if (ensemble.period < 1 || ensemble.periods_per_record < 1) {
        fail(ErrorCode::PreconditionViolated, "ensemble period and N must be positive");
    }
    if (ensemble.experiments.empty()) {
        fail(ErrorCode::PreconditionViolated, "ensemble has no experiments");
    }
    const Index nu = ensemble.nu();
    const Index ny = ensemble.ny();
    const auto length = static_cast<Index>(ensemble.record_length());
    for (std::size_t i = 0; i < ensemble.size(); ++i) {
        const auto& e = ensemble.experiments[i];
        if (e.input.rows() != nu || e.output.rows() != ny || e.input.cols() != length
            || e.output.cols() != length) {
            fail(ErrorCode::DimensionMismatch, "experiment " + std::to_string(i)
                                                   + " does not match the ensemble shape (n_u=" + std::to_string(nu)
                                                   + ", n_y=" + std::to_string(ny)
                                                   + ", length=" + std::to_string(length) + ")");
        }
    }
    const auto required = ensemble.period * static_cast<std::size_t>(nu);
    if (ensemble.size() < required) {
        fail(ErrorCode::PreconditionViolated, "J >= P*n_u is required for a full-row-rank lifted input (J="
                                                  + std::to_string(ensemble.size())
                                                  + ", P*n_u=" + std::to_string(required) + ")");
    }
}

/// One full period of an NP-periodic excitation with i.i.d. N(0, 1) entries.
inline Matrix generate_periodic_input(std::size_t period, std::size_t N, Index nu, std::uint64_t seed)
{
    if (period < 1 || N < 1 || nu < 1) {
        fail(ErrorCode::PreconditionViolated, "P, N and n_u must be positive");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto length = static_cast<Index>(period * N);
    Matrix u(nu, length);
    for (Index t = 0; t < length; ++t) {
        for (Index c = 0; c < nu; ++c) {
            u(c, t) = normal(rng);
        }
    }
    return u;
}

/// Runs the state recursion from x0 with the first input sample at t = 0.
/// Returns the outputs; the final state is written to final_state if given.
inline Matrix simulate(const LtpModel& model, const Matrix& input, const Vector& x0, Vector* final_state = nullptr)
{
    if (input.rows() != model.nu()) {
        fail(ErrorCode::DimensionMismatch, "input has " + std::to_string(input.rows()) + " channels, model expects "
                                               + std::to_string(model.nu()));
    }
    if (x0.size() != model.nx()) {
        fail(ErrorCode::DimensionMismatch, "initial state has dimension " + std::to_string(x0.size()));
    }
    Matrix y(model.ny(), input.cols());
    Vector x = x0;
    for (Index t = 0; t < input.cols(); ++t) {
        y.col(t).noalias() = model.C(t) * x;
        x = model.A(t) * x + model.B(t) * input.col(t);
    }
    if (final_state != nullptr) {
        *final_state = std::move(x);
    }
    return y;
}

struct SteadyStateOptions {
    std::optional<std::size_t> burn_in; // repetitions; nullopt selects automatic convergence
    double tol = 1e-10;
    std::size_t max_repetitions = 10000;
};

/// Repeats the pattern from x = 0 until transients have died out, then records
/// one more repetition. The returned experiment is noise free.
inline Experiment simulate_steady_state(const LtpModel& model, const Matrix& pattern,
                                        const SteadyStateOptions& options = {})
{
    require_stable(model, "simulate_steady_state");
    if (pattern.cols() == 0 || pattern.cols() % static_cast<Index>(model.period()) != 0) {
        fail(ErrorCode::LengthNotDivisible, "pattern length " + std::to_string(pattern.cols())
                                                + " is not a positive multiple of P=" + std::to_string(model.period()));
    }
    Vector x = Vector::Zero(model.nx());
    Vector next;
    std::size_t repetitions = 0;
    if (options.burn_in) {
        for (; repetitions < *options.burn_in; ++repetitions) {
            simulate(model, pattern, x, &next);
            x = next;
        }
    } else {
        while (true) {
            if (repetitions >= options.max_repetitions) {
                fail(ErrorCode::TransientNotConverged,
                     "state did not settle within " + std::to_string(options.max_repetitions) + " repetitions");
            }
            simulate(model, pattern, x, &next);
            ++repetitions;
            const double change = (next - x).norm();
            x = next;
            if (change < options.tol) {
                break;
            }
        }
    }
    Experiment e;
    e.input = pattern;
    e.output = simulate(model, pattern, x);
    e.meta.burn_in_periods = repetitions;
    return e;
}

struct NoiseModel {
    enum class Kind { White, MovingAverage1 };
    Kind kind = Kind::White;
    double ma_coefficient = 0.0; // w(t) = sigma * (e(t) + c e(t-1)) for MovingAverage1

    static NoiseModel white() { return {}; }
    static NoiseModel moving_average(double c) { return {Kind::MovingAverage1, c}; }
};

inline Matrix add_noise(const Matrix& output, double sigma, std::uint64_t seed, const NoiseModel& noise = {})
{
    if (sigma < 0.0) {
        fail(ErrorCode::PreconditionViolated, "noise sigma must be nonnegative");
    }
    if (sigma == 0.0) {
        return output;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix noisy = output;
    if (noise.kind == NoiseModel::Kind::White) {
        for (Index t = 0; t < output.cols(); ++t) {
            for (Index c = 0; c < output.rows(); ++c) {
                noisy(c, t) += sigma * normal(rng);
            }
        }
        return noisy;
    }
    Vector previous(output.rows());
    for (Index c = 0; c < output.rows(); ++c) {
        previous(c) = normal(rng);
    }
    for (Index t = 0; t < output.cols(); ++t) {
        for (Index c = 0; c < output.rows(); ++c) {
            const double e = normal(rng);
            noisy(c, t) += sigma * (e + noise.ma_coefficient * previous(c));
            previous(c) = e;
        }
    }
    return noisy;
}

struct EnsembleOptions {
    std::size_t J = 1;
    std::size_t N = 1;
    double sigma = 0.0;
    std::uint64_t master_seed = 0;
    SteadyStateOptions steady_state{};
    NoiseModel noise{};
    bool shared_input = false; // reuse experiment 0's pattern everywhere (ablation only)
};

inline Ensemble collect_ensemble(const LtpModel& model, const EnsembleOptions& options)
{
    const auto required = model.period() * static_cast<std::size_t>(model.nu());
    if (options.J < required) {
        fail(ErrorCode::PreconditionViolated, "J >= P*n_u is required (J=" + std::to_string(options.J)
                                                  + ", P*n_u=" + std::to_string(required) + ")");
    }
    if (options.N < 1) {
        fail(ErrorCode::PreconditionViolated, "N must be positive");
    }
    require_stable(model, "collect_ensemble");
    Ensemble ensemble;
    ensemble.period = model.period();
    ensemble.periods_per_record = options.N;
    ensemble.experiments.reserve(options.J);
    for (std::size_t i = 0; i < options.J; ++i) {
        const std::uint64_t input_seed = derive_seed(options.master_seed, options.shared_input ? 0 : i, SeedRole::Input);
        const std::uint64_t noise_seed = derive_seed(options.master_seed, i, SeedRole::Noise);
        Experiment e = simulate_steady_state(
            model, generate_periodic_input(model.period(), options.N, model.nu(), input_seed), options.steady_state);
        e.output = add_noise(e.output, options.sigma, noise_seed, options.noise);
        e.meta.input_seed = input_seed;
        e.meta.noise_seed = noise_seed;
        e.meta.sigma = options.sigma;
        ensemble.experiments.push_back(std::move(e));
    }
    return ensemble;
}

/// Stacks P consecutive samples into one lifted sample:
/// column k is [x(kP); x(kP+1); ...; x(kP+P-1)].
inline Matrix lift_signal(const Matrix& sequence, std::size_t period)
{
    const auto P = static_cast<Index>(period);
    if (P < 1 || sequence.cols() % P != 0) {
        fail(ErrorCode::LengthNotDivisible, "sequence length " + std::to_string(sequence.cols())
                                                + " is not divisible by P=" + std::to_string(period));
    }
    const Index dim = sequence.rows();
    const Index N = sequence.cols() / P;
    Matrix lifted(P * dim, N);
    for (Index k = 0; k < N; ++k) {
        for (Index s = 0; s < P; ++s) {
            lifted.block(s * dim, k, dim, 1) = sequence.col(k * P + s);
        }
    }
    return lifted;
}

inline Matrix unlift_signal(const Matrix& lifted, std::size_t period)
{
    const auto P = static_cast<Index>(period);
    if (P < 1 || lifted.rows() % P != 0) {
        fail(ErrorCode::LengthNotDivisible, "lifted dimension is not divisible by P");
    }
    const Index dim = lifted.rows() / P;
    Matrix sequence(dim, lifted.cols() * P);
    for (Index k = 0; k < lifted.cols(); ++k) {
        for (Index s = 0; s < P; ++s) {
            sequence.col(k * P + s) = lifted.block(s * dim, k, dim, 1);
        }
    }
    return sequence;
}

/// N x N DFT matrix F(n, k) = exp(sign * j 2 pi n k / N).
inline CMatrix dft_matrix(Index N, int sign)
{
    CMatrix F(N, N);
    for (Index n = 0; n < N; ++n) {
        for (Index k = 0; k < N; ++k) {
            F(n, k) = unit_root(static_cast<std::int64_t>(n) * k, N, sign);
        }
    }
    return F;
}

/// Unnormalized forward DFT of each row: X(:, k) = sum_n x(:, n) exp(-j 2 pi n k / N).
template <typename Derived>
CMatrix dft_lifted(const Eigen::MatrixBase<Derived>& lifted)
{
    if (lifted.cols() < 1) {
        fail(ErrorCode::PreconditionViolated, "DFT needs at least one sample");
    }
    return lifted.template cast<Complex>() * dft_matrix(lifted.cols(), -1);
}

/// Inverse of dft_lifted, including the 1/N factor.
inline CMatrix idft(const CMatrix& spectrum)
{
    if (spectrum.cols() < 1) {
        fail(ErrorCode::PreconditionViolated, "IDFT needs at least one sample");
    }
    return spectrum * dft_matrix(spectrum.cols(), +1) / static_cast<double>(spectrum.cols());
}

/// Per-frequency stacked spectra: column i of U[k] (resp. Y[k]) is the lifted
/// DFT of experiment i at w_k.
struct LiftedSpectra {
    std::size_t period = 1;
    Index nu = 0;
    Index ny = 0;
    std::vector<CMatrix> U; // (P n_u) x J per k
    std::vector<CMatrix> Y; // (P n_y) x J per k

    std::size_t grid_size() const noexcept { return U.size(); }
    double frequency(std::size_t k) const noexcept
    {
        return 2.0 * pi * static_cast<double>(k) / static_cast<double>(U.size());
    }
};

inline LiftedSpectra assemble_spectra(const Ensemble& ensemble)
{
    validate(ensemble);
    const std::size_t P = ensemble.period;
    const auto N = static_cast<Index>(ensemble.periods_per_record);
    const auto J = static_cast<Index>(ensemble.size());
    const Index nu = ensemble.nu();
    const Index ny = ensemble.ny();
    const auto Pi = static_cast<Index>(P);

    // Lift every experiment and DFT all channels in one product.
    Matrix lifted_u(Pi * nu * J, N);
    Matrix lifted_y(Pi * ny * J, N);
    for (Index i = 0; i < J; ++i) {
        const auto& e = ensemble.experiments[static_cast<std::size_t>(i)];
        lifted_u.middleRows(i * Pi * nu, Pi * nu) = lift_signal(e.input, P);
        lifted_y.middleRows(i * Pi * ny, Pi * ny) = lift_signal(e.output, P);
    }
    const CMatrix F = dft_matrix(N, -1);
    const CMatrix spec_u = lifted_u.cast<Complex>() * F;
    const CMatrix spec_y = lifted_y.cast<Complex>() * F;

    LiftedSpectra spectra;
    spectra.period = P;
    spectra.nu = nu;
    spectra.ny = ny;
    spectra.U.assign(static_cast<std::size_t>(N), CMatrix(Pi * nu, J));
    spectra.Y.assign(static_cast<std::size_t>(N), CMatrix(Pi * ny, J));
    for (Index k = 0; k < N; ++k) {
        auto& U = spectra.U[static_cast<std::size_t>(k)];
        auto& Y = spectra.Y[static_cast<std::size_t>(k)];
        for (Index i = 0; i < J; ++i) {
            U.col(i) = spec_u.block(i * Pi * nu, k, Pi * nu, 1);
            Y.col(i) = spec_y.block(i * Pi * ny, k, Pi * ny, 1);
        }
    }
    return spectra;
}

} // namespace ltpsid
