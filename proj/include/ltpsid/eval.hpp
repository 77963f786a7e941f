#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ltpsid/etfe.hpp"
#include "ltpsid/model.hpp"
#include "ltpsid/signal.hpp"
#include "ltpsid/subspace.hpp"

namespace ltpsid {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Each index is
/// handled exactly once, so writing into a pre-sized slot per index gives
/// results identical to a sequential loop.
template <typename F>
void parallel_for(std::size_t count, std::size_t jobs, F&& fn)
{
    if (jobs <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    const std::size_t n = std::min(jobs, count);
    workers.reserve(n);
    for (std::size_t w = 0; w < n; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                fn(i);
            }
        });
    }
    for (auto& worker : workers) {
        worker.join();
    }
}

/// Linear-interpolation quantile (p in [0, 1]) of an unsorted sample.
inline double quantile(std::vector<double> values, double p)
{
    if (values.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    std::sort(values.begin(), values.end());
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2) {
        fail(ErrorCode::PreconditionViolated, "slope fit needs at least two points");
    }
    const auto n = static_cast<double>(x.size());
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double lx = std::log(x[i]);
        const double ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void require_same_shape(const LtpModel& a, const LtpModel& b)
{
    if (a.period() != b.period() || a.ny() != b.ny() || a.nu() != b.nu()) {
        fail(ErrorCode::DimensionMismatch, "models differ in (P, n_y, n_u): (" + std::to_string(a.period()) + ", "
                                               + std::to_string(a.ny()) + ", " + std::to_string(a.nu()) + ") vs ("
                                               + std::to_string(b.period()) + ", " + std::to_string(b.ny()) + ", "
                                               + std::to_string(b.nu()) + ")");
    }
}

/// P x n_g matrix of |g^tau_r - g_hat^tau_r|_F, column r-1 holding lag r.
inline Matrix impulse_errors(const LtpModel& truth, const LtpModel& estimate, std::size_t n_g)
{
    require_same_shape(truth, estimate);
    const auto g = impulse_response_table(truth, n_g);
    const auto g_hat = impulse_response_table(estimate, n_g);
    Matrix errors(static_cast<Index>(truth.period()), static_cast<Index>(n_g));
    for (std::size_t t = 0; t < truth.period(); ++t) {
        for (std::size_t r = 1; r <= n_g; ++r) {
            const auto tt = static_cast<std::int64_t>(t);
            errors(static_cast<Index>(t), static_cast<Index>(r - 1)) = (g.at(tt, r) - g_hat.at(tt, r)).norm();
        }
    }
    return errors;
}

struct FitReport {
    double W = 0.0;
    double mse = 0.0;
    std::size_t n_g = 0;
    Matrix errors; // P x n_g
};

/// W = 100 (1 - sqrt(sum (g - g_hat)^2 / sum (g - g_bar)^2)) pooled over every
/// scalar coefficient with tag time in [0, P) and lag in [1, n_g].
inline FitReport fit_metric(const LtpModel& truth, const LtpModel& estimate, std::size_t n_g = 50)
{
    require_same_shape(truth, estimate);
    const auto g = impulse_response_table(truth, n_g);
    const auto g_hat = impulse_response_table(estimate, n_g);
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t t = 0; t < truth.period(); ++t) {
        for (std::size_t r = 1; r <= n_g; ++r) {
            sum += g.at(static_cast<std::int64_t>(t), r).sum();
            count += static_cast<double>(g.at(static_cast<std::int64_t>(t), r).size());
        }
    }
    const double mean = sum / count;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t t = 0; t < truth.period(); ++t) {
        for (std::size_t r = 1; r <= n_g; ++r) {
            const auto tt = static_cast<std::int64_t>(t);
            num += (g.at(tt, r) - g_hat.at(tt, r)).squaredNorm();
            den += (g.at(tt, r).array() - mean).matrix().squaredNorm();
        }
    }
    if (!(den >= std::numeric_limits<double>::min())) {
        fail(ErrorCode::DegenerateReference, "true impulse response has no variation about its mean");
    }
    FitReport report;
    report.W = 100.0 * (1.0 - std::sqrt(num / den));
    report.mse = num / count;
    report.n_g = n_g;
    report.errors = impulse_errors(truth, estimate, n_g);
    return report;
}

struct StudyConfig {
    std::size_t J = 0; // 0 selects 10 P
    std::size_t N = 50;
    double sigma = 1.0;
    std::size_t trials = 100;
    std::size_t q = 0; // 0 selects default_block_rows(N, P)
    std::size_t r = 0;
    OrderSpec order = OrderSpec::known(2);
    std::size_t n_g = 50;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    double rank_tol = 1e-10;
    SteadyStateOptions steady_state{};
    NoiseModel noise{};
};

inline std::size_t experiments_for(const LtpModel& model, const StudyConfig& config)
{
    return config.J ? config.J : 10 * model.period();
}

struct TrialOutcome {
    std::size_t index = 0;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure; // error description when failed
    double W = std::numeric_limits<double>::quiet_NaN();
    double mse = std::numeric_limits<double>::quiet_NaN();
};

struct Summary {
    std::size_t trials = 0;
    std::size_t failures = 0;
    bool config_failed = false; // more than 10% of trials failed
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

inline Summary summarize(const std::vector<double>& values, std::size_t trials)
{
    Summary s;
    s.trials = trials;
    s.failures = trials - values.size();
    s.config_failed = static_cast<double>(s.failures) > 0.1 * static_cast<double>(trials);
    if (!values.empty()) {
        s.min = *std::min_element(values.begin(), values.end());
        s.max = *std::max_element(values.begin(), values.end());
        s.q1 = quantile(values, 0.25);
        s.median = quantile(values, 0.5);
        s.q3 = quantile(values, 0.75);
        s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    }
    return s;
}

/// Identifies one freshly seeded ensemble and scores it against the truth.
inline TrialOutcome run_trial(const LtpModel& model, const StudyConfig& config, std::size_t index, std::uint64_t seed)
{
    TrialOutcome outcome;
    outcome.index = index;
    outcome.seed = seed;
    try {
        EnsembleOptions options;
        options.J = experiments_for(model, config);
        options.N = config.N;
        options.sigma = config.sigma;
        options.master_seed = seed;
        options.steady_state = config.steady_state;
        options.noise = config.noise;
        const Ensemble ensemble = collect_ensemble(model, options);
        IdentifyOptions id;
        id.q = config.q;
        id.r = config.r;
        id.order = config.order;
        id.rank_tol = config.rank_tol;
        const auto result = identify(ensemble, id);
        const auto report = fit_metric(model, result.model, config.n_g);
        outcome.W = report.W;
        outcome.mse = report.mse;
    } catch (const Error& e) {
        outcome.failed = true;
        outcome.failure = e.describe();
    }
    return outcome;
}

struct MonteCarloResult {
    std::vector<TrialOutcome> trials;
    Summary W;
};

inline MonteCarloResult monte_carlo(const LtpModel& model, const StudyConfig& config)
{
    if (config.trials < 1) {
        fail(ErrorCode::InvalidConfig, "at least one trial is required");
    }
    MonteCarloResult result;
    result.trials.resize(config.trials);
    parallel_for(config.trials, config.jobs, [&](std::size_t i) {
        result.trials[i] = run_trial(model, config, i, derive_seed(config.seed, i, SeedRole::Trial));
    });
    std::vector<double> values;
    for (const auto& t : result.trials) {
        if (!t.failed) {
            values.push_back(t.W);
        }
    }
    result.W = summarize(values, config.trials);
    return result;
}

struct SweepResult {
    std::vector<std::size_t> N_grid;
    std::vector<std::vector<TrialOutcome>> trials; // per N
    std::vector<double> median_mse;                // per N, over successful trials
    std::vector<std::size_t> failures;             // per N
    double slope = std::numeric_limits<double>::quiet_NaN();
};

/// Median impulse-response MSE over `trials` ensembles for each record length
/// N, and the log-log slope of median MSE against N. config.N is ignored.
inline SweepResult consistency_sweep(const LtpModel& model, const std::vector<std::size_t>& N_grid,
                                     const StudyConfig& config)
{
    if (N_grid.empty() || config.trials < 1) {
        fail(ErrorCode::InvalidConfig, "sweep needs a non-empty N grid and at least one trial");
    }
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
        if (N_grid[i] < 1 || (i > 0 && N_grid[i] <= N_grid[i - 1])) {
            fail(ErrorCode::InvalidConfig, "N grid must be strictly increasing and positive");
        }
        const std::size_t q = config.q ? config.q : default_block_rows(N_grid[i], model.period());
        const std::size_t r = config.r ? config.r : default_block_rows(N_grid[i], model.period());
        if (q + r - 1 > N_grid[i] * model.period()) {
            fail(ErrorCode::BlockRangeExceeded, "q + r - 1 exceeds NP at N = " + std::to_string(N_grid[i]));
        }
    }
    SweepResult result;
    result.N_grid = N_grid;
    for (const std::size_t N : N_grid) {
        StudyConfig cfg = config;
        cfg.N = N;
        const std::uint64_t base = derive_seed(config.seed, N, SeedRole::Trial);
        std::vector<TrialOutcome> outcomes(config.trials);
        parallel_for(config.trials, config.jobs, [&](std::size_t i) {
            outcomes[i] = run_trial(model, cfg, i, derive_seed(base, i, SeedRole::Trial));
        });
        std::vector<double> mse;
        for (const auto& o : outcomes) {
            if (!o.failed) {
                mse.push_back(o.mse);
            }
        }
        result.failures.push_back(config.trials - mse.size());
        result.median_mse.push_back(median(mse));
        result.trials.push_back(std::move(outcomes));
    }
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < N_grid.size(); ++i) {
        if (std::isfinite(result.median_mse[i]) && result.median_mse[i] > 0.0) {
            xs.push_back(static_cast<double>(N_grid[i]));
            ys.push_back(result.median_mse[i]);
        }
    }
    if (xs.size() >= 2) {
        result.slope = loglog_slope(xs, ys);
    }
    return result;
}

struct FrequencyPairCorrelation {
    std::size_t k = 0;
    std::size_t m = 0;
    double correlation = 0.0; // largest magnitude over entries and over both pairings
};

struct EtfeErrorStats {
    std::size_t trials = 0;
    std::vector<CMatrix> mean_error; // per k
    std::vector<Matrix> std_error;   // per k, entrywise std of the complex error
    double bias_pass_fraction = 0.0; // entries with |mean| <= 4 std / sqrt(trials)
    std::vector<FrequencyPairCorrelation> pairs;
    double correlation_pass_fraction = 0.0; // pairs with correlation < 0.15
    double mean_variance = 0.0;             // average entrywise error variance over the grid
};

struct EtfeStudyConfig {
    std::size_t trials = 500;
    std::size_t N = 25;
    std::size_t J = 0; // 0 selects 10 P
    double sigma = 1.0;
    std::uint64_t seed = 0;
    std::size_t pairs = 50;
    double bias_sigmas = 4.0;
    double correlation_bound = 0.15;
    NoiseModel noise{};
};

/// Monte Carlo statistics of G_hat - G over noise realizations with the input
/// patterns held fixed. Frequency pairs exclude k = m and conjugate pairs
/// k + m = N, whose errors are deterministic conjugates for real data.
inline EtfeErrorStats etfe_error_stats(const LtpModel& model, const EtfeStudyConfig& config)
{
    if (config.trials < 2) {
        fail(ErrorCode::InvalidConfig, "at least two trials are required");
    }
    const std::size_t J = config.J ? config.J : 10 * model.period();
    EnsembleOptions options;
    options.J = J;
    options.N = config.N;
    options.sigma = 0.0;
    options.master_seed = config.seed;
    const Ensemble clean = collect_ensemble(model, options);
    const auto truth = true_lifted_frequency_response(model, config.N);
    const std::size_t N = config.N;

    std::vector<std::vector<CMatrix>> errors(config.trials);
    for (std::size_t trial = 0; trial < config.trials; ++trial) {
        const std::uint64_t trial_seed = derive_seed(config.seed, trial, SeedRole::Trial);
        Ensemble noisy = clean;
        for (std::size_t i = 0; i < noisy.size(); ++i) {
            auto& e = noisy.experiments[i];
            e.meta.noise_seed = derive_seed(trial_seed, i, SeedRole::Noise);
            e.meta.sigma = config.sigma;
            e.output = add_noise(e.output, config.sigma, e.meta.noise_seed, config.noise);
        }
        const auto estimate = etfe(assemble_spectra(noisy));
        errors[trial].reserve(N);
        for (std::size_t k = 0; k < N; ++k) {
            errors[trial].push_back(estimate.values[k] - truth.values[k]);
        }
    }

    EtfeErrorStats stats;
    stats.trials = config.trials;
    const auto T = static_cast<double>(config.trials);
    const Index rows = truth.values[0].rows();
    const Index cols = truth.values[0].cols();
    std::size_t passed = 0;
    std::size_t total = 0;
    double variance_sum = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
        CMatrix mean = CMatrix::Zero(rows, cols);
        for (const auto& e : errors) {
            mean += e[k];
        }
        mean /= T;
        Matrix var = Matrix::Zero(rows, cols);
        for (const auto& e : errors) {
            var += (e[k] - mean).cwiseAbs2();
        }
        var /= (T - 1.0);
        const Matrix sd = var.cwiseSqrt();
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) {
                ++total;
                passed += std::abs(mean(i, j)) <= config.bias_sigmas * sd(i, j) / std::sqrt(T) ? 1 : 0;
            }
        }
        variance_sum += var.mean();
        stats.mean_error.push_back(std::move(mean));
        stats.std_error.push_back(sd);
    }
    stats.bias_pass_fraction = static_cast<double>(passed) / static_cast<double>(total);
    stats.mean_variance = variance_sum / static_cast<double>(N);

    std::vector<std::pair<std::size_t, std::size_t>> candidates;
    for (std::size_t k = 0; k < N; ++k) {
        for (std::size_t m = k + 1; m < N; ++m) {
            if (k + m != N) {
                candidates.emplace_back(k, m);
            }
        }
    }
    std::mt19937_64 rng(derive_seed(config.seed, 0, SeedRole::Input));
    std::shuffle(candidates.begin(), candidates.end(), rng);
    candidates.resize(std::min(candidates.size(), config.pairs));

    std::size_t uncorrelated = 0;
    for (const auto& [k, m] : candidates) {
        double worst = 0.0;
        for (Index i = 0; i < rows; ++i) {
            for (Index j = 0; j < cols; ++j) {
                Complex herm{0.0, 0.0};
                Complex comp{0.0, 0.0};
                double ek = 0.0;
                double em = 0.0;
                for (const auto& e : errors) {
                    const Complex a = e[k](i, j) - stats.mean_error[k](i, j);
                    const Complex b = e[m](i, j) - stats.mean_error[m](i, j);
                    herm += std::conj(a) * b;
                    comp += a * b;
                    ek += std::norm(a);
                    em += std::norm(b);
                }
                const double scale = std::sqrt(ek * em);
                if (scale > 0.0) {
                    worst = std::max({worst, std::abs(herm) / scale, std::abs(comp) / scale});
                }
            }
        }
        stats.pairs.push_back({k, m, worst});
        uncorrelated += worst < config.correlation_bound ? 1 : 0;
    }
    stats.correlation_pass_fraction
        = stats.pairs.empty() ? 0.0 : static_cast<double>(uncorrelated) / static_cast<double>(stats.pairs.size());
    return stats;
}

} // namespace ltpsid
