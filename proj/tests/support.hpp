#pragma once

#include <cmath>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "ltpsid/ltpsid.hpp"

namespace ltpsid::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols)
{
    std::normal_distribution<double> normal;
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = normal(rng);
    }
    return m;
}

/// Random LTP model whose monodromy spectral radius is `radius`.
inline LtpModel random_model(std::uint64_t seed, std::size_t P, Index nx, Index nu, Index ny, double radius = 0.7)
{
    std::mt19937_64 rng(seed);
    std::vector<Matrix> A, B, C;
    for (std::size_t t = 0; t < P; ++t) {
        A.push_back(random_matrix(rng, nx, nx));
        B.push_back(random_matrix(rng, nx, nu));
        C.push_back(random_matrix(rng, ny, nx));
    }
    const double rho = spectral_radius(monodromy(LtpModel(A, B, C), 0));
    if (rho > 0.0) {
        const double s = std::pow(radius / rho, 1.0 / static_cast<double>(P));
        for (auto& a : A) {
            a *= s;
        }
    }
    return LtpModel(A, B, C);
}

/// Random well-conditioned state transforms T_t.
inline std::vector<Matrix> random_transforms(std::uint64_t seed, std::size_t P, Index nx)
{
    std::mt19937_64 rng(seed);
    std::vector<Matrix> T;
    for (std::size_t t = 0; t < P; ++t) {
        T.push_back(Matrix::Identity(nx, nx) + 0.3 * random_matrix(rng, nx, nx));
    }
    return T;
}

inline Ensemble noise_free_ensemble(const LtpModel& model, std::size_t N, std::size_t J = 0, std::uint64_t seed = 1)
{
    EnsembleOptions options;
    options.J = J ? J : 10 * model.period() * static_cast<std::size_t>(model.nu());
    options.N = N;
    options.sigma = 0.0;
    options.master_seed = seed;
    return collect_ensemble(model, options);
}

inline ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an ltpsid::Error";
    return ErrorCode::NumericalError;
}

} // namespace ltpsid::testing
