#pragma once

#include <vector>

#include "ltpsid/linalg.hpp"
#include "ltpsid/model.hpp"
#include "ltpsid/signal.hpp"

namespace ltpsid {

/// Generalized empirical transfer function estimate of the lifted system,
/// G_hat(w_k) = Y(w_k) U(w_k)^+, computed independently per frequency.
/// rank_tol is relative to the largest singular value of U(w_k); a lifted
/// input without full row rank at some k raises RankDeficient.
inline LiftedFrequencyResponse etfe(const LiftedSpectra& spectra, double rank_tol = 1e-10)
{
    LiftedFrequencyResponse response;
    response.period = spectra.period;
    response.ny = spectra.ny;
    response.nu = spectra.nu;
    response.values.reserve(spectra.grid_size());
    for (std::size_t k = 0; k < spectra.grid_size(); ++k) {
        const CMatrix& U = spectra.U[k];
        if (U.cols() < U.rows()) {
            fail(ErrorCode::RankDeficient, "frequency " + std::to_string(k) + ": J=" + std::to_string(U.cols())
                                               + " experiments cannot span " + std::to_string(U.rows())
                                               + " lifted input channels");
        }
        const auto pinv = pseudo_inverse(U, rank_tol);
        if (pinv.rank < U.rows()) {
            fail(ErrorCode::RankDeficient, "frequency " + std::to_string(k) + ": lifted input rank "
                                               + std::to_string(pinv.rank) + " < " + std::to_string(U.rows())
                                               + ", smallest singular value "
                                               + std::to_string(pinv.smallest_singular_value));
        }
        response.values.push_back(spectra.Y[k] * pinv.matrix);
    }
    return response;
}

/// Frobenius norm of Y(w_k) - G(w_k) U(w_k) per frequency.
inline std::vector<double> residual_energy(const LiftedSpectra& spectra, const LiftedFrequencyResponse& response)
{
    if (response.grid_size() != spectra.grid_size()) {
        fail(ErrorCode::DimensionMismatch, "response and spectra use different frequency grids");
    }
    std::vector<double> residual;
    residual.reserve(spectra.grid_size());
    for (std::size_t k = 0; k < spectra.grid_size(); ++k) {
        const CMatrix& G = response.values[k];
        if (G.rows() != spectra.Y[k].rows() || G.cols() != spectra.U[k].rows()) {
            fail(ErrorCode::DimensionMismatch, "response shape does not match spectra at k=" + std::to_string(k));
        }
        residual.push_back((spectra.Y[k] - G * spectra.U[k]).norm());
    }
    return residual;
}

} // namespace ltpsid
