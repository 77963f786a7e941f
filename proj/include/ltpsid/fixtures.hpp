#pragma once

#include <optional>
#include <string_view>
#include <vector>

#include "ltpsid/model.hpp"

namespace ltpsid::fixtures {

// Wind-turbine flapping dynamics, P = 2, n_x = 2, n_y = n_u = 1.
inline LtpModel example1_raw()
{
    Matrix A0(2, 2), A1(2, 2), B0(2, 1), B1(2, 1), C0(1, 2), C1(1, 2);
    A0 << 0.0, 0.0734, -6.5229, -0.4997;
    B0 << -0.07221, -9.6277;
    C0 << 1.0, 0.0;
    A1 << -0.0021, 0.0, -0.0138, 0.5196;
    B1 << 0.0, 0.0;
    C1 << 0.0, 0.0;
    return LtpModel({A0, A1}, {B0, B1}, {C0, C1});
}

// P = 3, n_x = 2, n_y = n_u = 1; the monodromy is upper triangular with
// diagonal (0.6, 0.8).
inline LtpModel example2_raw()
{
    Matrix A0(2, 2), A1(2, 2), A2(2, 2), B0(2, 1), B1(2, 1), B2(2, 1), C0(1, 2), C1(1, 2), C2(1, 2);
    A0 << 1.0, 1.0, 0.0, 2.0;
    B0 << 0.0, 1.0;
    C0 << 1.0, 0.0;
    A1 << 0.2, 1.0, 0.0, 0.4;
    B1 << 0.0, 1.0;
    C1 << 2.0, 0.0;
    A2 << 3.0, 1.0, 0.0, 1.0;
    B2 << 1.0, 2.0;
    C2 << 1.0, 1.0;
    return LtpModel({A0, A1, A2}, {B0, B1, B2}, {C0, C1, C2});
}

inline LtpModel example1() { return normalize_gain(example1_raw()); }
inline LtpModel example2() { return normalize_gain(example2_raw()); }

/// First-order LTI system x(t+1) = 0.5 x(t) + u(t), y = x, as a P = 1 model.
inline LtpModel first_order_lti()
{
    return LtpModel({Matrix::Constant(1, 1, 0.5)}, {Matrix::Constant(1, 1, 1.0)}, {Matrix::Constant(1, 1, 1.0)});
}

/// Built-in model by name: example1, example2 (normalized unless raw is set),
/// or lti. Returns nullopt for unknown names.
inline std::optional<LtpModel> by_name(std::string_view name, bool normalized = true)
{
    if (name == "example1") {
        return normalized ? example1() : example1_raw();
    }
    if (name == "example2") {
        return normalized ? example2() : example2_raw();
    }
    if (name == "lti") {
        return first_order_lti();
    }
    return std::nullopt;
}

inline std::vector<std::string_view> names() { return {"example1", "example2", "lti"}; }

} // namespace ltpsid::fixtures
