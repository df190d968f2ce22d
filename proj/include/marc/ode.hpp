#pragma once

#include <array>
#include <cstddef>

namespace marc {

template <std::size_t N>
using StateVec = std::array<double, N>;

/// One classical fourth-order Runge-Kutta step of size h for x' = f(x).
template <std::size_t N, class F>
StateVec<N> rk4_step(F&& f, const StateVec<N>& x, double h) {
    auto shifted = [&](const StateVec<N>& k, double scale) {
        StateVec<N> y;
        for (std::size_t i = 0; i < N; ++i) y[i] = x[i] + scale * k[i];
        return y;
    };
    const StateVec<N> k1 = f(x);
    const StateVec<N> k2 = f(shifted(k1, 0.5 * h));
    const StateVec<N> k3 = f(shifted(k2, 0.5 * h));
    const StateVec<N> k4 = f(shifted(k3, h));
    StateVec<N> out;
    for (std::size_t i = 0; i < N; ++i) out[i] = x[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    return out;
}

/// `steps` RK4 steps of size h.
template <std::size_t N, class F>
StateVec<N> rk4_integrate(F&& f, StateVec<N> x, double h, std::size_t steps) {
    for (std::size_t s = 0; s < steps; ++s) x = rk4_step(f, x, h);
    return x;
}

}  // namespace marc
