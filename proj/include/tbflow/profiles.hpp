#pragma once
// Smooth one-dimensional building blocks with exact derivatives up to order 4.
//
// Derivatives are carried by truncated Taylor arithmetic so that cutoff
// products and their derivatives can be evaluated pointwise without spectral
// differentiation (which would smear compact supports).

#include <array>
#include <cmath>

namespace tbf {

// Truncated Taylor series: t[k] = f^(k)(x0) / k!, k = 0..4.
struct Jet {
    static constexpr int K = 4;
    std::array<double, K + 1> t{};

    static Jet constant(double c) {
        Jet j;
        j.t[0] = c;
        return j;
    }
    static Jet variable(double x0, double slope = 1.0) {
        Jet j;
        j.t[0] = x0;
        j.t[1] = slope;
        return j;
    }
    double value() const { return t[0]; }
    // k-th derivative
    double deriv(int k) const {
        static constexpr double fact[] = {1, 1, 2, 6, 24};
        return t[k] * fact[k];
    }
    std::array<double, K + 1> derivs() const {
        std::array<double, K + 1> d{};
        for (int k = 0; k <= K; ++k) d[k] = deriv(k);
        return d;
    }
};

inline Jet operator+(Jet a, const Jet& b) {
    for (int k = 0; k <= Jet::K; ++k) a.t[k] += b.t[k];
    return a;
}
inline Jet operator-(Jet a, const Jet& b) {
    for (int k = 0; k <= Jet::K; ++k) a.t[k] -= b.t[k];
    return a;
}
inline Jet operator-(Jet a) {
    for (auto& v : a.t) v = -v;
    return a;
}
inline Jet operator*(double s, Jet a) {
    for (auto& v : a.t) v *= s;
    return a;
}
inline Jet operator+(double s, Jet a) {
    a.t[0] += s;
    return a;
}
inline Jet operator*(const Jet& a, const Jet& b) {
    Jet c;
    for (int i = 0; i <= Jet::K; ++i)
        for (int j = 0; i + j <= Jet::K; ++j) c.t[i + j] += a.t[i] * b.t[j];
    return c;
}
inline Jet reciprocal(const Jet& a) {
    Jet r;
    r.t[0] = 1.0 / a.t[0];
    for (int k = 1; k <= Jet::K; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += a.t[j] * r.t[k - j];
        r.t[k] = -s / a.t[0];
    }
    return r;
}
inline Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }
inline Jet exp(const Jet& a) {
    // e' = a' e  =>  k e_k = sum_{j=1..k} j a_j e_{k-j}
    Jet e;
    e.t[0] = std::exp(a.t[0]);
    for (int k = 1; k <= Jet::K; ++k) {
        double s = 0.0;
        for (int j = 1; j <= k; ++j) s += j * a.t[j] * e.t[k - j];
        e.t[k] = s / k;
    }
    return e;
}

// C-infinity step: 0 for s <= 0, 1 for s >= 1, built from exp(-1/s).
inline Jet smooth_step(const Jet& s) {
    const double x = s.value();
    // below 1e-3 the exp(-1/s) factor is < 1e-434 and underflows anyway
    if (x <= 1e-3) return Jet::constant(0.0);
    if (x >= 1.0 - 1e-3) return Jet::constant(1.0);
    Jet a = exp(-reciprocal(s));
    Jet b = exp(-reciprocal(1.0 + (-s)));
    return a / (a + b);
}

inline double smooth_step(double s) { return smooth_step(Jet::variable(s)).value(); }

// Compactly supported bump exp(-1/(1-u^2)) on |u| < 1 (not normalized).
inline Jet bump_unnormalized(const Jet& u) {
    const double x = u.value();
    if (std::abs(x) >= 1.0 - 1e-3) return Jet::constant(0.0);
    Jet q = 1.0 + (-(u * u));
    return exp(-reciprocal(q));
}

} // namespace tbf
