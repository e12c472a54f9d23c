#pragma once
// Generating drift, flushing profile, the assembled convection profile and its
// Euler residual.
//
// Window stream functions are expanded on the basis
//   e = {sin x1, sin x2, cos x1, cos x2}
// and the window field is W = grad_perp(chi * sum_j w_j(t) e_j). Everything that
// the solver needs is then a fixed set of spatial fields times scalar weights.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "tbflow/geometry.hpp"
#include "tbflow/spectral.hpp"

namespace tbf {

using Coeff4 = std::array<double, 4>;

// c0 + sum_q a_q cos(q w t) + b_q sin(q w t)
struct TrigSignal {
    double freq = 1.0;
    double c0 = 0.0;
    std::vector<double> a, b;

    double value(double t) const;
    double integral(double t) const; // from 0 to t
};

// scale * (1 - (t/half)^power): vanishes only at t = half on [0, half]
struct Envelope {
    double half = 1.0;
    double scale = 1.0;
    int power = 8;

    double value(double t) const;
    double deriv(double t) const;
};

// Four signals in the order (1,0)-sin, (1,0)-cos, (0,1)-sin, (0,1)-cos;
// psi_l(t) = envelope(t) * int_0^t phi_l on [0, T*/2], odd-reflected about T*/2.
class SignalFamily {
public:
    SignalFamily() = default;
    SignalFamily(double tstar, std::array<TrigSignal, 4> signals, Envelope env);

    double tstar() const { return tstar_; }
    double half() const { return 0.5 * tstar_; }
    const std::array<TrigSignal, 4>& signals() const { return sig_; }
    const Envelope& envelope() const { return env_; }

    // before symmetrization, t in [0, T*/2]
    Coeff4 half_psi(double t) const;
    Coeff4 half_psi_dot(double t) const;
    // symmetrized on [0, T*], zero outside
    Coeff4 psi(double t) const;
    Coeff4 psi_dot(double t) const;

    SignalFamily scaled(double factor) const;

private:
    double tstar_ = 0.0;
    std::array<TrigSignal, 4> sig_{};
    Envelope env_{};
};

// zero-mean random trigonometric polynomials, fundamental period T*/2
SignalFamily random_signal_family(double tstar, std::uint64_t seed, int degree = 6, int envelope_power = 8,
                                  bool zero_mean = true);

using SignalFn = std::function<Coeff4(double)>;
// u(t) on [0,T/2] -> u(t) for t <= T/2, -u(T-t) after; throws std::domain_error if u(0) or u(T/2) != 0
SignalFn symmetrize(SignalFn half_signal, double period, double tol = 1e-12);

// kappa * sum_l (psi_s s_l + psi_c c_l) l_perp with l_perp = (-l2, l1)
VectorField generating_field(const Coeff4& psi, double kappa, int n);
Vec2 generating_velocity(const Coeff4& psi, double kappa, const Vec2& x);
// stream function with grad_perp(phi) = u; rejects nonzero means
SpectralField stream_function(const VectorField& u);

class GeneratingDrift {
public:
    GeneratingDrift() = default;
    GeneratingDrift(SignalFamily sig, double kappa) : sig_(std::move(sig)), kappa_(kappa) {}

    const SignalFamily& signals() const { return sig_; }
    double kappa() const { return kappa_; }
    double tstar() const { return sig_.tstar(); }

    Vec2 velocity(const Vec2& x, double t) const { return generating_velocity(sig_.psi(t), kappa_, x); }
    VectorField field(int n, double t) const { return generating_field(sig_.psi(t), kappa_, n); }
    // coefficients of x -> phi(x - S, t) on the e-basis, and their time derivative
    Coeff4 shifted_stream(const Vec2& S, double t) const;
    Coeff4 shifted_stream_dot(const Vec2& S, double t) const;
    SpectralField stream(int n, double t) const;

private:
    SignalFamily sig_;
    double kappa_ = 0.0;
};

// max over t of sqrt(sum psi^2) equals max_x |u*| at kappa = 1
double max_generating_speed(const SignalFamily& sig, int samples = 4001);
// 0.9 * dist(supp mu, boundary) / (T* max speed); 1.0 when the signals vanish
double pick_kappa(const SignalFamily& sig, const Cutoffs& cut, int samples = 4001);

// Spatially constant drift that carries square i onto the reference square
// before window i and back afterwards.
class FlushingProfile {
public:
    FlushingProfile() = default;
    FlushingProfile(const Covering& cov, const TimeGrid& tg);

    Vec2 velocity(double t) const;
    Vec2 accel(double t) const;
    Vec2 displacement(double t) const; // int_0^t
    const TimeGrid& grid() const { return tg_; }

private:
    // block index i (0-based) and phase: 0 first third, 1 window, 2 last third; -1 outside
    int locate(double t, int& block, double& s) const;
    Jet bump(double s) const; // unit-mass bump on [0, T*], as a function of s

    TimeGrid tg_;
    std::vector<Vec2> shifts_;
    double norm_ = 1.0; // int_{-1}^{1} exp(-1/(1-u^2)) du
};

// Pointwise samples of a vector field and its first derivatives.
struct VelocityJet {
    Vec2 u{};
    std::array<double, 4> du{}; // d1u1, d2u1, d1u2, d2u2
};

// The convection profile: flushing drift plus windowed localized generating fields.
class DriftProgram {
public:
    DriftProgram() = default;
    DriftProgram(const Cutoffs& cut, const TimeGrid& tg, GeneratingDrift gen);

    const Cutoffs& cutoffs() const { return cut_; }
    const TimeGrid& grid() const { return tg_; }
    const GeneratingDrift& generator() const { return gen_; }
    const FlushingProfile& flushing() const { return flush_; }

    // window containing t (ta <= t < tb), or -1
    int window(double t) const { return tg_.window_at(t); }
    // stream weights on the e-basis, zero outside windows
    Coeff4 weights(double t) const;
    Coeff4 weights_dot(double t) const;
    Vec2 ybar(double t) const { return flush_.velocity(t); }
    Vec2 ybar_dot(double t) const { return flush_.accel(t); }

    Vec2 velocity(const Vec2& x, double t) const;
    VelocityJet velocity_jet(const Vec2& x, double t) const;
    // total field on the grid (exact pointwise samples)
    VectorField field(int n, double t) const;

    // times where the program is not smooth: 0, tc, ta, midpoints, tb, 1
    std::vector<double> breakpoints() const;

    // cached spectral building blocks for resolution n (see SpectralBlocks)
    struct SpectralBlocks {
        int n = 0;
        std::array<SpectralField, 4> stream;         // chi e_j sampled
        std::array<VectorField, 4> wind;             // grad_perp(chi e_j)
        std::array<SpectralField, 4> vort;           // curl of wind
        std::array<SpectralField, 4> hyper;          // -Lap(vort)
        std::array<std::array<SpectralField, 4>, 2> dvort; // dealiased d_k vort_j
        std::array<std::array<SpectralField, 4>, 4> adv;   // advect(wind_a, vort_b)
    };
    const SpectralBlocks& blocks(int n) const;

    SpectralField curl_field(int n, double t) const;

private:
    Cutoffs cut_;
    TimeGrid tg_;
    GeneratingDrift gen_;
    FlushingProfile flush_;
    mutable std::map<int, std::shared_ptr<SpectralBlocks>> cache_;
    mutable std::mutex mu_;
};

// Pointwise derivative tables of the window stream chi * e_j.
// E[j][a][b] = d1^a d2^b (chi e_j), a + b <= 4 populated.
using StreamTable = std::array<Cutoffs::DerivTable, 4>;
StreamTable window_stream_table(const Cutoffs& cut, const Vec2& x);

// Residual forces of the profile viewed as a forced Euler flow.
class EulerResidual {
public:
    explicit EulerResidual(const DriftProgram& U) : U_(&U) {}

    // curl force d_t curl U + U.grad curl U, pointwise exact
    double curl_force(const Vec2& x, double t) const;
    // -Lap curl U, pointwise exact
    double hyper_force(const Vec2& x, double t) const;
    // H-bar = ybar' Lambda + ybar' Sigma + d_t W + (ybar.grad) W + (W.grad) W; needs the average profiles
    Vec2 mean_force(double t) const { return U_->ybar_dot(t); }

    // spectral versions built from the solver's own dealiased advection
    SpectralField curl_force_field(int n, double t) const;
    SpectralField hyper_force_field(int n, double t) const;

    // exact grid samples
    SpectralField curl_force_sampled(int n, double t) const;
    SpectralField hyper_force_sampled(int n, double t) const;

private:
    const DriftProgram* U_;
};

} // namespace tbf
