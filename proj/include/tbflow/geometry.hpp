#pragma once
// Covering of the torus by overlapping squares, partition-of-unity cutoff mu,
// control-region cutoff chi, shifts and the equidistant time grid.

#include <array>
#include <string>
#include <vector>

#include "tbflow/profiles.hpp"
#include "tbflow/spectral.hpp"

namespace tbf {

class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Axis-aligned square (side < 2pi) plus optional horizontal and vertical strips
// through its center. The complement is then a plus-shaped, simply connected
// region around the antipode of the center.
struct ControlRegion {
    Vec2 center{kPi, kPi};
    double side = kTwoPi - 1.0;
    double strip_halfwidth = 0.5;
    bool strips = true;

    bool contains(const Vec2& x) const;
    // sup-distance from x to the closed complement (0 outside); used for support checks
    double depth(const Vec2& x) const;
    void validate() const;
};

struct Covering {
    double L = 0.0;
    int per_axis = 0; // sqrt(M)
    int M = 0;
    std::vector<Vec2> corners; // o_i, i = 0..M-1
    Vec2 ref_corner{};         // corner of the reference square
    std::vector<Vec2> shifts;  // S_i in [-pi,pi)^2 with corner_i + S_i = ref corner (mod 2pi)
    bool perturbed = false;    // L was shrunk because 2pi/L was an integer

    double overlap() const; // L - 2pi/sqrt(M)
    bool in_square(int i, const Vec2& x) const;
    bool in_reference(const Vec2& x) const;
};

Covering build_covering(double L, const ControlRegion& omega);

struct CutoffParams {
    double mu_margin = 0.09;   // gap between supp(mu) and the square boundary, each side
    double chi_plateau = 0.25; // chi = 1 this far beyond the reference square
    double chi_edge_gap = 0.04; // chi vanishes this far inside the omega square
};

// mu and chi as pointwise-evaluable tensor products, plus grid samples.
class Cutoffs {
public:
    Cutoffs() = default;
    Cutoffs(const Covering& cov, const ControlRegion& omega, const CutoffParams& params);

    // 1D factors (argument is the raw coordinate)
    Jet mu_factor(double x, int axis) const;
    Jet chi_factor(double x, int axis) const;

    double mu(const Vec2& x) const;
    double chi(const Vec2& x) const;
    // D[a][b] = d1^a d2^b of the cutoff at x, a,b = 0..4
    using DerivTable = std::array<std::array<double, 5>, 5>;
    DerivTable mu_derivs(const Vec2& x) const;
    DerivTable chi_derivs(const Vec2& x) const;

    SpectralField mu_field(int n) const;
    SpectralField chi_field(int n) const;

    double ramp_width() const { return ramp_; }
    double margin() const { return margin_; }
    double support_distance() const { return margin_; } // dist(supp mu, boundary of reference square)
    double chi_plateau_halfwidth() const { return chi_p_; }
    double chi_support_halfwidth() const { return chi_q_; }
    const Covering& covering() const { return cov_; }
    const ControlRegion& region() const { return omega_; }

    // integral of mu and of mu*{sin x1, cos x1, sin x2, cos x2} (normalized measure)
    double mass() const { return mass_; }
    const std::array<double, 4>& trig_moments() const { return moments_; }

    bool mu_support_contains(const Vec2& x) const; // mu(x) > 0
    bool chi_plateau_contains(const Vec2& x) const; // chi(x) == 1

private:
    Covering cov_;
    ControlRegion omega_;
    double margin_ = 0.0, ramp_ = 0.0, period_ = 0.0;
    double chi_p_ = 0.0, chi_q_ = 0.0;
    double mass_ = 0.0;
    std::array<double, 4> moments_{};
};

struct TimeGrid {
    int M = 0;
    double Tstar = 0.0;
    double tc0 = 0.0;
    std::vector<double> ta, tb, tc; // i = 1..M stored at index i-1

    // window index (0-based) containing t in [ta, tb), or -1
    int window_at(double t) const;
};

TimeGrid time_grid(int M);

// JSON text with L, M, T*, corners, shifts, r, mass of mu
std::string geometry_report(const Covering& cov, const Cutoffs& cut, const TimeGrid& tg, double r_measured,
                            double kappa);

} // namespace tbf
