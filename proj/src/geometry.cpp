#include "tbflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "json.hpp"

namespace tbf {

bool ControlRegion::contains(const Vec2& x) const {
    const double u1 = wrap_centered(x[0] - center[0]);
    const double u2 = wrap_centered(x[1] - center[1]);
    if (std::max(std::abs(u1), std::abs(u2)) < 0.5 * side) return true;
    if (strips && (std::abs(u1) < strip_halfwidth || std::abs(u2) < strip_halfwidth)) return true;
    return false;
}

double ControlRegion::depth(const Vec2& x) const {
    if (!contains(x)) return 0.0;
    const double u1 = std::abs(wrap_centered(x[0] - center[0]));
    const double u2 = std::abs(wrap_centered(x[1] - center[1]));
    double d = 0.5 * side - std::max(u1, u2);
    if (strips) d = std::max({d, strip_halfwidth - u1, strip_halfwidth - u2});
    return d;
}

void ControlRegion::validate() const {
    if (!(side > 0.0) || side >= kTwoPi)
        throw GeometryError("control region: square side must lie in (0, 2pi)");
    if (strips && (!(strip_halfwidth > 0.0) || strip_halfwidth >= kPi))
        throw GeometryError("control region: strips would swallow the torus (complement wraps)");
}

double Covering::overlap() const { return L - kTwoPi / per_axis; }

namespace {
bool in_square_at(const Vec2& corner, double L, const Vec2& x) {
    const double u1 = wrap(x[0] - corner[0]), u2 = wrap(x[1] - corner[1]);
    return u1 > 0.0 && u1 < L && u2 > 0.0 && u2 < L;
}
} // namespace

bool Covering::in_square(int i, const Vec2& x) const { return in_square_at(corners.at(i), L, x); }
bool Covering::in_reference(const Vec2& x) const { return in_square_at(ref_corner, L, x); }

Covering build_covering(double L, const ControlRegion& omega) {
    omega.validate();
    if (!(L > 0.0) || L >= kTwoPi) throw GeometryError("covering: side length must lie in (0, 2pi)");
    Covering cov;
    double ratio = kTwoPi / L;
    if (std::abs(ratio - std::round(ratio)) < 1e-12) {
        L *= 0.99;
        cov.perturbed = true;
        std::cerr << "warning: 2pi/L is an integer; shrinking L by 1% to " << L << "\n";
        ratio = kTwoPi / L;
    }
    if (!(L < omega.side)) throw GeometryError("covering: a closed square of side L does not fit inside omega");
    cov.L = L;
    cov.per_axis = static_cast<int>(std::ceil(ratio));
    cov.M = cov.per_axis * cov.per_axis;
    const int m = cov.per_axis;
    cov.ref_corner = {omega.center[0] - 0.5 * L, omega.center[1] - 0.5 * L};
    cov.ref_corner = {wrap(cov.ref_corner[0]), wrap(cov.ref_corner[1])};
    for (int l = 0; l < m; ++l)
        for (int i = 0; i < m; ++i) {
            Vec2 o{kTwoPi * i / m, kTwoPi * l / m};
            cov.corners.push_back(o);
            cov.shifts.push_back({wrap_centered(cov.ref_corner[0] - o[0]), wrap_centered(cov.ref_corner[1] - o[1])});
        }
    return cov;
}

Cutoffs::Cutoffs(const Covering& cov, const ControlRegion& omega, const CutoffParams& params)
    : cov_(cov), omega_(omega) {
    period_ = kTwoPi / cov.per_axis;
    margin_ = params.mu_margin;
    ramp_ = cov.overlap() - 2.0 * margin_;
    if (!(margin_ > 0.0)) throw GeometryError("cutoffs: mu margin must be positive");
    if (!(ramp_ > 0.0)) throw GeometryError("cutoffs: mu margin leaves no room for the ramp");
    chi_p_ = 0.5 * cov.L + params.chi_plateau;
    chi_q_ = 0.5 * omega.side - params.chi_edge_gap;
    if (!(chi_q_ > chi_p_)) throw GeometryError("cutoffs: insufficient margin between the square and omega for chi");

    // 1D periodic trapezoid sums are spectrally accurate for these smooth profiles
    const int q = 1 << 14;
    double mu1[2] = {0, 0}, ms[2] = {0, 0}, mc[2] = {0, 0};
    for (int axis = 0; axis < 2; ++axis)
        for (int k = 0; k < q; ++k) {
            const double x = kTwoPi * k / q;
            const double v = mu_factor(x, axis).value() / q;
            mu1[axis] += v;
            ms[axis] += v * std::sin(x);
            mc[axis] += v * std::cos(x);
        }
    mass_ = mu1[0] * mu1[1];
    moments_ = {ms[0] * mu1[1], mc[0] * mu1[1], ms[1] * mu1[0], mc[1] * mu1[0]};
}

Jet Cutoffs::mu_factor(double x, int axis) const {
    const double u = wrap(x - cov_.ref_corner[axis]);
    Jet t1 = Jet::variable((u - margin_) / ramp_, 1.0 / ramp_);
    Jet t2 = Jet::variable((u - margin_ - period_) / ramp_, 1.0 / ramp_);
    return smooth_step(t1) - smooth_step(t2);
}

Jet Cutoffs::chi_factor(double x, int axis) const {
    const double u = wrap_centered(x - omega_.center[axis]);
    const double w = chi_q_ - chi_p_;
    Jet a = Jet::variable((chi_q_ - u) / w, -1.0 / w);
    Jet b = Jet::variable((chi_q_ + u) / w, 1.0 / w);
    return smooth_step(a) * smooth_step(b);
}

double Cutoffs::mu(const Vec2& x) const { return mu_factor(x[0], 0).value() * mu_factor(x[1], 1).value(); }
double Cutoffs::chi(const Vec2& x) const { return chi_factor(x[0], 0).value() * chi_factor(x[1], 1).value(); }

namespace {
Cutoffs::DerivTable tensor(const Jet& f1, const Jet& f2) {
    Cutoffs::DerivTable d{};
    auto a = f1.derivs(), b = f2.derivs();
    for (int i = 0; i <= 4; ++i)
        for (int j = 0; j <= 4; ++j) d[i][j] = a[i] * b[j];
    return d;
}
} // namespace

Cutoffs::DerivTable Cutoffs::mu_derivs(const Vec2& x) const {
    return tensor(mu_factor(x[0], 0), mu_factor(x[1], 1));
}
Cutoffs::DerivTable Cutoffs::chi_derivs(const Vec2& x) const {
    return tensor(chi_factor(x[0], 0), chi_factor(x[1], 1));
}

SpectralField Cutoffs::mu_field(int n) const {
    return SpectralField::sample(n, [this](double a, double b) { return mu({a, b}); });
}
SpectralField Cutoffs::chi_field(int n) const {
    return SpectralField::sample(n, [this](double a, double b) { return chi({a, b}); });
}

bool Cutoffs::mu_support_contains(const Vec2& x) const { return mu(x) > 0.0; }

bool Cutoffs::chi_plateau_contains(const Vec2& x) const {
    const double u1 = std::abs(wrap_centered(x[0] - omega_.center[0]));
    const double u2 = std::abs(wrap_centered(x[1] - omega_.center[1]));
    return std::max(u1, u2) <= chi_p_;
}

int TimeGrid::window_at(double t) const {
    for (int i = 0; i < M; ++i)
        if (t >= ta[i] && t < tb[i]) return i;
    return -1;
}

TimeGrid time_grid(int M) {
    if (M < 1) throw std::invalid_argument("time_grid: M must be >= 1");
    TimeGrid tg;
    tg.M = M;
    tg.Tstar = 1.0 / (3.0 * M + 2.0);
    tg.tc0 = tg.Tstar;
    for (int i = 1; i <= M; ++i) {
        tg.ta.push_back((3.0 * i - 1.0) * tg.Tstar);
        tg.tb.push_back(3.0 * i * tg.Tstar);
        tg.tc.push_back((3.0 * i + 1.0) * tg.Tstar);
    }
    return tg;
}

std::string geometry_report(const Covering& cov, const Cutoffs& cut, const TimeGrid& tg, double r_measured,
                            double kappa) {
    nlohmann::json j;
    j["L"] = cov.L;
    j["M"] = cov.M;
    j["Tstar"] = tg.Tstar;
    j["L_perturbed"] = cov.perturbed;
    j["overlap_width"] = cov.overlap();
    j["reference_corner"] = {cov.ref_corner[0], cov.ref_corner[1]};
    for (int i = 0; i < cov.M; ++i) {
        j["corners"].push_back({cov.corners[i][0], cov.corners[i][1]});
        j["shifts"].push_back({cov.shifts[i][0], cov.shifts[i][1]});
    }
    j["mu_margin"] = cut.margin();
    j["mu_ramp_width"] = cut.ramp_width();
    j["mu_mass"] = cut.mass();
    j["chi_plateau_halfwidth"] = cut.chi_plateau_halfwidth();
    j["chi_support_halfwidth"] = cut.chi_support_halfwidth();
    j["r"] = r_measured;
    j["kappa"] = kappa;
    j["time_grid"] = {{"ta", tg.ta}, {"tb", tg.tb}, {"tc", tg.tc}};
    return j.dump(2);
}

} // namespace tbf
