#include "tbflow/boussinesq.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

namespace tbf {

namespace {
// exp(-c |k|^2 h) applied in place
void decay(SpectralField& f, double c, double h) {
    if (c == 0.0 || h == 0.0) return;
    const int n = f.n();
    for (int r = 0; r < n; ++r) {
        const double k1 = f.k1(r);
        for (int col = 0; col < f.cols(); ++col) {
            const double k2 = f.k2(col);
            f.at(r, col) *= std::exp(-c * (k1 * k1 + k2 * k2) * h);
        }
    }
}

SpectralField transport_term(const VectorField& u, const SpectralField& f, bool dealiased) {
    if (dealiased) return advect(u, f);
    return multiply(u.c1, d1(f)) + multiply(u.c2, d2(f));
}

double max_speed(const VectorField& u) {
    const auto a = u.c1.to_grid(), b = u.c2.to_grid();
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::hypot(a[i], b[i]));
    return m;
}

struct Pair {
    SpectralField w, th;
};

SpectralField zero_mean(SpectralField f) {
    f.at(0, 0) = 0.0;
    return f;
}

void add_if(SpectralField& r, const FieldFn& f, double t) {
    if (!f) return;
    const SpectralField h = f(t);
    if (h.n() != 0) r += h;
}

class Stepper {
public:
    Stepper(const ForcingProgram& f, const Physics& ph, const SolverConfig& cfg) : f_(f), ph_(ph), cfg_(cfg) {}

    Vec2 mean(double t) const { return f_.mean ? f_.mean(t) : Vec2{0.0, 0.0}; }

    // ft: time at which the forcing is sampled (differs from t only at step ends)
    Pair rhs(const Pair& s, double t, double ft, const VectorField* u_pre = nullptr) const {
        const VectorField u = u_pre ? *u_pre : upsilon(zero_mean(s.w), mean(t));
        Pair r{transport_term(u, s.w, cfg_.dealias), transport_term(u, s.th, cfg_.dealias)};
        r.w *= -1.0;
        r.th *= -1.0;
        r.w += d1(s.th);
        add_if(r.w, f_.h1, ft);
        add_if(r.th, f_.h2, ft);
        return r;
    }

    // one IF-RK3 step of length h from (a, t).  Forcing jumps at breaks, which are step ends,
    // so the end stages take the one-sided limits from inside the step.
    Pair step(const Pair& a, double t, double h, const VectorField& u0) const {
        const double in = kInside * h;
        const Pair k1 = rhs(a, t, t + in, &u0);
        Pair b{a.w, a.th};
        b.w.axpy(0.5 * h, k1.w);
        b.th.axpy(0.5 * h, k1.th);
        decay(b.w, ph_.nu, 0.5 * h);
        decay(b.th, ph_.tau, 0.5 * h);
        Pair k2 = rhs(b, t + 0.5 * h, t + 0.5 * h);
        // E(h/2) k2 is used twice
        decay(k2.w, ph_.nu, 0.5 * h);
        decay(k2.th, ph_.tau, 0.5 * h);
        Pair c{a.w, a.th};
        c.w.axpy(-h, k1.w);
        c.th.axpy(-h, k1.th);
        decay(c.w, ph_.nu, h);
        decay(c.th, ph_.tau, h);
        c.w.axpy(2.0 * h, k2.w);
        c.th.axpy(2.0 * h, k2.th);
        const Pair k3 = rhs(c, t + h, t + h - in);
        Pair out{a.w, a.th};
        out.w.axpy(h / 6.0, k1.w);
        out.th.axpy(h / 6.0, k1.th);
        decay(out.w, ph_.nu, h);
        decay(out.th, ph_.tau, h);
        out.w.axpy(2.0 * h / 3.0, k2.w);
        out.th.axpy(2.0 * h / 3.0, k2.th);
        out.w.axpy(h / 6.0, k3.w);
        out.th.axpy(h / 6.0, k3.th);
        return out;
    }

private:
    static constexpr double kInside = 1e-9;
    const ForcingProgram& f_;
    const Physics& ph_;
    const SolverConfig& cfg_;
};
} // namespace

VectorField velocity(const BoussinesqState& s, const Vec2& mean) { return upsilon(zero_mean(s.w), mean); }

BoussinesqState resolve(const BoussinesqState& s0, const ForcingProgram& f, const Physics& ph, const SolverConfig& cfg,
                        double t1, const StateObserver& obs, SolveStats* stats) {
    if (s0.w.n() == 0 || s0.w.n() != s0.theta.n()) throw std::invalid_argument("solver: state resolution mismatch");
    if (std::abs(s0.w.mean()) > 1e-10) throw std::domain_error("solver: vorticity must have zero mean");
    if (ph.nu < 0.0 || ph.tau < 0.0) throw std::invalid_argument("solver: negative diffusion");
    const Stepper st(f, ph, cfg);
    const double hgrid = kTwoPi / s0.w.n();
    SolveStats local;
    SolveStats& S = stats ? *stats : local;
    Pair cur{s0.w, s0.theta};
    double t = s0.t;
    if (obs) obs(s0);
    if (t1 <= t) return s0;
    const auto nodes = step_nodes(t, t1, cfg.dt_max, f.breaks);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double a = nodes[i], b = nodes[i + 1];
        // halve the step until the Courant number at its start is admissible
        int split = 0;
        VectorField u = upsilon(zero_mean(cur.w), st.mean(a));
        double umax = max_speed(u);
        while (umax * (b - a) / (1 << split) > cfg.cfl * hgrid) {
            if (++split > cfg.max_halvings)
                throw InstabilityError("solver: Courant limit not reachable by step halving",
                                       BoussinesqState{t, cur.w, cur.th}, S.steps);
        }
        S.halvings += split;
        const int parts = 1 << split;
        for (int p = 0; p < parts; ++p) {
            const double ta = a + (b - a) * p / parts, h = (b - a) / parts;
            if (p > 0) {
                u = upsilon(zero_mean(cur.w), st.mean(ta));
                umax = max_speed(u);
            }
            S.max_courant = std::max(S.max_courant, umax * h / hgrid);
            Pair next = st.step(cur, ta, h, u);
            if (!next.w.all_finite() || !next.th.all_finite())
                throw InstabilityError("solver: non-finite state", BoussinesqState{t, cur.w, cur.th}, S.steps);
            cur = std::move(next);
            t = (p + 1 == parts) ? b : ta + h;
            ++S.steps;
        }
        if (obs) obs(BoussinesqState{t, cur.w, cur.th});
    }
    return BoussinesqState{t1, cur.w, cur.th};
}

// ---------------------------------------------------------------------------

MeanFn limit_mean(const ScaledControl& sc, double theta0_mean) {
    // tabulate int_0^s int b and int_0^s int vartheta on a fine grid (trapezoid), interpolate linearly
    const int K = 20000;
    auto tb = std::make_shared<std::vector<Vec2>>(K + 1, Vec2{0.0, 0.0});
    std::vector<double> vt(K + 1, sc.delta * theta0_mean);
    const double h = 1.0 / K;
    auto zm = [&](double s) { return sc.zeta_mean ? sc.zeta_mean(s) : 0.0; };
    auto bm = [&](double s) { return sc.b_mean ? sc.b_mean(s) : Vec2{0.0, 0.0}; };
    for (int k = 1; k <= K; ++k) vt[k] = vt[k - 1] + 0.5 * h * (zm((k - 1) * h) + zm(k * h));
    for (int k = 1; k <= K; ++k) {
        const Vec2 b0 = bm((k - 1) * h), b1 = bm(k * h);
        (*tb)[k][0] = (*tb)[k - 1][0] + 0.5 * h * (b0[0] + b1[0]);
        (*tb)[k][1] = (*tb)[k - 1][1] + 0.5 * h * (b0[1] + b1[1]) + 0.5 * h * (vt[k - 1] + vt[k]) / sc.delta;
    }
    const Vec2 A = sc.A;
    return [tb, A, K](double s) {
        const double x = std::clamp(s, 0.0, 1.0) * K;
        const int k = std::min(K - 1, static_cast<int>(x));
        const double f = x - k;
        const Vec2& p = (*tb)[k];
        const Vec2& q = (*tb)[k + 1];
        return Vec2{A[0] + (1 - f) * p[0] + f * q[0], A[1] + (1 - f) * p[1] + f * q[1]};
    };
}

namespace {
std::vector<double> limit_breaks(const ScaledControl& sc) {
    std::vector<double> b = sc.U->breakpoints();
    b.insert(b.end(), sc.breaks.begin(), sc.breaks.end());
    std::sort(b.begin(), b.end());
    return b;
}
} // namespace

ForcingProgram scaled_forcing(const ScaledControl& sc, const Physics& ph, int n, double theta0_mean, const FieldFn& h1,
                              const FieldFn& h2) {
    if (!sc.U) throw std::invalid_argument("scaled control: no drift program");
    if (!(sc.delta > 0.0)) throw std::invalid_argument("scaled control: delta must be positive");
    const double d = sc.delta;
    const DriftProgram* U = sc.U;
    auto res = std::make_shared<EulerResidual>(*U);
    ForcingProgram f;
    const FieldFn curl_b = sc.curl_b, zeta = sc.zeta;
    const double nu = ph.nu;
    f.h1 = [=](double t) {
        const double s = t / d;
        SpectralField r = res->curl_force_field(n, s);
        r *= 1.0 / (d * d);
        r.axpy(nu / d, res->hyper_force_field(n, s));
        if (curl_b) {
            const SpectralField c = curl_b(s);
            if (c.n()) r.axpy(1.0 / d, c);
        }
        if (h1) {
            const SpectralField e = h1(t);
            if (e.n()) r += e;
        }
        return r;
    };
    f.h2 = [=](double t) {
        SpectralField r(n);
        if (zeta) {
            const SpectralField z = zeta(t / d);
            if (z.n()) r.axpy(1.0 / (d * d), z);
        }
        if (h2) {
            const SpectralField e = h2(t);
            if (e.n()) r += e;
        }
        return r;
    };
    const MeanFn B = limit_mean(sc, theta0_mean);
    f.mean = [U, B, d](double t) {
        const double s = t / d;
        const Vec2 y = U->ybar(s), b = B(s);
        return Vec2{y[0] / d + b[0], y[1] / d + b[1]};
    };
    for (double b : limit_breaks(sc)) f.breaks.push_back(d * b);
    return f;
}

ScaledRun run_scaled_control(const ScaledControl& sc, const BoussinesqState& s0, const Physics& ph,
                             const SolverConfig& cfg, const FieldFn& h1, const FieldFn& h2, const StateObserver& obs) {
    const int n = s0.w.n();
    ForcingProgram f = scaled_forcing(sc, ph, n, s0.theta.mean(), h1, h2);
    SolverConfig c = cfg;
    c.dt_max = std::min(cfg.dt_max, sc.delta / sc.steps_per_unit);
    BoussinesqState start = s0;
    start.t = 0.0;
    ScaledRun run;
    run.end = resolve(start, f, ph, c, sc.delta, obs, &run.stats);
    run.end_mean = f.mean(sc.delta);
    return run;
}

LimitSolution solve_limit_system(const ScaledControl& sc, const SpectralField& w0, const SpectralField& theta0, int n) {
    if (!sc.U) throw std::invalid_argument("limit system: no drift program");
    const DriftProgram& U = *sc.U;
    const MeanFn B = limit_mean(sc, theta0.mean());
    // controls jump at breaks: sample them from inside the step, as the full solver does
    auto rhs = [&](const Pair& s, double t, double ft) {
        const VectorField Ub = U.field(n, t);
        Pair r{advect(Ub, s.w), advect(Ub, s.th)};
        if (U.window(t) >= 0) r.w += advect(upsilon(zero_mean(s.w), B(t)), U.curl_field(n, t));
        r.w *= -1.0;
        r.th *= -1.0;
        r.w += d1(s.th);
        add_if(r.w, sc.curl_b, ft);
        add_if(r.th, sc.zeta, ft);
        return r;
    };
    Pair cur{w0, sc.delta * theta0};
    const auto nodes = step_nodes(0.0, 1.0, 1.0 / sc.steps_per_unit, limit_breaks(sc));
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double t = nodes[i], h = nodes[i + 1] - nodes[i];
        const double in = 1e-9 * h;
        const Pair k1 = rhs(cur, t, t + in);
        Pair b{cur.w, cur.th};
        b.w.axpy(0.5 * h, k1.w);
        b.th.axpy(0.5 * h, k1.th);
        const Pair k2 = rhs(b, t + 0.5 * h, t + 0.5 * h);
        Pair c{cur.w, cur.th};
        c.w.axpy(-h, k1.w);
        c.th.axpy(-h, k1.th);
        c.w.axpy(2.0 * h, k2.w);
        c.th.axpy(2.0 * h, k2.th);
        const Pair k3 = rhs(c, t + h, t + h - in);
        cur.w.axpy(h / 6.0, k1.w);
        cur.w.axpy(2.0 * h / 3.0, k2.w);
        cur.w.axpy(h / 6.0, k3.w);
        cur.th.axpy(h / 6.0, k1.th);
        cur.th.axpy(2.0 * h / 3.0, k2.th);
        cur.th.axpy(h / 6.0, k3.th);
        if (!cur.w.all_finite() || !cur.th.all_finite()) throw IntegrationError("limit system: non-finite state");
    }
    return LimitSolution{cur.w, cur.th, B(1.0)};
}

double limit_gap(const BoussinesqState& end, const LimitSolution& lim, double delta, int m) {
    return sobolev_norm(end.w - lim.v, m - 1) + sobolev_norm(end.theta - (1.0 / delta) * lim.vartheta, m);
}

// ---------------------------------------------------------------------------

Diagnostics diagnose(const BoussinesqState& s, const Vec2& mean) {
    Diagnostics d;
    d.t = s.t;
    const VectorField u = velocity(s, mean);
    const double e = sobolev_norm(u, 0);
    d.energy = 0.5 * e * e;
    const double z = sobolev_norm(s.w, 0);
    d.enstrophy = 0.5 * z * z;
    d.theta_l2 = sobolev_norm(s.theta, 0);
    d.w_mean = s.w.mean();
    d.theta_mean = s.theta.mean();
    d.max_speed = max_speed(u);
    return d;
}

void write_diagnostics_csv(const std::string& path, const std::vector<Diagnostics>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path);
    os << "t,energy,enstrophy,theta_l2,w_mean,theta_mean,max_speed\n" << std::setprecision(12);
    for (const auto& r : rows)
        os << r.t << ',' << r.energy << ',' << r.enstrophy << ',' << r.theta_l2 << ',' << r.w_mean << ','
           << r.theta_mean << ',' << r.max_speed << '\n';
}

void write_checkpoint(const std::string& path, const BoussinesqState& s) { write_tbfld(path, {s.w, s.theta}); }

BoussinesqState read_checkpoint(const std::string& path, double t) {
    auto c = read_tbfld(path);
    if (c.size() != 2) throw std::runtime_error("checkpoint " + path + " does not hold (w, theta)");
    return BoussinesqState{t, c[0], c[1]};
}

} // namespace tbf
