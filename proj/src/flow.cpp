#include "tbflow/flow.hpp"

#include <algorithm>
#include <cmath>

namespace tbf {

namespace {
// piece ends from s to t through the breaks in between; breaks closer than
// round-off (block ends that are also window ends) are merged
std::vector<double> piece_cuts(double s, double t, const std::vector<double>& breaks) {
    const double lo = std::min(s, t), hi = std::max(s, t);
    const double merge = 1e-13 * std::max(1.0, hi - lo);
    std::vector<double> inner;
    for (double b : breaks)
        if (b > lo + merge && b < hi - merge) inner.push_back(b);
    std::sort(inner.begin(), inner.end());
    std::vector<double> cuts{lo};
    for (double b : inner)
        if (b - cuts.back() > merge) cuts.push_back(b);
    cuts.push_back(hi);
    if (t < s) std::reverse(cuts.begin(), cuts.end());
    return cuts;
}
} // namespace

std::vector<double> step_nodes(double s, double t, double dt, const std::vector<double>& breaks) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw IntegrationError("step size must be positive and finite");
    std::vector<double> nodes{s};
    if (s == t) return nodes;
    const double lo = std::min(s, t), hi = std::max(s, t);
    const std::vector<double> cuts = piece_cuts(s, t, breaks);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        const double a = cuts[k], b = cuts[k + 1];
        const double count = std::max(1.0, std::ceil(std::abs(b - a) / dt - 1e-9));
        // steps below round-off of the time values, or too many to count
        if (count > 1.0 && (count > 1e9 || std::abs(b - a) / count < 1e-15 * std::max({1.0, std::abs(lo), std::abs(hi)})))
            throw IntegrationError("step size underflow");
        const int n = static_cast<int>(count);
        for (int i = 1; i < n; ++i) nodes.push_back(a + (b - a) * i / n);
        nodes.push_back(b);
    }
    return nodes;
}

namespace {
inline Vec2 axpy(const Vec2& x, double h, const Vec2& k) { return {x[0] + h * k[0], x[1] + h * k[1]}; }

inline Vec2 rk4_step(const VelocityFn& v, const Vec2& y, double t, double h, Vec2& k1) {
    k1 = v(y, t);
    const Vec2 k2 = v(axpy(y, 0.5 * h, k1), t + 0.5 * h);
    const Vec2 k3 = v(axpy(y, 0.5 * h, k2), t + 0.5 * h);
    const Vec2 k4 = v(axpy(y, h, k3), t + h);
    return {y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])};
}

Vec2 run_nodes(const VelocityFn& v, Vec2 y, const std::vector<double>& nodes) {
    Vec2 k1;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) y = rk4_step(v, y, nodes[i], nodes[i + 1] - nodes[i], k1);
    return y;
}

std::vector<Vec2> trajectory(const VelocityFn& v, const Vec2& x, double s, const std::vector<double>& times, double dt,
                             const std::vector<double>& breaks) {
    std::vector<Vec2> out;
    Vec2 y = x;
    double cur = s;
    for (double t : times) {
        y = run_nodes(v, y, step_nodes(cur, t, dt, breaks));
        cur = t;
        out.push_back(y);
    }
    return out;
}

FlowEnsemble make_ensemble(const std::vector<Vec2>& seeds, double s, const std::vector<double>& times) {
    FlowEnsemble e;
    e.seeds = seeds;
    e.start = s;
    e.times = times;
    e.positions.assign(times.size(), std::vector<Vec2>(seeds.size()));
    return e;
}
} // namespace

Vec2 integrate_flow(const VelocityFn& v, const Vec2& x, double s, double t, double dt,
                    const std::vector<double>& breaks) {
    return run_nodes(v, x, step_nodes(s, t, dt, breaks));
}

FlowEnsemble flow_ensemble(const VelocityFn& v, const std::vector<Vec2>& seeds, double s,
                           const std::vector<double>& times, double dt, const std::vector<double>& breaks) {
    FlowEnsemble e = make_ensemble(seeds, s, times);
    const long ns = static_cast<long>(seeds.size());
#pragma omp parallel for schedule(dynamic, 8)
    for (long j = 0; j < ns; ++j) {
        auto tr = trajectory(v, seeds[j], s, times, dt, breaks);
        for (std::size_t k = 0; k < times.size(); ++k) e.positions[k][j] = tr[k];
    }
    return e;
}

FlowEnsemble flow_ensemble_serial(const VelocityFn& v, const std::vector<Vec2>& seeds, double s,
                                  const std::vector<double>& times, double dt, const std::vector<double>& breaks) {
    FlowEnsemble e = make_ensemble(seeds, s, times);
    for (std::size_t j = 0; j < seeds.size(); ++j) {
        auto tr = trajectory(v, seeds[j], s, times, dt, breaks);
        for (std::size_t k = 0; k < times.size(); ++k) e.positions[k][j] = tr[k];
    }
    return e;
}

namespace {
double characteristic_value(const VelocityFn& v, const ScalarFn& v0, const ScalarFn& g,
                            const std::vector<double>& nodes, const Vec2& x) {
    Vec2 y = x;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
        const double a = nodes[i], b = nodes[i + 1], h = b - a;
        const double eps = 1e-9 * std::abs(h);
        Vec2 f0;
        const Vec2 y1 = rk4_step(v, y, a, h, f0);
        if (g) {
            const Vec2 f1 = v(y1, b);
            const Vec2 ym{0.5 * (y[0] + y1[0]) + h / 8.0 * (f0[0] - f1[0]), 0.5 * (y[1] + y1[1]) + h / 8.0 * (f0[1] - f1[1])};
            const double ga = g(y, a + (h > 0 ? eps : -eps));
            const double gm = g(ym, a + 0.5 * h);
            const double gb = g(y1, b - (h > 0 ? eps : -eps));
            // integrating backward in time: the Duhamel integral runs forward
            acc -= h / 6.0 * (ga + 4.0 * gm + gb);
        }
        y = y1;
    }
    return v0(y, nodes.back()) + acc;
}
} // namespace

std::vector<double> transport_characteristics(const VelocityFn& v, const ScalarFn& v0, const ScalarFn& g, double t0,
                                              double t1, const std::vector<Vec2>& probes, double dt,
                                              const std::vector<double>& breaks, bool parallel) {
    const std::vector<double> nodes = step_nodes(t1, t0, dt, breaks);
    std::vector<double> out(probes.size());
    const long np = static_cast<long>(probes.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (long j = 0; j < np; ++j) out[j] = characteristic_value(v, v0, g, nodes, probes[j]);
    } else {
        for (long j = 0; j < np; ++j) out[j] = characteristic_value(v, v0, g, nodes, probes[j]);
    }
    return out;
}

std::vector<Vec2> grid_points(int n) {
    std::vector<Vec2> p;
    p.reserve(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) p.push_back({kTwoPi * i / n, kTwoPi * j / n});
    return p;
}

// ---------------------------------------------------------------------------

SpectralDrift spectral_drift(const DriftProgram& U, int n) {
    SpectralDrift d;
    d.velocity = [&U, n](double t) { return U.field(n, t); };
    d.vorticity = [&U, n](double t) { return U.curl_field(n, t); };
    d.breaks = U.breakpoints();
    return d;
}

SpectralDrift spectral_drift(const GeneratingDrift& g, int n) {
    SpectralDrift d;
    d.velocity = [g, n](double t) { return g.field(n, t); };
    d.vorticity = [g, n](double t) { return curl(g.field(n, t)); };
    d.breaks = {0.0, 0.5 * g.tstar(), g.tstar()};
    return d;
}

SpectralDrift constant_drift(const Vec2& c, int n) {
    SpectralDrift d;
    d.velocity = [c, n](double) { return VectorField(constant_field(n, c[0]), constant_field(n, c[1]), true); };
    d.vorticity = [n](double) { return SpectralField(n); };
    return d;
}

namespace {
double max_speed(const VectorField& u) {
    const auto g1 = u.c1.to_grid(), g2 = u.c2.to_grid();
    double m = 0.0;
    for (std::size_t i = 0; i < g1.size(); ++i) m = std::max(m, std::hypot(g1[i], g2[i]));
    return m;
}

void exp_filter(SpectralField& f) {
    const int n = f.n();
    const double kmax = n / 2.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < f.cols(); ++c) {
            const double k = std::hypot(f.k1(r), f.k2(c)) / kmax;
            f.at(r, c) *= std::exp(-36.0 * std::pow(std::min(k, 1.5), 36));
        }
}

using Rhs = std::function<SpectralField(const SpectralField&, double)>;

SpectralField rk4_fields(const SpectralDrift& drift, SpectralField v, const Rhs& rhs, double t0, double t1,
                         const SpectralTransportOptions& opt, const TransportObserver& obs) {
    const int n = v.n();
    const double h_grid = kTwoPi / n;
    if (obs) obs(t0, v);
    if (t1 == t0) return v;
    // per piece: pick dt from the CFL limit at the piece ends and middle
    const std::vector<double> cuts = piece_cuts(t0, t1, drift.breaks);
    for (std::size_t p = 0; p + 1 < cuts.size(); ++p) {
        const double a = cuts[p], b = cuts[p + 1];
        double umax = 0.0;
        for (double s : {a, 0.5 * (a + b), b}) umax = std::max(umax, max_speed(drift.velocity(s)));
        double dt = opt.dt_max;
        while (umax > 0.0 && dt * umax > opt.cfl * h_grid) {
            dt *= 0.5;
            if (dt < opt.dt_min) throw IntegrationError("transport: CFL step fell below dt_min");
        }
        const auto nodes = step_nodes(a, b, dt, {});
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            const double t = nodes[i], h = nodes[i + 1] - nodes[i];
            // the forcing may jump at a piece end: take the one-sided value from inside the step
            const double in = 1e-9 * h;
            const SpectralField k1 = rhs(v, t + in);
            const SpectralField k2 = rhs(v + (0.5 * h) * k1, t + 0.5 * h);
            const SpectralField k3 = rhs(v + (0.5 * h) * k2, t + 0.5 * h);
            const SpectralField k4 = rhs(v + h * k3, t + h - in);
            v.axpy(h / 6.0, k1);
            v.axpy(h / 3.0, k2);
            v.axpy(h / 3.0, k3);
            v.axpy(h / 6.0, k4);
            if (opt.filter) exp_filter(v);
            if (!v.all_finite()) throw IntegrationError("transport: non-finite state");
            if (obs) obs(nodes[i + 1], v);
        }
    }
    return v;
}
} // namespace

SpectralField transport_spectral(const SpectralDrift& drift, SpectralField v0, const FieldFn& g, double t0, double t1,
                                 const SpectralTransportOptions& opt, const TransportObserver& obs) {
    Rhs rhs = [&](const SpectralField& v, double t) {
        SpectralField r = advect(drift.velocity(t), v);
        r *= -1.0;
        if (g) {
            SpectralField f = g(t);
            if (f.n() != 0) r += f;
        }
        return r;
    };
    return rk4_fields(drift, std::move(v0), rhs, t0, t1, opt, obs);
}

SpectralField convect_stretching(const SpectralDrift& drift, SpectralField v0, const std::function<Vec2(double)>& B,
                                 const FieldFn& f, double t0, double t1, const SpectralTransportOptions& opt,
                                 const TransportObserver& obs) {
    Rhs rhs = [&](const SpectralField& v, double t) {
        SpectralField r = advect(drift.velocity(t), v);
        SpectralField z = v;
        z.at(0, 0) = 0.0; // mean is conserved; drop round-off before inverting
        const Vec2 mean = B ? B(t) : Vec2{0.0, 0.0};
        r += advect(upsilon(z, mean), drift.vorticity(t));
        r *= -1.0;
        if (f) {
            SpectralField h = f(t);
            if (h.n() != 0) r += h;
        }
        return r;
    };
    return rk4_fields(drift, std::move(v0), rhs, t0, t1, opt, obs);
}

} // namespace tbf
