// Serial reference vs OpenMP timings of the parallel kernels.

#include <chrono>
#include <cmath>
#include <iomanip>
#include <iostream>

#include <omp.h>

#include "tbflow/experiments.hpp"

using namespace tbf;

namespace {
template <class F>
double timed(F f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void row(const char* name, double serial, double parallel, double diff) {
    std::cout << std::left << std::setw(28) << name << std::right << std::setw(10) << std::fixed
              << std::setprecision(3) << serial << std::setw(10) << parallel << std::setw(9) << std::setprecision(2)
              << serial / parallel << "x" << std::setw(12) << std::scientific << std::setprecision(1) << diff
              << std::defaultfloat << '\n';
}
} // namespace

int main() {
    const ExperimentConfig cfg = ExperimentConfig::defaults();
    const auto s = make_setup(cfg);
    std::cout << "threads: " << omp_get_max_threads() << '\n';
    std::cout << std::left << std::setw(28) << "kernel" << std::right << std::setw(10) << "serial" << std::setw(10)
              << "openmp" << std::setw(10) << "speedup" << std::setw(12) << "max diff" << '\n';

    {
        const VelocityFn v = [&](const Vec2& x, double t) { return s->U->velocity(x, t); };
        const auto seeds = grid_points(16);
        const std::vector<double> times{0.25, 0.5, 1.0};
        const double dt = s->tg.Tstar / 256;
        FlowEnsemble a, b;
        const double ts = timed([&] { a = flow_ensemble_serial(v, seeds, 0.0, times, dt, s->U->breakpoints()); });
        const double tp = timed([&] { b = flow_ensemble(v, seeds, 0.0, times, dt, s->U->breakpoints()); });
        double diff = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k)
            for (std::size_t i = 0; i < seeds.size(); ++i)
                diff = std::max(diff, torus_distance(a.positions[k][i], b.positions[k][i]));
        row("flow_ensemble", ts, tp, diff);
    }
    {
        const VelocityFn v = [&](const Vec2& x, double t) { return s->gen.velocity(x, t); };
        const ScalarFn f0 = [](const Vec2& x, double) { return std::sin(x[0] + x[1]); };
        const ScalarFn g = [](const Vec2& x, double t) { return t * std::cos(x[0]); };
        const auto probes = grid_points(32);
        const double dt = s->tg.Tstar / 256;
        std::vector<double> a, b;
        const double ts = timed(
            [&] { a = transport_characteristics(v, f0, g, 0.0, s->tg.Tstar, probes, dt, {}, false); });
        const double tp =
            timed([&] { b = transport_characteristics(v, f0, g, 0.0, s->tg.Tstar, probes, dt, {}, true); });
        double diff = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a[i] - b[i]));
        row("transport_characteristics", ts, tp, diff);
    }
    {
        ExperimentConfig c = cfg;
        c.N = 32;
        const SynthesisProblem p = synthesis_problem(*s, c, SpectralField(32), SpectralField(32), 8);
        std::vector<SpectralField> a;
        SynthesisOperator op;
        const double ts = timed([&] { a = synthesis_columns_serial(p); });
        const double tp = timed([&] { op = build_synthesis_operator(p); });
        double diff = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) diff = std::max(diff, sobolev_norm(a[k] - op.columns[k], 0));
        row("synthesis_columns", ts, tp, diff);
    }
    return 0;
}
