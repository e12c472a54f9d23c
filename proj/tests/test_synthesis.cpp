#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "tbflow/synthesis.hpp"

using namespace tbf;

namespace {

struct World {
    ControlRegion omega;
    Covering cov;
    Cutoffs cut;
    TimeGrid tg;
    SignalFamily sig;
    GeneratingDrift gen;
    std::unique_ptr<DriftProgram> U;
    AverageProfiles av;

    World() {
        cov = build_covering(3.5, omega);
        cut = Cutoffs(cov, omega, CutoffParams{});
        tg = time_grid(cov.M);
        sig = random_signal_family(tg.Tstar, 7);
        gen = GeneratingDrift(sig, pick_kappa(sig, cut));
        U = std::make_unique<DriftProgram>(cut, tg, gen);
        av = AverageProfiles(omega);
    }
};

const World& world() {
    static const World w;
    return w;
}

SynthesisProblem small_problem(const GeneratingDrift& g, const SpectralField& v0, const SpectralField& v1) {
    SynthesisProblem p;
    p.drift = g;
    p.v0 = v0;
    p.v1 = v1;
    p.nt = 8;
    p.n_obs = 8;
    p.steps_per_period = 256;
    return p;
}

SpectralField mode(int n, double a, double b, bool sine) {
    return SpectralField::sample(n, [=](double x, double y) { return sine ? std::sin(a * x + b * y) : std::cos(a * x + b * y); });
}

std::vector<Vec2> random_points(int k, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, kTwoPi);
    std::vector<Vec2> p(k);
    for (auto& x : p) x = {U(rng), U(rng)};
    return p;
}

GStar test_gstar(double T, int nt, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> N;
    GStar g;
    g.tstar = T;
    g.nt = nt;
    g.c.resize(nt);
    for (auto& c : g.c)
        for (auto& v : c) v = N(rng);
    return g;
}

} // namespace

TEST_CASE("drift-free synthesis of sin x1 is a constant control") {
    const World& w = world();
    const int n = 32;
    const GeneratingDrift still(w.sig, 0.0);
    const SpectralField v1 = mode(n, 1, 0, true);
    const GStar g = synthesize_gstar(small_problem(still, SpectralField(n), v1));
    CHECK(g.residual <= 1e-10 * g.target_norm);
    // int over [T*/2, T*] of c equals 1, spread evenly by the minimum-norm solve
    for (const Coeff4& c : g.c) {
        CHECK(c[0] == doctest::Approx(2.0 / w.tg.Tstar).epsilon(1e-8));
        for (int k = 1; k < 4; ++k) CHECK(std::abs(c[k]) < 1e-8 * g.max_coefficient);
    }
    // zero on the first half
    CHECK(g.interval_at(0.25 * w.tg.Tstar) == -1);
    CHECK(g.value({1.0, 1.0}, 0.25 * w.tg.Tstar) == 0.0);
}

TEST_CASE("v1 = v0: free streaming returns v0 and the control vanishes") {
    const World& w = world();
    const int n = 32;
    const SpectralField v0 = mode(n, 1, 1, true) + 0.5 * mode(n, 2, -1, false);
    const SynthesisOperator op = build_synthesis_operator(small_problem(w.gen, v0, v0));
    CHECK(sobolev_norm(op.free_final - v0, 1) <= 1e-8 * sobolev_norm(v0, 1));
    const GStar g = solve_synthesis(op, op.problem.v1 - op.free_final);
    CHECK(g.residual <= 1e-8);
    CHECK(sobolev_norm(predicted_final(op, g) - v0, 1) <= 1e-8 * sobolev_norm(v0, 1));
}

TEST_CASE("property: synthesis is linear in the target defect") {
    const World& w = world();
    const int n = 32;
    const SynthesisOperator op = build_synthesis_operator(small_problem(w.gen, SpectralField(n), SpectralField(n)));
    const SpectralField t = mode(n, 1, 1, true);
    const GStar a = solve_synthesis(op, t);
    const GStar b = solve_synthesis(op, -2.5 * t);
    for (int q = 0; q < a.nt; ++q)
        for (int k = 0; k < 4; ++k)
            CHECK(b.c[q][k] == doctest::Approx(-2.5 * a.c[q][k]).epsilon(1e-9).scale(a.max_coefficient));
    // the discrete map predicts the least-squares final state
    const SpectralField pred = predicted_final(op, a);
    CHECK(sobolev_norm(pred - t, 1) <= 0.1 * sobolev_norm(t, 1));
}

TEST_CASE("column assembly: OpenMP and serial paths agree; characteristics agree with spectral") {
    const World& w = world();
    const int n = 32;
    SynthesisProblem p = small_problem(w.gen, SpectralField(n), mode(n, 1, 1, true));
    p.nt = 4;
    const SynthesisOperator op = build_synthesis_operator(p);
    const auto serial = synthesis_columns_serial(p);
    REQUIRE(serial.size() == op.columns.size());
    for (std::size_t c = 0; c < serial.size(); ++c) CHECK(sobolev_norm(serial[c] - op.columns[c], 0) == 0.0);
    SynthesisProblem pc = p;
    pc.method = ColumnMethod::Characteristics;
    const auto chars = synthesis_columns_serial(pc);
    for (std::size_t c = 0; c < serial.size(); ++c)
        CHECK(sobolev_norm(chars[c] - serial[c], 0) <= 1e-3 * sobolev_norm(serial[c], 0));
}

TEST_CASE("invalid problems are rejected") {
    const World& w = world();
    SynthesisProblem p = small_problem(w.gen, SpectralField(32), SpectralField(32));
    p.nt = 0;
    CHECK_THROWS_AS(synthesize_gstar(p), SynthesisError);
    p.nt = 4;
    p.v1 = SpectralField(16);
    CHECK_THROWS_AS(synthesize_gstar(p), SynthesisError);
    p.v1 = SpectralField(32);
    p.n_obs = 20;
    CHECK_THROWS_AS(synthesize_gstar(p), SynthesisError);
}

TEST_CASE("patched control lives on supp(mu) during the windows") {
    const World& w = world();
    const GStar g = test_gstar(w.tg.Tstar, 8, 1);
    const TemperatureControl G = patch_control(*w.U, g);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const Vec2& x : random_points(400, 3)) {
        const double t = U(rng);
        const double v = G.patched(x, t);
        if (w.U->window(t) < 0 || w.cut.mu(x) == 0.0) CHECK(v == 0.0);
    }
    // inside window i it is mu(x) g*(x - S_i, t - ta_i)
    const int i = 2;
    const double s = 0.7 * w.tg.Tstar;
    const Vec2 x{w.cov.ref_corner[0] + 1.5, w.cov.ref_corner[1] + 1.2};
    const Vec2 xs{x[0] - w.cov.shifts[i][0], x[1] - w.cov.shifts[i][1]};
    CHECK(G.patched(x, w.tg.ta[i] + s) == doctest::Approx(w.cut.mu(x) * g.value(xs, s)).epsilon(1e-12));
}

TEST_CASE("zero-mean correction: formula and vanishing mean") {
    const World& w = world();
    const GStar g = test_gstar(w.tg.Tstar, 8, 4);
    const double v0_mean = 0.3;
    const TemperatureControl G = zero_mean_correction(*w.U, g, v0_mean);
    const double mass = w.cut.mass();
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double h = 1e-6;
    for (const Vec2& x : random_points(200, 6)) {
        const double t = U(rng);
        // G = G~ - m'(t) mu / int mu - m(t) / int mu (U.grad) mu, with m' = int G~
        const double d1 = (w.cut.mu({x[0] + h, x[1]}) - w.cut.mu({x[0] - h, x[1]})) / (2 * h);
        const double d2 = (w.cut.mu({x[0], x[1] + h}) - w.cut.mu({x[0], x[1] - h})) / (2 * h);
        const Vec2 u = w.U->velocity(x, t);
        const double want = G.patched(x, t) - G.patched_mean(t) * w.cut.mu(x) / mass -
                            G.mass(t) / mass * (u[0] * d1 + u[1] * d2);
        CHECK(G.value(x, t) == doctest::Approx(want).epsilon(1e-6).scale(1.0 + std::abs(want)));
    }
    // mass law: m(t) = int v0 + int_0^t int G~
    CHECK(G.mass(0.0) == doctest::Approx(v0_mean));
    // grid mean of G; the cutoff ramps need N = 1024 before the grid quadrature is exact to 1e-10
    for (int k = 0; k < 100; ++k) {
        const double t = (k + 0.5) / 100.0;
        const SpectralField f = G.field(1024, t);
        double peak = 0.0;
        for (double v : f.to_grid()) peak = std::max(peak, std::abs(v));
        CHECK(std::abs(f.mean()) <= 1e-10 * std::max(1.0, peak));
    }
}

TEST_CASE("zero control: correction leaves the zero control alone") {
    const World& w = world();
    GStar g = test_gstar(w.tg.Tstar, 4, 7);
    for (auto& c : g.c) c = {0, 0, 0, 0};
    const TemperatureControl G = zero_mean_correction(*w.U, g, 0.0);
    for (const Vec2& x : random_points(50, 8)) CHECK(G.value(x, 0.41) == 0.0);
}

TEST_CASE("temperature control is a combination of the ten generators") {
    const World& w = world();
    const TemperatureControl G = zero_mean_correction(*w.U, test_gstar(w.tg.Tstar, 8, 9), 0.1);
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (const Vec2& x : random_points(200, 11)) {
        const double t = U(rng);
        const auto c = G.coefficients(t);
        const auto gen = temperature_generators(w.cut, x);
        double s = 0.0;
        for (int k = 0; k < kTemperatureGenerators; ++k) s += c[k] * gen[k];
        CHECK(s == doctest::Approx(G.value(x, t)).epsilon(1e-10).scale(1.0 + std::abs(G.value(x, t))));
    }
}

TEST_CASE("generator lists: counts, support in omega, zero means for temperature") {
    const World& w = world();
    CHECK(velocity_dimension(2) == 33);
    const int n = 128;
    const ControlBasis Ft = temperature_basis(w.cut, n);
    const ControlBasis Fv = velocity_basis(w.cut, w.av, n);
    CHECK(Ft.size() == 10);
    CHECK(Fv.size() == 34);
    CHECK(Ft.gram_min_eig > 0.0);
    CHECK(Fv.gram_min_eig > 0.0);
    CHECK(Ft.outside_ratio <= 1e-8);
    CHECK(Fv.outside_ratio <= 1e-8);
    for (const Vec2& x : random_points(2000, 12)) {
        if (w.omega.contains(x)) continue;
        for (double v : temperature_generators(w.cut, x)) CHECK(v == 0.0);
        for (const Vec2& v : velocity_generators(w.cut, w.av, x)) {
            CHECK(v[0] == 0.0);
            CHECK(v[1] == 0.0);
        }
    }
    const ControlBasis fine = temperature_basis(w.cut, 1024);
    for (const auto& f : fine.scalars) {
        double peak = 0.0;
        for (double v : f.to_grid()) peak = std::max(peak, std::abs(v));
        CHECK(std::abs(f.mean()) <= 1e-8 * peak);
    }
}

TEST_CASE("velocity force is a combination of the 34 generators") {
    const World& w = world();
    const double delta = 0.1, nu = 0.01;
    for (int i = 0; i < w.tg.M; ++i)
        for (double s : {0.15, 0.5, 0.85}) {
            const double t = w.tg.ta[i] + s * w.tg.Tstar;
            const auto c = velocity_coefficients(*w.U, t, delta, nu);
            for (const Vec2& x : random_points(50, 20 + i)) {
                const auto gen = velocity_generators(w.cut, w.av, x);
                Vec2 sum{0.0, 0.0};
                for (int k = 0; k < kVelocityGenerators; ++k) {
                    sum[0] += c[k] * gen[k][0];
                    sum[1] += c[k] * gen[k][1];
                }
                const Vec2 xi = velocity_force(*w.U, w.av, x, t, delta, nu);
                const double scale = 1.0 + std::hypot(xi[0], xi[1]);
                CHECK(std::abs(sum[0] - xi[0]) <= 1e-8 * scale);
                CHECK(std::abs(sum[1] - xi[1]) <= 1e-8 * scale);
            }
        }
}

TEST_CASE("average profiles: unit means, curl free, supported in omega") {
    const World& w = world();
    // the profile depends on one coordinate: its mean is a 1D periodic trapezoid sum
    const int m = 20000;
    double acc = 0.0;
    for (int k = 0; k < m; ++k) acc += w.av.profile(kTwoPi * k / m).value();
    CHECK(acc / m == doctest::Approx(1.0).epsilon(1e-10));
    const VectorField L = w.av.lambda_field(2048), S = w.av.sigma_field(2048);
    CHECK(L.mean()[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(std::abs(L.mean()[1]) <= 1e-10);
    CHECK(std::abs(S.mean()[0]) <= 1e-10);
    CHECK(S.mean()[1] == doctest::Approx(1.0).epsilon(1e-10));
    // Lambda depends on x1 only, Sigma on x2 only: both curls vanish identically
    for (const Vec2& x : random_points(200, 30)) {
        CHECK(w.av.lambda(x)[0] == w.av.lambda({x[0], x[1] + 1.234})[0]);
        CHECK(w.av.sigma(x)[1] == w.av.sigma({x[0] + 0.77, x[1]})[1]);
        CHECK(w.av.lambda(x)[1] == 0.0);
        CHECK(w.av.sigma(x)[0] == 0.0);
        if (!w.omega.contains(x)) {
            CHECK(w.av.lambda(x)[0] == 0.0);
            CHECK(w.av.sigma(x)[1] == 0.0);
        }
    }
    ControlRegion no_strips;
    no_strips.strips = false;
    CHECK_THROWS_AS(AverageProfiles{no_strips}, GeometryError);
}

TEST_CASE("temperature average add-on: zero when tau0 = tau1, exact end mean") {
    const World& w = world();
    const AverageTemperatureControl same = temperature_average_control(0.4, 0.4);
    for (const Vec2& x : random_points(20, 40)) CHECK(same.value(w.cut, x, 0.5) == 0.0);
    const AverageTemperatureControl z = temperature_average_control(0.2, -0.7);
    CHECK(z.mean(1.0) == doctest::Approx(-0.7).epsilon(1e-12));
    CHECK(z.mean(0.0) == doctest::Approx(0.2).epsilon(1e-12));
    // mean ODE by Simpson quadrature of the rate
    const int m = 4000;
    double s = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double wk = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += wk * z.rate(0.6 * k / m);
    }
    CHECK(0.2 + s * 0.6 / m / 3 == doctest::Approx(z.mean(0.6)).epsilon(1e-9));
    // spatial integral of the add-on is the rate
    const SpectralField f = SpectralField::sample(256, [&](double a, double b) { return z.value(w.cut, {a, b}, 0.5); });
    CHECK(f.mean() == doctest::Approx(z.rate(0.5)).epsilon(1e-8));
}

TEST_CASE("unit bump: unit mass, cdf ends") {
    CHECK(unit_bump_cdf(0.0) == 0.0);
    CHECK(unit_bump_cdf(1.0) == 1.0);
    CHECK(unit_bump(0.0) == 0.0);
    CHECK(unit_bump(1.0) == 0.0);
    const int m = 2000;
    double s = 0.0;
    for (int k = 0; k <= m; ++k) {
        const double wk = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
        s += wk * unit_bump(static_cast<double>(k) / m);
    }
    CHECK(s / m / 3 == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("average steering schedule: zero data, constraint residuals") {
    const SteeringSchedule zero = average_steering_schedule({0, 0}, {0, 0}, 0.0, 0.0);
    for (double v : {zero.l01, zero.l02, zero.l11, zero.l12, zero.r0, zero.r1}) CHECK(v == 0.0);
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    for (int k = 0; k < 10; ++k) {
        const Vec2 A0{U(rng), U(rng)}, A1{U(rng), U(rng)};
        const double t0 = U(rng), t1 = U(rng);
        const SteeringSchedule s = average_steering_schedule(A0, A1, t0, t1);
        for (double r : steering_residuals(s, A0, A1, t0, t1)) CHECK(std::abs(r) <= 1e-10);
    }
}
