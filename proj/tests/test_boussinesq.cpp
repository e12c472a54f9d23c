#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "tbflow/boussinesq.hpp"

using namespace tbf;

namespace {

SpectralField sample(int n, const std::function<double(double, double)>& f) { return SpectralField::sample(n, f); }

double rel(const SpectralField& a, const SpectralField& b) { return sobolev_norm(a - b, 0) / sobolev_norm(b, 0); }

SpectralField random_field(int n, int band, std::uint64_t seed, double amp) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    SpectralField f(n);
    for (int k1 = -band; k1 <= band; ++k1)
        for (int k2 = 0; k2 <= band; ++k2) {
            if (k2 == 0 && k1 <= 0) continue;
            const double d = 1.0 + k1 * k1 + k2 * k2;
            f.set_coef(k1, k2, {amp * g(rng) / d, amp * g(rng) / d});
        }
    return f;
}

SolverConfig small(int n, double dt = 1e-3) {
    SolverConfig c;
    c.n = n;
    c.dt_max = dt;
    return c;
}

} // namespace

TEST_CASE("single shear mode decays exactly") {
    const int n = 32;
    const Physics ph{0.1, 0.05};
    BoussinesqState s0{0.0, sample(n, [](double x, double) { return std::sin(x); }), SpectralField(n)};
    const BoussinesqState s1 = resolve(s0, {}, ph, small(n), 1.0);
    CHECK(s1.t == doctest::Approx(1.0));
    CHECK(rel(s1.w, std::exp(-0.1) * s0.w) <= 1e-6);
    CHECK(sobolev_norm(s1.theta, 0) == 0.0);
}

TEST_CASE("temperature mode drives the vorticity in closed form") {
    const int n = 32;
    const double nu = 0.1, tau = 0.05, t = 1.0;
    const Physics ph{nu, tau};
    BoussinesqState s0{0.0, SpectralField(n), sample(n, [](double x, double) { return std::sin(x); })};
    const BoussinesqState s1 = resolve(s0, {}, ph, small(n), t);
    const double a = (std::exp(-tau * t) - std::exp(-nu * t)) / (nu - tau);
    CHECK(rel(s1.theta, std::exp(-tau * t) * s0.theta) <= 1e-6);
    CHECK(rel(s1.w, sample(n, [a](double x, double) { return a * std::cos(x); })) <= 1e-6);
}

TEST_CASE("forcing that jumps at a break is integrated from the correct side") {
    const int n = 16;
    const double nu = 0.1, tb = 0.35;
    const SpectralField s = sample(n, [](double x, double) { return std::sin(x); });
    ForcingProgram f;
    f.h1 = [&](double t) { return (t < tb ? 1.0 : -2.0) * s; };
    f.breaks = {tb};
    const BoussinesqState e = resolve({0.0, SpectralField(n), SpectralField(n)}, f, Physics{nu, 0.05}, small(n, 0.05), 1.0);
    // int_0^1 c(r) exp(-nu (1 - r)) dr
    const double a = (std::exp(-nu * (1 - tb)) - std::exp(-nu)) / nu - 2.0 * (1.0 - std::exp(-nu * (1 - tb))) / nu;
    CHECK(rel(e.w, a * s) <= 1e-6);
}

TEST_CASE("zero data, zero forcing stays zero") {
    const int n = 16;
    const BoussinesqState s1 = resolve({0.0, SpectralField(n), SpectralField(n)}, {}, Physics{}, small(n), 0.5);
    CHECK(sobolev_norm(s1.w, 0) == 0.0);
    CHECK(sobolev_norm(s1.theta, 0) == 0.0);
}

TEST_CASE("invalid input is rejected") {
    const int n = 16;
    const SpectralField z(n);
    CHECK_THROWS_AS(resolve({0.0, constant_field(n, 1.0), z}, {}, Physics{}, small(n), 0.1), std::domain_error);
    CHECK_THROWS_AS(resolve({0.0, z, SpectralField(32)}, {}, Physics{}, small(n), 0.1), std::invalid_argument);
    CHECK_THROWS_AS(resolve({0.0, z, z}, {}, Physics{-0.1, 0.0}, small(n), 0.1), std::invalid_argument);
}

TEST_CASE("non-finite data raises an instability error carrying the last state") {
    const int n = 16;
    SpectralField w = sample(n, [](double x, double) { return std::sin(x); });
    w.set_coef(2, 1, {std::nan(""), 0.0});
    try {
        resolve({0.0, w, SpectralField(n)}, {}, Physics{}, small(n), 0.1);
        FAIL("expected an instability error");
    } catch (const InstabilityError& e) {
        CHECK(e.last.w.n() == n);
    }
}

TEST_CASE("property: temperature mean is conserved with a mean-free heat source") {
    const int n = 32;
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SpectralField th = random_field(n, 6, seed, 1.0);
        th.at(0, 0) = 0.37;
        const SpectralField w = random_field(n, 6, seed + 10, 1.0);
        ForcingProgram f;
        const SpectralField h2 = sample(n, [](double x, double y) { return std::cos(x - y); });
        f.h2 = [h2](double t) { return std::cos(3 * t) * h2; };
        f.mean = [](double t) { return Vec2{0.5 * t, -0.2}; };
        double worst = 0.0;
        resolve({0.0, w, th}, f, Physics{0.02, 0.01}, small(n), 0.5,
                [&](const BoussinesqState& s) { worst = std::max(worst, std::abs(s.theta.mean() - 0.37)); });
        CHECK(worst <= 1e-10);
    }
}

TEST_CASE("property: vorticity norm is nonincreasing without forcing or buoyancy") {
    const int n = 32;
    for (std::uint64_t seed : {4u, 5u}) {
        const SpectralField w = random_field(n, 8, seed, 2.0);
        double prev = sobolev_norm(w, 0);
        bool ok = true;
        resolve({0.0, w, SpectralField(n)}, {}, Physics{0.01, 0.01}, small(n), 0.5, [&](const BoussinesqState& s) {
            const double e = sobolev_norm(s.w, 0);
            if (e > prev * (1.0 + 1e-13)) ok = false;
            prev = e;
        });
        CHECK(ok);
    }
}

TEST_CASE("reconstructed velocity carries the prescribed mean") {
    const int n = 16;
    BoussinesqState s{0.0, sample(n, [](double x, double y) { return std::sin(x + y); }), SpectralField(n)};
    const VectorField u = velocity(s, {0.25, -1.5});
    CHECK(u.mean()[0] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(u.mean()[1] == doctest::Approx(-1.5).epsilon(1e-15));
    CHECK(sobolev_norm(curl(u) - s.w, 0) < 1e-13);
}

TEST_CASE("mean trajectory of the scaled run") {
    ScaledControl sc;
    sc.delta = 0.1;
    sc.A = {0.3, -0.4};
    // no controls: B stays at A plus the buoyancy drift of the temperature mean
    const MeanFn B = limit_mean(sc, 0.0);
    CHECK(B(0.0)[0] == 0.3);
    CHECK(B(1.0)[0] == doctest::Approx(0.3).epsilon(1e-15));
    CHECK(B(1.0)[1] == doctest::Approx(-0.4).epsilon(1e-15));
    // int vartheta = delta * int theta0 = const: e2 component grows by int theta0 per unit time
    const MeanFn B2 = limit_mean(sc, 0.5);
    CHECK(B2(1.0)[1] == doctest::Approx(-0.4 + 0.5).epsilon(1e-12));
    // a constant heat rate r gives int vartheta = r s and e2 gain r / (2 delta)
    sc.zeta_mean = [](double) { return 0.02; };
    const MeanFn B3 = limit_mean(sc, 0.0);
    CHECK(B3(1.0)[1] == doctest::Approx(-0.4 + 0.02 / (2 * 0.1)).epsilon(1e-10));
}

TEST_CASE("diagnostics") {
    const int n = 16;
    BoussinesqState s{0.0, sample(n, [](double x, double) { return std::sin(x); }),
                      sample(n, [](double, double y) { return 0.2 + std::cos(y); })};
    const Diagnostics d = diagnose(s, {0.0, 0.0});
    // u = (0, -cos x1): 1/2 mean |u|^2 = 1/4, 1/2 mean w^2 = 1/4
    CHECK(d.energy == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(d.enstrophy == doctest::Approx(0.25).epsilon(1e-13));
    CHECK(d.theta_mean == doctest::Approx(0.2).epsilon(1e-13));
    CHECK(d.max_speed == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("checkpoints round trip") {
    const int n = 16;
    BoussinesqState s{0.0, sample(n, [](double x, double y) { return std::sin(x - y); }),
                      sample(n, [](double, double y) { return std::cos(2 * y); })};
    const std::string path = "test_boussinesq_checkpoint.tbfld";
    write_checkpoint(path, s);
    const BoussinesqState r = read_checkpoint(path, 0.7);
    CHECK(r.t == 0.7);
    CHECK(sobolev_norm(r.w - s.w, 0) < 1e-15);
    CHECK(sobolev_norm(r.theta - s.theta, 0) < 1e-15);
    std::remove(path.c_str());
}
