#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <random>

#include "tbflow/spectral.hpp"

using namespace tbf;

namespace {

double max_abs_diff(const SpectralField& a, const SpectralField& b) {
    const auto ga = a.to_grid(), gb = b.to_grid();
    double m = 0.0;
    for (std::size_t i = 0; i < ga.size(); ++i) m = std::max(m, std::abs(ga[i] - gb[i]));
    return m;
}

// random band-limited zero-mean field, |k|_inf <= band
SpectralField random_field(int n, int band, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    SpectralField f(n);
    for (int k1 = -band; k1 <= band; ++k1)
        for (int k2 = 0; k2 <= band; ++k2) {
            if (k2 == 0 && k1 <= 0) continue;
            f.set_coef(k1, k2, {g(rng), g(rng)});
        }
    return f;
}

} // namespace

TEST_CASE("grid and coefficients round trip; mean is the (0,0) coefficient") {
    const int n = 32;
    auto f = SpectralField::sample(n, [](double x, double y) { return 0.7 + std::sin(x) * std::cos(3 * y); });
    CHECK(f.mean() == doctest::Approx(0.7).epsilon(1e-14));
    const auto back = SpectralField::from_grid(f.to_grid(), n);
    CHECK(max_abs_diff(f, back) < 1e-14);
    // sin x1 cos 3x2 = (sin(x1+3x2) + sin(x1-3x2))/2: coefficient of exp(i(1,3).x) is 1/(4i)
    CHECK(std::abs(f.coef(1, 3) - cplx(0.0, -0.25)) < 1e-14);
    CHECK(std::abs(f.coef(-1, -3) - cplx(0.0, 0.25)) < 1e-14);
}

TEST_CASE("first axis of the grid is x1") {
    const int n = 16;
    auto f = SpectralField::sample(n, [](double x, double) { return std::sin(x); });
    const auto g = f.to_grid();
    // index i*N + j sits at x1 = 2 pi i / N
    CHECK(g[4 * n + 0] == doctest::Approx(std::sin(kTwoPi * 4 / n)).epsilon(1e-14));
    CHECK(g[0 * n + 4] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("derivatives and Laplacian of trigonometric modes") {
    const int n = 32;
    auto f = SpectralField::sample(n, [](double x, double y) { return std::sin(2 * x + y); });
    auto d1x = SpectralField::sample(n, [](double x, double y) { return 2 * std::cos(2 * x + y); });
    auto d2x = SpectralField::sample(n, [](double x, double y) { return std::cos(2 * x + y); });
    CHECK(max_abs_diff(d1(f), d1x) < 1e-13);
    CHECK(max_abs_diff(d2(f), d2x) < 1e-13);
    // round-off in unused modes is amplified by |k|^2 <= 2 (N/2)^2
    CHECK(max_abs_diff(laplacian(f), -5.0 * f) < 1e-12);
    CHECK(max_abs_diff(inverse_laplacian(f), -0.2 * f) < 1e-14);
}

TEST_CASE("inverse Laplacian ignores the mean and inverts the Laplacian") {
    std::mt19937_64 rng(11);
    const int n = 32;
    for (int trial = 0; trial < 5; ++trial) {
        SpectralField f = random_field(n, 6, rng);
        SpectralField g = f;
        g.at(0, 0) = 3.0;
        const SpectralField phi = inverse_laplacian(g);
        CHECK(std::abs(phi.mean()) < 1e-15);
        CHECK(max_abs_diff(laplacian(phi), f) < 1e-12);
    }
}

TEST_CASE("Upsilon of sin x1 is (0, -cos x1) plus the prescribed mean") {
    const int n = 32;
    auto z = SpectralField::sample(n, [](double x, double) { return std::sin(x); });
    const VectorField u = upsilon(z, {0.3, -0.2});
    auto e1 = SpectralField::sample(n, [](double, double) { return 0.3; });
    auto e2 = SpectralField::sample(n, [](double x, double) { return -0.2 - std::cos(x); });
    CHECK(max_abs_diff(u.c1, e1) < 1e-14);
    CHECK(max_abs_diff(u.c2, e2) < 1e-14);
}

TEST_CASE("Upsilon rejects vorticity with nonzero mean") {
    auto z = constant_field(16, 0.5);
    CHECK_THROWS_AS(upsilon(z), std::domain_error);
}

TEST_CASE("property: Upsilon is divergence free, curl inverts it, mean is kept") {
    std::mt19937_64 rng(5);
    const int n = 32;
    std::uniform_real_distribution<double> U(-1, 1);
    for (int trial = 0; trial < 20; ++trial) {
        SpectralField z = random_field(n, 8, rng);
        const Vec2 A{U(rng), U(rng)};
        const VectorField u = upsilon(z, A);
        CHECK(max_abs_diff(curl(u), z) < 1e-12);
        CHECK(divergence_defect(u) < 1e-14);
        CHECK(u.mean()[0] == doctest::Approx(A[0]).epsilon(1e-14));
        CHECK(u.mean()[1] == doctest::Approx(A[1]).epsilon(1e-14));
    }
}

TEST_CASE("Sobolev norms of single modes") {
    const int n = 32;
    auto s1 = SpectralField::sample(n, [](double x, double) { return std::sin(x); });
    // |f(+-1,0)|^2 = 1/4 each: ||sin x1||_m^2 = 2^m / 2
    CHECK(sobolev_norm(s1, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-14));
    CHECK(sobolev_norm(s1, 1) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(sobolev_norm(s1, 2) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
    auto c = SpectralField::sample(n, [](double x, double y) { return std::cos(2 * x - 3 * y); });
    CHECK(sobolev_norm(c, 1) == doctest::Approx(std::sqrt(14.0 / 2.0)).epsilon(1e-14));
    CHECK_THROWS_AS(sobolev_norm(c, -1), std::invalid_argument);
}

TEST_CASE("property: Parseval, H^0 norm equals grid L2 norm") {
    std::mt19937_64 rng(17);
    for (int n : {16, 24, 32}) {
        for (int trial = 0; trial < 5; ++trial) {
            SpectralField f = random_field(n, n / 2 - 1, rng);
            f.at(0, 0) = 0.4;
            CHECK(sobolev_norm(f, 0) == doctest::Approx(l2_grid_norm(f.to_grid())).epsilon(1e-12));
        }
    }
}

TEST_CASE("advection of a band-limited pair is exact and dealiased") {
    const int n = 32;
    auto f = SpectralField::sample(n, [](double x, double y) { return std::sin(x + 2 * y); });
    VectorField u(SpectralField::sample(n, [](double, double y) { return std::cos(y); }),
                  SpectralField::sample(n, [](double x, double) { return 0.5 + std::sin(x); }), true);
    auto expect = SpectralField::sample(n, [](double x, double y) {
        return (std::cos(y) + 2 * (0.5 + std::sin(x))) * std::cos(x + 2 * y);
    });
    CHECK(max_abs_diff(advect(u, f), expect) < 1e-13);
    // modes beyond N/3 are removed
    auto hi = SpectralField::sample(n, [](double x, double) { return std::cos(12 * x); });
    CHECK(sobolev_norm(dealias(hi), 0) < 1e-14);
    auto lo = SpectralField::sample(n, [](double x, double) { return std::cos(10 * x); });
    CHECK(max_abs_diff(dealias(lo), lo) < 1e-14);
}

TEST_CASE("multiply matches the pointwise product") {
    const int n = 32;
    auto a = SpectralField::sample(n, [](double x, double y) { return std::sin(x) + std::cos(2 * y); });
    auto b = SpectralField::sample(n, [](double x, double y) { return std::cos(3 * x + y); });
    auto ab = SpectralField::sample(n, [](double x, double y) {
        return (std::sin(x) + std::cos(2 * y)) * std::cos(3 * x + y);
    });
    CHECK(max_abs_diff(multiply(a, b), ab) < 1e-13);
}

TEST_CASE("property: trigonometric interpolation reproduces band-limited fields off the grid") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> U(0, kTwoPi);
    const int n = 16;
    auto f = SpectralField::sample(n, [](double x, double y) { return std::sin(2 * x - y) + 0.3 * std::cos(x + 4 * y); });
    for (int k = 0; k < 50; ++k) {
        const double x = U(rng), y = U(rng);
        const double exact = std::sin(2 * x - y) + 0.3 * std::cos(x + 4 * y);
        CHECK(evaluate(f, x, y) == doctest::Approx(exact).epsilon(1e-12));
        const auto g = evaluate_with_gradient(f, x, y);
        CHECK(g[1] == doctest::Approx(2 * std::cos(2 * x - y) - 0.3 * std::sin(x + 4 * y)).epsilon(1e-11));
        CHECK(g[2] == doctest::Approx(-std::cos(2 * x - y) - 1.2 * std::sin(x + 4 * y)).epsilon(1e-11));
    }
}

TEST_CASE("torus helpers wrap into the fundamental domain") {
    CHECK(wrap(-0.5) == doctest::Approx(kTwoPi - 0.5));
    CHECK(wrap(kTwoPi + 1.0) == doctest::Approx(1.0));
    CHECK(wrap_centered(kPi + 0.5) == doctest::Approx(-kPi + 0.5));
    CHECK(torus_distance({0.1, 0.1}, {kTwoPi - 0.1, 0.1}) == doctest::Approx(0.2));
}

TEST_CASE("snapshot files round trip") {
    const int n = 16;
    auto a = SpectralField::sample(n, [](double x, double y) { return std::sin(x) * std::cos(y) + 0.25; });
    auto b = SpectralField::sample(n, [](double x, double) { return std::cos(5 * x); });
    const std::string path = "test_spectral_snapshot.tbfld";
    write_tbfld(path, {a, b});
    const auto back = read_tbfld(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].n() == n);
    // values are stored exactly; only the transform back to coefficients rounds
    CHECK(max_abs_diff(back[0], a) < 1e-15);
    CHECK(max_abs_diff(back[1], b) < 1e-15);
    std::remove(path.c_str());
    CHECK_THROWS(read_tbfld("does_not_exist.tbfld"));
}
