#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "tbflow/saturation.hpp"

using namespace tbf;

namespace {

double field_gap(const SpectralField& a, const SpectralField& b) { return sobolev_norm(a - b, 0); }

// what a ModeCombo claims to produce, evaluated through the exact algebra
TrigPoly combo_output(const ModeCombo& c) {
    TrigPoly out = c.q0;
    for (const TrigPoly& q : c.q) out.add(self_advection(q));
    return out;
}

SpectralField random_band(int n, int band, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    SpectralField f(n);
    for (int k1 = -band; k1 <= band; ++k1)
        for (int k2 = 0; k2 <= band; ++k2) {
            if (k2 == 0 && k1 <= 0) continue;
            f.set_coef(k1, k2, {0.1 * g(rng), 0.1 * g(rng)});
        }
    return f;
}

} // namespace

TEST_CASE("canonical half plane and E0 membership") {
    CHECK(canonical(1, 0));
    CHECK(canonical(0, 1));
    CHECK(canonical(2, -3));
    CHECK_FALSE(canonical(0, -1));
    CHECK_FALSE(canonical(-1, 4));
    CHECK_FALSE(canonical(0, 0));
    CHECK(in_e0(1, 0));
    CHECK(in_e0(3, 2));
    CHECK_FALSE(in_e0(0, 2));
    CHECK_FALSE(in_e0(1, -1));
}

TEST_CASE("canonicalize flips sine sign, keeps cosine") {
    const TrigMode s = canonicalize({-2, -1, Parity::Sin, 0.5});
    CHECK(s.n1 == 2);
    CHECK(s.n2 == 1);
    CHECK(s.coef == -0.5);
    const TrigMode c = canonicalize({0, -3, Parity::Cos, 0.7});
    CHECK(c.n1 == 0);
    CHECK(c.n2 == 3);
    CHECK(c.coef == 0.7);
}

TEST_CASE("hand product: (Upsilon(sin x1).grad) sin x2 = -cos x1 cos x2") {
    // Upsilon(sin x1) = (0, -cos x1); -cos x1 cos x2 = -(cos(x1+x2) + cos(x1-x2))/2
    const TrigPoly p = advect_pair({1, 0, Parity::Sin, 1.0}, {0, 1, Parity::Sin, 1.0});
    CHECK(p.cos_coef(1, 1) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(p.cos_coef(1, -1) == doctest::Approx(-0.5).epsilon(1e-15));
    CHECK(p.sin_coef(1, 1) == 0.0);
    CHECK(p.modes(1e-15).size() == 2);
}

TEST_CASE("single-mode self advection vanishes") {
    for (Parity par : {Parity::Sin, Parity::Cos})
        for (auto [a, b] : {std::pair{1, 0}, {2, 3}, {0, 4}, {3, -1}}) {
            CHECK(self_advection(TrigPoly({a, b, par, 1.3})).l2() < 1e-14);
        }
}

TEST_CASE("property: exact algebra matches pseudospectral advection") {
    const int n = 48; // |a| + |b| <= 10 stays under the dealias cut
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> k(-4, 4);
    std::normal_distribution<double> g;
    int checked = 0;
    while (checked < 40) {
        TrigMode a{k(rng), k(rng), rng() % 2 ? Parity::Sin : Parity::Cos, g(rng)};
        TrigMode b{k(rng), k(rng), rng() % 2 ? Parity::Sin : Parity::Cos, g(rng)};
        if (!canonical(a.n1, a.n2) || !canonical(b.n1, b.n2)) continue;
        const SpectralField fa = TrigPoly(a).to_field(n), fb = TrigPoly(b).to_field(n);
        const SpectralField direct = advect(upsilon(fa), fb);
        CHECK(field_gap(advect_pair(a, b).to_field(n), direct) <= 1e-12 * (1.0 + sobolev_norm(direct, 0)));
        const SpectralField sym = direct + advect(upsilon(fb), fa);
        CHECK(field_gap(bilinear_expand(a, b).to_field(n), sym) <= 1e-12 * (1.0 + sobolev_norm(sym, 0)));
        ++checked;
    }
}

TEST_CASE("self advection of a sum is the bilinear expansion") {
    const TrigMode a{1, 2, Parity::Sin, 0.8}, b{2, -1, Parity::Cos, -0.3};
    TrigPoly q(a);
    q.add(b);
    TrigPoly expect = advect_pair(a, a);
    expect.add(advect_pair(b, b));
    expect.add(bilinear_expand(a, b));
    TrigPoly diff = self_advection(q);
    diff.add(expect, -1.0);
    CHECK(diff.l2() < 1e-14);
}

TEST_CASE("x1 primitive") {
    TrigPoly p({2, 1, Parity::Cos, 3.0});
    p.add({1, -2, Parity::Sin, 1.0});
    const TrigPoly P = p.x1_primitive();
    // d1 sin(2x1+x2)*1.5 = 3 cos(2x1+x2); d1 -cos(x1-2x2) = sin(x1-2x2)
    CHECK(P.sin_coef(2, 1) == doctest::Approx(1.5));
    CHECK(P.cos_coef(1, -2) == doctest::Approx(-1.0));
    const int n = 32;
    CHECK(field_gap(d1(P.to_field(n)), p.to_field(n)) < 1e-13);
    CHECK_THROWS(TrigPoly({0, 1, Parity::Sin, 1.0}).x1_primitive());
}

TEST_CASE("field conversion round trip and normalized L2") {
    TrigPoly p({1, 1, Parity::Sin, 2.0});
    p.add({0, 3, Parity::Cos, -1.0});
    // mean of 4 sin^2 + cos^2 = 2 + 1/2
    CHECK(p.l2() == doctest::Approx(std::sqrt(2.5)).epsilon(1e-15));
    CHECK(p.max_degree() == 3);
    const TrigPoly r = TrigPoly::from_field(p.to_field(16), 5, 1e-14);
    TrigPoly d = r;
    d.add(p, -1.0);
    CHECK(d.l2() < 1e-14);
}

TEST_CASE("represent_mode: E0 targets need no interaction") {
    const ModeCombo c = represent_mode({2, 1, Parity::Cos, 0.4}, 8);
    CHECK(c.depth == 0);
    CHECK(c.q.empty());
    CHECK(c.q0.cos_coef(2, 1) == doctest::Approx(0.4));
    CHECK(c.residual == 0.0);
}

TEST_CASE("represent_mode: modes outside E0 come from one interaction") {
    for (TrigMode t : {TrigMode{0, 1, Parity::Sin, 1.0}, TrigMode{0, 2, Parity::Cos, -0.5},
                       TrigMode{1, -1, Parity::Sin, 0.3}, TrigMode{3, -4, Parity::Cos, 2.0}}) {
        const ModeCombo c = represent_mode(t, 8);
        CAPTURE(t.n1);
        CAPTURE(t.n2);
        CHECK(c.depth == 1);
        CHECK(c.residual <= 1e-12);
        // the pair meets the search rules
        const int a1 = c.a.first, a2 = c.a.second, b1 = c.b.first, b2 = c.b.second;
        CHECK(in_e0(a1, a2));
        CHECK(in_e0(b1, b2));
        CHECK(a1 * b2 - a2 * b1 != 0);
        CHECK(a1 * a1 + a2 * a2 != b1 * b1 + b2 * b2);
        // independent check through the pseudospectral product
        const int n = 64;
        SpectralField out = c.q0.to_field(n);
        for (const TrigPoly& q : c.q) out += advect(upsilon(q.to_field(n)), q.to_field(n));
        CHECK(field_gap(out, TrigPoly(t).to_field(n)) <= 1e-11);
        TrigPoly d = combo_output(c);
        d.add(TrigPoly(t), -1.0);
        CHECK(d.l2() <= 1e-12);
    }
}

TEST_CASE("saturation closure covers the band") {
    const auto rows = saturation_closure(5, 8);
    int reach = 0;
    double worst = 0.0;
    for (const auto& r : rows) {
        CHECK(canonical(r.n1, r.n2));
        CHECK(std::max(std::abs(r.n1), std::abs(r.n2)) <= 5);
        if (r.depth >= 0) ++reach;
        worst = std::max(worst, r.residual);
    }
    CHECK(rows.size() >= 60);
    CHECK(reach == static_cast<int>(rows.size()));
    CHECK(worst <= 1e-10);
}

TEST_CASE("staging plan reproduces the target and survives JSON") {
    const int n = 64;
    const SpectralField w0 = random_band(n, 4, 3), w1 = random_band(n, 4, 4);
    const StagingPlan p = staging_plan(w0, w1, 4, 8);
    CHECK(p.band == 4);
    CHECK(p.out_of_band <= 1e-12);
    CHECK(p.residual <= 1e-8);
    CHECK(plan_defect(p, w0, w1) <= 1e-8);
    REQUIRE(p.q.size() == p.Q.size());
    for (std::size_t i = 0; i < p.q.size(); ++i) {
        CHECK(sobolev_norm(d1(p.Q[i].to_field(n)) - p.q[i].to_field(n), 0) <= 1e-12);
    }

    const StagingPlan r = plan_from_json(plan_json(p));
    CHECK(r.band == p.band);
    REQUIRE(r.q.size() == p.q.size());
    TrigPoly d = r.q0;
    d.add(p.q0, -1.0);
    CHECK(d.l2() == 0.0);
    for (std::size_t i = 0; i < p.q.size(); ++i) {
        TrigPoly e = r.q[i];
        e.add(p.q[i], -1.0);
        CHECK(e.l2() == 0.0);
    }
    CHECK(plan_defect(r, w0, w1) == doctest::Approx(plan_defect(p, w0, w1)).epsilon(1e-12));
}

TEST_CASE("malformed plan JSON is rejected") {
    CHECK_THROWS(plan_from_json("{"));
    CHECK_THROWS(plan_from_json("{\"band\": \"four\"}"));
}
