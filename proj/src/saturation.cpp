#include "tbflow/saturation.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <tuple>

#include "json.hpp"

namespace tbf {

bool canonical(int n1, int n2) { return n1 > 0 || (n1 == 0 && n2 > 0); }
bool in_e0(int n1, int n2) { return n1 >= 1 && n2 >= 0; }

TrigMode canonicalize(const TrigMode& m) {
    if (m.n1 == 0 && m.n2 == 0) throw SaturationError("the zero wavenumber is not a mode");
    if (canonical(m.n1, m.n2)) return m;
    TrigMode c = m;
    c.n1 = -m.n1;
    c.n2 = -m.n2;
    if (m.parity == Parity::Sin) c.coef = -m.coef;
    return c;
}

void TrigPoly::add(const TrigMode& m0) {
    const TrigMode m = canonicalize(m0);
    auto& e = c_[{m.n1, m.n2}];
    (m.parity == Parity::Sin ? e.first : e.second) += m.coef;
}

void TrigPoly::add(const TrigPoly& p, double s) {
    for (const auto& [k, v] : p.c_) {
        auto& e = c_[k];
        e.first += s * v.first;
        e.second += s * v.second;
    }
}

double TrigPoly::sin_coef(int n1, int n2) const {
    auto it = c_.find({n1, n2});
    return it == c_.end() ? 0.0 : it->second.first;
}

double TrigPoly::cos_coef(int n1, int n2) const {
    auto it = c_.find({n1, n2});
    return it == c_.end() ? 0.0 : it->second.second;
}

std::vector<TrigMode> TrigPoly::modes(double tol) const {
    std::vector<TrigMode> out;
    for (const auto& [k, v] : c_) {
        if (std::abs(v.first) > tol) out.push_back({k.first, k.second, Parity::Sin, v.first});
        if (std::abs(v.second) > tol) out.push_back({k.first, k.second, Parity::Cos, v.second});
    }
    return out;
}

double TrigPoly::l2() const {
    double s = 0.0;
    for (const auto& [k, v] : c_) s += 0.5 * (v.first * v.first + v.second * v.second);
    return std::sqrt(s);
}

int TrigPoly::max_degree() const {
    int d = 0;
    for (const auto& [k, v] : c_) d = std::max({d, std::abs(k.first), std::abs(k.second)});
    return d;
}

SpectralField TrigPoly::to_field(int n) const {
    SpectralField f(n);
    for (const auto& [k, v] : c_) {
        if (std::abs(k.first) >= n / 2 || std::abs(k.second) >= n / 2)
            throw SaturationError("trig polynomial exceeds the grid band");
        f.set_coef(k.first, k.second, cplx(0.5 * v.second, -0.5 * v.first));
    }
    return f;
}

TrigPoly TrigPoly::from_field(const SpectralField& f, int band, double tol) {
    TrigPoly p;
    for (int n1 = 0; n1 <= band; ++n1)
        for (int n2 = -band; n2 <= band; ++n2) {
            if (!canonical(n1, n2)) continue;
            const cplx c = f.coef(n1, n2);
            const double C = 2.0 * c.real(), S = -2.0 * c.imag();
            if (std::abs(S) > tol) p.add({n1, n2, Parity::Sin, S});
            if (std::abs(C) > tol) p.add({n1, n2, Parity::Cos, C});
        }
    return p;
}

TrigPoly TrigPoly::x1_primitive() const {
    TrigPoly p;
    for (const auto& [k, v] : c_) {
        if (v.first == 0.0 && v.second == 0.0) continue;
        if (k.first == 0) throw SaturationError("no x1-primitive for a mode with n1 = 0");
        // d1 cos(n.x) = -n1 sin(n.x), d1 sin(n.x) = n1 cos(n.x)
        if (v.first != 0.0) p.add({k.first, k.second, Parity::Cos, -v.first / k.first});
        if (v.second != 0.0) p.add({k.first, k.second, Parity::Sin, v.second / k.first});
    }
    return p;
}

// ---------------------------------------------------------------------------

namespace {
using CMap = std::map<std::pair<int, int>, cplx>;

CMap to_complex(const TrigPoly& p) {
    CMap m;
    for (const auto& t : p.modes()) {
        // sin = (e - e*)/(2i), cos = (e + e*)/2
        const cplx c = (t.parity == Parity::Sin) ? cplx(0.0, -0.5 * t.coef) : cplx(0.5 * t.coef, 0.0);
        m[{t.n1, t.n2}] += c;
        m[{-t.n1, -t.n2}] += std::conj(c);
    }
    return m;
}

TrigPoly from_complex(const CMap& m) {
    TrigPoly p;
    for (const auto& [k, c] : m) {
        if (!canonical(k.first, k.second)) continue;
        const double C = 2.0 * c.real(), S = -2.0 * c.imag();
        if (S != 0.0) p.add({k.first, k.second, Parity::Sin, S});
        if (C != 0.0) p.add({k.first, k.second, Parity::Cos, C});
    }
    return p;
}

// (grad_perp(phi).grad) q with phi = -Lap^{-1} f: sum (k x l) phi_k q_l e^{i(k+l).x}
CMap transport_product(const CMap& f, const CMap& q) {
    CMap out;
    for (const auto& [k, fk] : f) {
        const double kk = k.first * k.first + k.second * k.second;
        const cplx phi = fk / kk;
        for (const auto& [l, ql] : q) {
            const double cross = k.first * l.second - k.second * l.first;
            if (cross == 0.0) continue;
            out[{k.first + l.first, k.second + l.second}] += cross * phi * ql;
        }
    }
    return out;
}
} // namespace

TrigPoly advect_pair(const TrigMode& a, const TrigMode& b) {
    return from_complex(transport_product(to_complex(TrigPoly(a)), to_complex(TrigPoly(b))));
}

TrigPoly bilinear_expand(const TrigMode& a, const TrigMode& b) {
    TrigPoly p = advect_pair(a, b);
    p.add(advect_pair(b, a));
    return p;
}

TrigPoly self_advection(const TrigPoly& q) {
    const CMap c = to_complex(q);
    return from_complex(transport_product(c, c));
}

// ---------------------------------------------------------------------------

namespace {
TrigPoly pair_poly(double kappa, const TrigMode& f, const TrigMode& g) {
    // (Upsilon(q).grad) q = kappa * bilinear(f, g) for q = s f + sign(kappa) s g
    const double s = std::sqrt(std::abs(kappa));
    TrigMode a = f, b = g;
    a.coef = s;
    b.coef = kappa < 0 ? -s : s;
    TrigPoly q(a);
    q.add(b);
    return q;
}

double combo_residual(const ModeCombo& c) {
    TrigPoly r = c.q0;
    for (const auto& q : c.q) r.add(self_advection(q));
    r.add(TrigPoly(c.target), -1.0);
    return r.l2();
}
} // namespace

ModeCombo represent_mode(const TrigMode& target, int search_band) {
    ModeCombo out;
    out.target = canonicalize(target);
    const int n1 = out.target.n1, n2 = out.target.n2;
    if (in_e0(n1, n2)) {
        out.q0 = TrigPoly(out.target);
        out.residual = combo_residual(out);
        return out;
    }
    // a - b = n with a, b in E0
    std::vector<std::tuple<int, int, int, int, int>> cand;
    for (int a1 = 1; a1 <= search_band; ++a1)
        for (int a2 = 0; a2 <= search_band; ++a2) {
            const int b1 = a1 - n1, b2 = a2 - n2;
            if (!in_e0(b1, b2) || std::max(b1, b2) > search_band) continue;
            if (a1 * a1 + a2 * a2 == b1 * b1 + b2 * b2) continue;
            if (a1 * b2 - a2 * b1 == 0) continue;
            cand.emplace_back(std::max({a1, a2, b1, b2}), a1, a2, b1, b2);
        }
    if (cand.empty()) throw SaturationError("no E0 pair reaches the target within the search band");
    std::sort(cand.begin(), cand.end());
    const auto [deg, a1, a2, b1, b2] = cand.front();
    (void)deg;
    out.depth = 1;
    out.a = {a1, a2};
    out.b = {b1, b2};
    const double cb = 1.0 / (a1 * a1 + a2 * a2) - 1.0 / (b1 * b1 + b2 * b2);
    const double cross = a1 * b2 - a2 * b1;
    const double k = out.target.coef / (cb * cross);
    auto mode = [](int p1, int p2, Parity p) { return TrigMode{p1, p2, p, 1.0}; };
    if (out.target.parity == Parity::Sin) {
        // x sin((a-b).x) = J(cos a, sin b) - J(sin a, cos b)
        out.q.push_back(pair_poly(k, mode(a1, a2, Parity::Cos), mode(b1, b2, Parity::Sin)));
        out.q.push_back(pair_poly(-k, mode(a1, a2, Parity::Sin), mode(b1, b2, Parity::Cos)));
    } else {
        // x cos((a-b).x) = -J(cos a, cos b) - J(sin a, sin b)
        out.q.push_back(pair_poly(-k, mode(a1, a2, Parity::Cos), mode(b1, b2, Parity::Cos)));
        out.q.push_back(pair_poly(-k, mode(a1, a2, Parity::Sin), mode(b1, b2, Parity::Sin)));
    }
    out.residual = combo_residual(out);
    if (!(out.residual <= 1e-12 * std::max(1.0, std::abs(out.target.coef))))
        throw SaturationError("mode combination failed its exact check");
    return out;
}

std::vector<CoverageRow> saturation_closure(int band, int search_band) {
    std::vector<CoverageRow> rows;
    for (int n1 = 0; n1 <= band; ++n1)
        for (int n2 = -band; n2 <= band; ++n2) {
            if (!canonical(n1, n2)) continue;
            CoverageRow r{n1, n2, -1, 0.0};
            try {
                for (Parity p : {Parity::Sin, Parity::Cos}) {
                    const ModeCombo c = represent_mode({n1, n2, p, 1.0}, search_band);
                    r.depth = std::max(r.depth, c.depth);
                    r.residual = std::max(r.residual, c.residual);
                }
            } catch (const SaturationError&) {
                r.depth = -1;
            }
            rows.push_back(r);
        }
    return rows;
}

// ---------------------------------------------------------------------------

namespace {
SpectralField resample(const SpectralField& f, int n) {
    SpectralField g(n);
    const int lim = std::min(f.n(), n) / 2 - 1;
    for (int k1 = -lim; k1 <= lim; ++k1)
        for (int k2 = 0; k2 <= lim; ++k2) g.set_coef(k1, k2, f.coef(k1, k2));
    return g;
}
} // namespace

StagingPlan staging_plan(const SpectralField& w0, const SpectralField& w1, int band, int search_band, double tol) {
    if (w0.n() != w1.n()) throw SaturationError("staging plan: resolutions differ");
    const SpectralField D = w0 - w1;
    if (std::abs(D.mean()) > tol) throw SaturationError("staging plan: vorticity defect has nonzero mean");
    StagingPlan p;
    p.band = band;
    const TrigPoly d = TrigPoly::from_field(D, band, tol);
    p.out_of_band = sobolev_norm(D - d.to_field(D.n()), 0);
    for (const auto& m : d.modes(tol)) {
        const ModeCombo c = represent_mode(m, search_band);
        p.q0.add(c.q0);
        for (const auto& q : c.q) p.q.push_back(q);
    }
    p.Q0 = p.q0.x1_primitive();
    for (const auto& q : p.q) p.Q.push_back(q.x1_primitive());
    p.residual = plan_defect(p, w0, w1);
    return p;
}

double plan_defect(const StagingPlan& p, const SpectralField& w0, const SpectralField& w1) {
    int deg = p.q0.max_degree();
    for (const auto& q : p.q) deg = std::max(deg, q.max_degree());
    int n = std::max(w0.n(), 16);
    while (n < 3 * (2 * deg + 1)) n *= 2;
    SpectralField r = resample(w0, n) - resample(w1, n);
    r -= p.q0.to_field(n);
    for (const auto& qp : p.q) {
        const SpectralField q = qp.to_field(n);
        r -= advect(upsilon(q), q);
    }
    return sobolev_norm(r, 0);
}

namespace {
nlohmann::json poly_json(const TrigPoly& p) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& m : p.modes())
        a.push_back({{"n1", m.n1}, {"n2", m.n2}, {"parity", m.parity == Parity::Sin ? "sin" : "cos"}, {"coef", m.coef}});
    return a;
}

TrigPoly poly_from(const nlohmann::json& a) {
    TrigPoly p;
    for (const auto& m : a)
        p.add({m.at("n1").get<int>(), m.at("n2").get<int>(),
               m.at("parity").get<std::string>() == "sin" ? Parity::Sin : Parity::Cos, m.at("coef").get<double>()});
    return p;
}
} // namespace

std::string plan_json(const StagingPlan& p) {
    nlohmann::json j;
    j["band"] = p.band;
    j["q0"] = poly_json(p.q0);
    j["Q0"] = poly_json(p.Q0);
    j["stages"] = nlohmann::json::array();
    for (std::size_t i = 0; i < p.q.size(); ++i) j["stages"].push_back({{"q", poly_json(p.q[i])}, {"Q", poly_json(p.Q[i])}});
    j["out_of_band"] = p.out_of_band;
    j["residual"] = p.residual;
    return j.dump(2);
}

StagingPlan plan_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    StagingPlan p;
    p.band = j.at("band").get<int>();
    p.q0 = poly_from(j.at("q0"));
    p.Q0 = poly_from(j.at("Q0"));
    for (const auto& s : j.at("stages")) {
        p.q.push_back(poly_from(s.at("q")));
        p.Q.push_back(poly_from(s.at("Q")));
    }
    p.out_of_band = j.value("out_of_band", 0.0);
    p.residual = j.value("residual", 0.0);
    return p;
}

} // namespace tbf
