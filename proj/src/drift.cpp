#include "tbflow/drift.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tbf {

double TrigSignal::value(double t) const {
    double s = c0;
    for (std::size_t q = 0; q < a.size(); ++q) {
        const double w = freq * (q + 1);
        s += a[q] * std::cos(w * t) + b[q] * std::sin(w * t);
    }
    return s;
}

double TrigSignal::integral(double t) const {
    double s = c0 * t;
    for (std::size_t q = 0; q < a.size(); ++q) {
        const double w = freq * (q + 1);
        s += a[q] * std::sin(w * t) / w + b[q] * (1.0 - std::cos(w * t)) / w;
    }
    return s;
}

double Envelope::value(double t) const { return scale * (1.0 - std::pow(t / half, power)); }
double Envelope::deriv(double t) const {
    return -scale * power * std::pow(t / half, power - 1) / half;
}

SignalFamily::SignalFamily(double tstar, std::array<TrigSignal, 4> signals, Envelope env)
    : tstar_(tstar), sig_(std::move(signals)), env_(env) {
    if (!(tstar > 0.0)) throw std::invalid_argument("signal family: T* must be positive");
    env_.half = 0.5 * tstar;
}

Coeff4 SignalFamily::half_psi(double t) const {
    Coeff4 p{};
    const double e = env_.value(t);
    for (int j = 0; j < 4; ++j) p[j] = e * sig_[j].integral(t);
    return p;
}

Coeff4 SignalFamily::half_psi_dot(double t) const {
    Coeff4 p{};
    const double e = env_.value(t), de = env_.deriv(t);
    for (int j = 0; j < 4; ++j) p[j] = de * sig_[j].integral(t) + e * sig_[j].value(t);
    return p;
}

Coeff4 SignalFamily::psi(double t) const {
    if (t < 0.0 || t > tstar_) return {};
    if (t <= half()) return half_psi(t);
    Coeff4 p = half_psi(tstar_ - t);
    for (auto& v : p) v = -v;
    return p;
}

Coeff4 SignalFamily::psi_dot(double t) const {
    if (t < 0.0 || t > tstar_) return {};
    if (t <= half()) return half_psi_dot(t);
    return half_psi_dot(tstar_ - t);
}

SignalFamily SignalFamily::scaled(double factor) const {
    auto s = sig_;
    for (auto& g : s) {
        g.c0 *= factor;
        for (auto& v : g.a) v *= factor;
        for (auto& v : g.b) v *= factor;
    }
    return SignalFamily(tstar_, s, env_);
}

SignalFamily random_signal_family(double tstar, std::uint64_t seed, int degree, int envelope_power, bool zero_mean) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::array<TrigSignal, 4> sig;
    for (auto& g : sig) {
        g.freq = kTwoPi / (0.5 * tstar);
        g.c0 = nd(rng);
        if (zero_mean) g.c0 = 0.0;
        for (int q = 0; q < degree; ++q) {
            g.a.push_back(nd(rng));
            g.b.push_back(nd(rng));
        }
    }
    Envelope env;
    env.power = envelope_power;
    return SignalFamily(tstar, sig, env);
}

SignalFn symmetrize(SignalFn half_signal, double period, double tol) {
    const Coeff4 a = half_signal(0.0), b = half_signal(0.5 * period);
    for (int j = 0; j < 4; ++j)
        if (std::abs(a[j]) > tol || std::abs(b[j]) > tol)
            throw std::domain_error("symmetrize: half-period signal does not vanish at its endpoints");
    return [h = std::move(half_signal), period](double t) -> Coeff4 {
        if (t < 0.0 || t > period) return {};
        if (t <= 0.5 * period) return h(t);
        Coeff4 p = h(period - t);
        for (auto& v : p) v = -v;
        return p;
    };
}

Vec2 generating_velocity(const Coeff4& p, double kappa, const Vec2& x) {
    // l = (1,0): l_perp = (0,1); l = (0,1): l_perp = (-1,0)
    return {-kappa * (p[2] * std::sin(x[1]) + p[3] * std::cos(x[1])),
            kappa * (p[0] * std::sin(x[0]) + p[1] * std::cos(x[0]))};
}

VectorField generating_field(const Coeff4& p, double kappa, int n) {
    SpectralField u1(n), u2(n);
    // sin x = (e^{ix} - e^{-ix}) / 2i
    const cplx s(0.0, -0.5), c(0.5, 0.0);
    u1.set_coef(0, 1, -kappa * (p[2] * s + p[3] * c));
    u2.set_coef(1, 0, kappa * (p[0] * s + p[1] * c));
    return VectorField(std::move(u1), std::move(u2), true);
}

SpectralField stream_function(const VectorField& u) {
    const double scale = std::max(sobolev_norm(u, 0), 1.0);
    if (std::abs(u.c1.mean()) > 1e-12 * scale || std::abs(u.c2.mean()) > 1e-12 * scale)
        throw std::domain_error("stream_function: velocity field has a nonzero mean");
    SpectralField w = curl(u);
    w *= -1.0;
    return inverse_laplacian(w);
}

Coeff4 GeneratingDrift::shifted_stream(const Vec2& S, double t) const {
    const Coeff4 p = sig_.psi(t);
    const double k = kappa_;
    return {k * (p[0] * std::sin(S[0]) - p[1] * std::cos(S[0])), k * (p[2] * std::sin(S[1]) - p[3] * std::cos(S[1])),
            k * (p[0] * std::cos(S[0]) + p[1] * std::sin(S[0])), k * (p[2] * std::cos(S[1]) + p[3] * std::sin(S[1]))};
}

Coeff4 GeneratingDrift::shifted_stream_dot(const Vec2& S, double t) const {
    const Coeff4 p = sig_.psi_dot(t);
    const double k = kappa_;
    return {k * (p[0] * std::sin(S[0]) - p[1] * std::cos(S[0])), k * (p[2] * std::sin(S[1]) - p[3] * std::cos(S[1])),
            k * (p[0] * std::cos(S[0]) + p[1] * std::sin(S[0])), k * (p[2] * std::cos(S[1]) + p[3] * std::sin(S[1]))};
}

SpectralField GeneratingDrift::stream(int n, double t) const {
    const Coeff4 w = shifted_stream({0.0, 0.0}, t);
    SpectralField f(n);
    const cplx s(0.0, -0.5), c(0.5, 0.0);
    f.set_coef(1, 0, w[0] * s + w[2] * c);
    f.set_coef(0, 1, w[1] * s + w[3] * c);
    return f;
}

double max_generating_speed(const SignalFamily& sig, int samples) {
    double mx = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Coeff4 p = sig.half_psi(sig.half() * k / (samples - 1));
        mx = std::max(mx, std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2] + p[3] * p[3]));
    }
    return mx;
}

double pick_kappa(const SignalFamily& sig, const Cutoffs& cut, int samples) {
    const double dist = cut.support_distance();
    if (!(dist > 0.0)) throw GeometryError("pick_kappa: supp(mu) touches the square boundary");
    const double speed = max_generating_speed(sig, samples);
    if (speed == 0.0) return 1.0;
    return 0.9 * dist / (sig.tstar() * speed);
}

// ---------------------------------------------------------------------------

namespace {
double bump_mass(double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    if (b <= a) return 0.0;
    auto f = [](double u) { return bump_unnormalized(Jet::variable(u)).value(); };
    return gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-15);
}
} // namespace

FlushingProfile::FlushingProfile(const Covering& cov, const TimeGrid& tg) : tg_(tg), shifts_(cov.shifts) {
    norm_ = bump_mass(-1.0, 1.0);
}

int FlushingProfile::locate(double t, int& block, double& s) const {
    const double T = tg_.Tstar;
    for (int i = 0; i < tg_.M; ++i) {
        const double start = (i == 0 ? tg_.tc0 : tg_.tc[i - 1]);
        if (t >= start && t < tg_.tc[i]) {
            block = i;
            s = t - start;
            if (s < T) return 0;
            if (s < 2.0 * T) return 1;
            s = tg_.tc[i] - t;
            return 2;
        }
    }
    return -1;
}

Jet FlushingProfile::bump(double s) const {
    const double T = tg_.Tstar;
    Jet u = Jet::variable(2.0 * s / T - 1.0, 2.0 / T);
    return (2.0 / (T * norm_)) * bump_unnormalized(u);
}

Vec2 FlushingProfile::velocity(double t) const {
    int i = 0;
    double s = 0.0;
    const int ph = locate(t, i, s);
    if (ph == 0 || ph == 2) {
        const double b = bump(s).value() * (ph == 0 ? 1.0 : -1.0);
        return {shifts_[i][0] * b, shifts_[i][1] * b};
    }
    return {0.0, 0.0};
}

Vec2 FlushingProfile::accel(double t) const {
    int i = 0;
    double s = 0.0;
    const int ph = locate(t, i, s);
    if (ph == 0 || ph == 2) {
        // last third: y(t) = -S b(tc - t), so y' = +S b'(tc - t)
        const double db = bump(s).deriv(1);
        return {shifts_[i][0] * db, shifts_[i][1] * db};
    }
    return {0.0, 0.0};
}

Vec2 FlushingProfile::displacement(double t) const {
    int i = 0;
    double s = 0.0;
    const int ph = locate(t, i, s);
    double frac = 0.0;
    if (ph == 0 || ph == 2) frac = bump_mass(-1.0, 2.0 * s / tg_.Tstar - 1.0) / norm_;
    else if (ph == 1) frac = 1.0;
    else return {0.0, 0.0};
    return {shifts_[i][0] * frac, shifts_[i][1] * frac};
}

// ---------------------------------------------------------------------------

namespace {
Jet trig_jet(double x, bool cosine) {
    Jet j;
    const double s = std::sin(x), c = std::cos(x);
    const double d[5] = {s, c, -s, -c, s};
    const double e[5] = {c, -s, -c, s, c};
    static constexpr double fact[] = {1, 1, 2, 6, 24};
    for (int k = 0; k <= 4; ++k) j.t[k] = (cosine ? e[k] : d[k]) / fact[k];
    return j;
}

Cutoffs::DerivTable tensor(const Jet& f1, const Jet& f2) {
    Cutoffs::DerivTable d{};
    auto a = f1.derivs(), b = f2.derivs();
    for (int i = 0; i <= 4; ++i)
        for (int j = 0; j <= 4; ++j) d[i][j] = a[i] * b[j];
    return d;
}

Cutoffs::DerivTable combine(const StreamTable& E, const Coeff4& w) {
    Cutoffs::DerivTable d{};
    for (int j = 0; j < 4; ++j) {
        if (w[j] == 0.0) continue;
        for (int a = 0; a <= 4; ++a)
            for (int b = 0; b <= 4; ++b) d[a][b] += w[j] * E[j][a][b];
    }
    return d;
}
} // namespace

StreamTable window_stream_table(const Cutoffs& cut, const Vec2& x) {
    const Jet X1 = cut.chi_factor(x[0], 0), X2 = cut.chi_factor(x[1], 1);
    StreamTable E{};
    if (X1.t == Jet{}.t || X2.t == Jet{}.t) return E; // outside supp(chi)
    E[0] = tensor(X1 * trig_jet(x[0], false), X2);
    E[1] = tensor(X1, X2 * trig_jet(x[1], false));
    E[2] = tensor(X1 * trig_jet(x[0], true), X2);
    E[3] = tensor(X1, X2 * trig_jet(x[1], true));
    return E;
}

DriftProgram::DriftProgram(const Cutoffs& cut, const TimeGrid& tg, GeneratingDrift gen)
    : cut_(cut), tg_(tg), gen_(std::move(gen)), flush_(cut.covering(), tg) {
    if (std::abs(gen_.tstar() - tg.Tstar) > 1e-14)
        throw std::invalid_argument("drift program: signal period differs from the window length");
    for (int i = 0; i + 1 < tg.M; ++i)
        if (tg.tb[i] > tg.ta[i + 1]) throw std::invalid_argument("drift program: overlapping windows");
}

Coeff4 DriftProgram::weights(double t) const {
    const int i = window(t);
    if (i < 0) return {};
    return gen_.shifted_stream(cut_.covering().shifts[i], t - tg_.ta[i]);
}

Coeff4 DriftProgram::weights_dot(double t) const {
    const int i = window(t);
    if (i < 0) return {};
    return gen_.shifted_stream_dot(cut_.covering().shifts[i], t - tg_.ta[i]);
}

Vec2 DriftProgram::velocity(const Vec2& x, double t) const {
    Vec2 u = flush_.velocity(t);
    const int i = window(t);
    if (i < 0) return u;
    const Coeff4 w = weights(t);
    const Jet X1 = cut_.chi_factor(x[0], 0), X2 = cut_.chi_factor(x[1], 1);
    if (X1.t[0] == 0.0 && X1.t[1] == 0.0) return u;
    if (X2.t[0] == 0.0 && X2.t[1] == 0.0) return u;
    const double s1 = std::sin(x[0]), c1 = std::cos(x[0]), s2 = std::sin(x[1]), c2 = std::cos(x[1]);
    // Psi = X1 X2 (w0 s1 + w2 c1) + X1 X2 (w1 s2 + w3 c2)
    const double f = w[0] * s1 + w[2] * c1, df = w[0] * c1 - w[2] * s1;
    const double g = w[1] * s2 + w[3] * c2, dg = w[1] * c2 - w[3] * s2;
    const double x1 = X1.t[0], dx1 = X1.t[1], x2 = X2.t[0], dx2 = X2.t[1];
    const double psi1 = dx1 * x2 * (f + g) + x1 * x2 * df;
    const double psi2 = x1 * dx2 * (f + g) + x1 * x2 * dg;
    u[0] += psi2;
    u[1] -= psi1;
    return u;
}

VelocityJet DriftProgram::velocity_jet(const Vec2& x, double t) const {
    VelocityJet vj;
    vj.u = flush_.velocity(t);
    if (window(t) < 0) return vj;
    const auto P = combine(window_stream_table(cut_, x), weights(t));
    vj.u[0] += P[0][1];
    vj.u[1] -= P[1][0];
    vj.du = {P[1][1], P[0][2], -P[2][0], -P[1][1]};
    return vj;
}

const DriftProgram::SpectralBlocks& DriftProgram::blocks(int n) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(n);
    if (it != cache_.end()) return *it->second;
    auto b = std::make_shared<SpectralBlocks>();
    b->n = n;
    for (int j = 0; j < 4; ++j) {
        b->stream[j] = SpectralField::sample(n, [this, j](double a, double c) {
            const double e = (j == 0) ? std::sin(a) : (j == 1) ? std::sin(c) : (j == 2) ? std::cos(a) : std::cos(c);
            return cut_.chi({a, c}) * e;
        });
        b->wind[j] = grad_perp(b->stream[j]);
        b->vort[j] = curl(b->wind[j]);
        b->hyper[j] = laplacian(b->vort[j]);
        b->hyper[j] *= -1.0;
        const SpectralField dv = dealias(b->vort[j]);
        b->dvort[0][j] = d1(dv);
        b->dvort[1][j] = d2(dv);
    }
    for (int a = 0; a < 4; ++a)
        for (int c = 0; c < 4; ++c) b->adv[a][c] = advect(b->wind[a], b->vort[c]);
    cache_[n] = b;
    return *b;
}

VectorField DriftProgram::field(int n, double t) const {
    const Vec2 y = ybar(t);
    VectorField u(constant_field(n, y[0]), constant_field(n, y[1]), true);
    if (window(t) < 0) return u;
    const Coeff4 w = weights(t);
    const auto& B = blocks(n);
    for (int j = 0; j < 4; ++j) {
        u.c1.axpy(w[j], B.wind[j].c1);
        u.c2.axpy(w[j], B.wind[j].c2);
    }
    return u;
}

SpectralField DriftProgram::curl_field(int n, double t) const {
    SpectralField z(n);
    if (window(t) < 0) return z;
    const Coeff4 w = weights(t);
    const auto& B = blocks(n);
    for (int j = 0; j < 4; ++j) z.axpy(w[j], B.vort[j]);
    return z;
}

std::vector<double> DriftProgram::breakpoints() const {
    std::vector<double> b{0.0, tg_.tc0, 1.0};
    for (int i = 0; i < tg_.M; ++i) {
        b.push_back(tg_.ta[i]);
        b.push_back(tg_.ta[i] + 0.5 * tg_.Tstar);
        b.push_back(tg_.tb[i]);
        b.push_back(tg_.tc[i]);
    }
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(), [](double p, double q) { return std::abs(p - q) < 1e-14; }), b.end());
    return b;
}

// ---------------------------------------------------------------------------

double EulerResidual::curl_force(const Vec2& x, double t) const {
    if (U_->window(t) < 0) return 0.0;
    const StreamTable E = window_stream_table(U_->cutoffs(), x);
    const auto P = combine(E, U_->weights(t));
    const auto Pt = combine(E, U_->weights_dot(t));
    const Vec2 y = U_->ybar(t);
    const double dt_curl = -(Pt[2][0] + Pt[0][2]);
    const double g1 = -(P[3][0] + P[1][2]), g2 = -(P[2][1] + P[0][3]);
    const double u1 = y[0] + P[0][1], u2 = y[1] - P[1][0];
    return dt_curl + u1 * g1 + u2 * g2;
}

double EulerResidual::hyper_force(const Vec2& x, double t) const {
    if (U_->window(t) < 0) return 0.0;
    const auto P = combine(window_stream_table(U_->cutoffs(), x), U_->weights(t));
    return P[4][0] + 2.0 * P[2][2] + P[0][4];
}

SpectralField EulerResidual::curl_force_field(int n, double t) const {
    SpectralField h(n);
    if (U_->window(t) < 0) return h;
    const auto& B = U_->blocks(n);
    const Coeff4 w = U_->weights(t), wd = U_->weights_dot(t);
    const Vec2 y = U_->ybar(t);
    for (int j = 0; j < 4; ++j) {
        h.axpy(wd[j], B.vort[j]);
        h.axpy(y[0] * w[j], B.dvort[0][j]);
        h.axpy(y[1] * w[j], B.dvort[1][j]);
        for (int k = 0; k < 4; ++k) h.axpy(w[j] * w[k], B.adv[j][k]);
    }
    return h;
}

SpectralField EulerResidual::hyper_force_field(int n, double t) const {
    SpectralField h(n);
    if (U_->window(t) < 0) return h;
    const auto& B = U_->blocks(n);
    const Coeff4 w = U_->weights(t);
    for (int j = 0; j < 4; ++j) h.axpy(w[j], B.hyper[j]);
    return h;
}

SpectralField EulerResidual::curl_force_sampled(int n, double t) const {
    return SpectralField::sample(n, [this, t](double a, double b) { return curl_force({a, b}, t); });
}

SpectralField EulerResidual::hyper_force_sampled(int n, double t) const {
    return SpectralField::sample(n, [this, t](double a, double b) { return hyper_force({a, b}, t); });
}

} // namespace tbf
