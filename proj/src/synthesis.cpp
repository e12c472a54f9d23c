#include "tbflow/synthesis.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace tbf {

namespace {
double basis_value(int k, const Vec2& x) {
    switch (k) {
    case 0: return std::sin(x[0]);
    case 1: return std::sin(x[1]);
    case 2: return std::cos(x[0]);
    default: return std::cos(x[1]);
    }
}

SpectralField basis_field(int n, int k) {
    return SpectralField::sample(n, [k](double a, double b) { return basis_value(k, {a, b}); });
}

double bump_mass(double a, double b) {
    using boost::math::quadrature::gauss_kronrod;
    if (b <= a) return 0.0;
    auto f = [](double u) { return bump_unnormalized(Jet::variable(u)).value(); };
    return gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-15);
}

const double kBumpNorm = bump_mass(-1.0, 1.0);
} // namespace

// ---------------------------------------------------------------------------

int GStar::interval_at(double t) const {
    const double h = 0.5 * tstar;
    if (nt <= 0 || t < h || t > tstar) return -1;
    return std::min(nt - 1, static_cast<int>((t - h) / interval()));
}

Coeff4 GStar::at(double t) const {
    const int q = interval_at(t);
    return q < 0 ? Coeff4{} : c[q];
}

double GStar::value(const Vec2& x, double t) const {
    const Coeff4 a = at(t);
    double v = 0.0;
    for (int k = 0; k < 4; ++k) v += a[k] * basis_value(k, x);
    return v;
}

std::vector<double> GStar::breakpoints() const {
    std::vector<double> b;
    for (int q = 0; q <= nt; ++q) b.push_back(0.5 * tstar + q * interval());
    return b;
}

GStar GStar::scaled(double s) const {
    GStar g = *this;
    for (auto& a : g.c)
        for (double& v : a) v *= s;
    g.residual *= std::abs(s);
    g.target_norm *= std::abs(s);
    g.max_coefficient *= std::abs(s);
    return g;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd observe(const SpectralField& f, int n_obs, int m) {
    std::vector<double> rows;
    for (int n2 = 0; n2 <= n_obs; ++n2)
        for (int n1 = -n_obs; n1 <= n_obs; ++n1) {
            if (n2 == 0 && n1 <= 0) continue;
            const double w = std::pow(1.0 + n1 * n1 + n2 * n2, 0.5 * m) * std::sqrt(2.0);
            const cplx z = f.coef(n1, n2);
            rows.push_back(w * z.real());
            rows.push_back(w * z.imag());
        }
    return Eigen::Map<Eigen::VectorXd>(rows.data(), static_cast<Eigen::Index>(rows.size()));
}

namespace {
SpectralDrift column_drift(const SynthesisProblem& p, int n) {
    SpectralDrift d = spectral_drift(p.drift, n);
    return d;
}

SpectralTransportOptions column_options(const SynthesisProblem& p) {
    SpectralTransportOptions o;
    o.dt_max = p.drift.tstar() / p.steps_per_period;
    o.dt_min = o.dt_max * 1e-6;
    return o;
}

SpectralField spectral_column(const SynthesisProblem& p, int q, int k) {
    const int n = p.v0.n();
    const double T = p.drift.tstar(), h = 0.5 * T / p.nt;
    const double a = 0.5 * T + q * h, b = q + 1 == p.nt ? T : a + h;
    const SpectralDrift d = column_drift(p, n);
    const SpectralField gk = basis_field(n, k);
    const auto opt = column_options(p);
    SpectralField v = transport_spectral(d, SpectralField(n), [&gk](double) { return gk; }, a, b, opt);
    return transport_spectral(d, std::move(v), nullptr, b, T, opt);
}

// all columns at once: one backward characteristic per grid point, with the
// Duhamel integral split per interval and basis function
std::vector<SpectralField> characteristic_columns(const SynthesisProblem& p, bool parallel) {
    const int n = p.v0.n(), nt = p.nt;
    const double T = p.drift.tstar(), h = 0.5 * T / nt;
    const auto pts = grid_points(n);
    std::vector<std::vector<double>> vals(4 * nt, std::vector<double>(pts.size(), 0.0));
    const GeneratingDrift& drift = p.drift;
    VelocityFn v = [&drift](const Vec2& x, double t) { return drift.velocity(x, t); };
    std::vector<double> breaks;
    for (int q = 0; q <= nt; ++q) breaks.push_back(0.5 * T + q * h);
    const auto nodes = step_nodes(T, 0.5 * T, T / p.steps_per_period, breaks);
    auto one = [&](long j) {
        Vec2 y = pts[j];
        for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
            const double a = nodes[i], b = nodes[i + 1], dt = b - a;
            const Vec2 f0 = v(y, a);
            const Vec2 y1 = integrate_flow(v, y, a, b, std::abs(dt) * 1.01);
            const Vec2 f1 = v(y1, b);
            const Vec2 ym{0.5 * (y[0] + y1[0]) + dt / 8.0 * (f0[0] - f1[0]),
                          0.5 * (y[1] + y1[1]) + dt / 8.0 * (f0[1] - f1[1])};
            int q = static_cast<int>((0.5 * (a + b) - 0.5 * T) / h);
            q = std::clamp(q, 0, nt - 1);
            for (int k = 0; k < 4; ++k)
                vals[4 * q + k][j] +=
                    std::abs(dt) / 6.0 * (basis_value(k, y) + 4.0 * basis_value(k, ym) + basis_value(k, y1));
            y = y1;
        }
    };
    const long np = static_cast<long>(pts.size());
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 16)
        for (long j = 0; j < np; ++j) one(j);
    } else {
        for (long j = 0; j < np; ++j) one(j);
    }
    std::vector<SpectralField> cols;
    for (auto& g : vals) cols.push_back(SpectralField::from_grid(g, n));
    return cols;
}

std::vector<SpectralField> build_columns(const SynthesisProblem& p, bool parallel) {
    if (p.method == ColumnMethod::Characteristics) return characteristic_columns(p, parallel);
    const long nc = 4L * p.nt;
    std::vector<SpectralField> cols(static_cast<std::size_t>(nc));
    if (parallel) {
        // the spectral blocks are not shared here, so columns are independent
#pragma omp parallel for schedule(dynamic, 1)
        for (long c = 0; c < nc; ++c) cols[c] = spectral_column(p, static_cast<int>(c / 4), static_cast<int>(c % 4));
    } else {
        for (long c = 0; c < nc; ++c) cols[c] = spectral_column(p, static_cast<int>(c / 4), static_cast<int>(c % 4));
    }
    return cols;
}

void check_problem(const SynthesisProblem& p) {
    if (p.nt < 1) throw SynthesisError("synthesis: need at least one control interval");
    if (p.v0.n() == 0 || p.v0.n() != p.v1.n()) throw SynthesisError("synthesis: v0 and v1 must share a resolution");
    if (!(p.drift.tstar() > 0.0)) throw SynthesisError("synthesis: drift has no period");
    if (p.n_obs < 1 || 3 * p.n_obs > p.v0.n()) throw SynthesisError("synthesis: observation band exceeds resolution");
    if (!(p.lambda_rel > 0.0)) throw SynthesisError("synthesis: regularization must be positive");
}
} // namespace

std::vector<SpectralField> synthesis_columns_serial(const SynthesisProblem& p) {
    check_problem(p);
    return build_columns(p, false);
}

SynthesisOperator build_synthesis_operator(const SynthesisProblem& p) {
    check_problem(p);
    SynthesisOperator op;
    op.problem = p;
    const int n = p.v0.n();
    op.free_final = transport_spectral(column_drift(p, n), p.v0, nullptr, 0.0, p.drift.tstar(), column_options(p));
    op.columns = build_columns(p, p.parallel);
    const Eigen::Index rows = observe(op.columns[0], p.n_obs, p.m).size();
    op.A.resize(rows, static_cast<Eigen::Index>(op.columns.size()));
    for (std::size_t c = 0; c < op.columns.size(); ++c)
        op.A.col(static_cast<Eigen::Index>(c)) = observe(op.columns[c], p.n_obs, p.m);
    op.svd.compute(op.A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return op;
}

GStar solve_synthesis(const SynthesisOperator& op, const SpectralField& target) {
    const auto& p = op.problem;
    const Eigen::VectorXd b = observe(target, p.n_obs, p.m);
    const Eigen::VectorXd& s = op.svd.singularValues();
    GStar g;
    g.tstar = p.drift.tstar();
    g.nt = p.nt;
    g.sigma_max = s.size() ? s(0) : 0.0;
    g.sigma_min = s.size() ? s(s.size() - 1) : 0.0;
    if (!(g.sigma_max > 0.0)) throw SynthesisError("synthesis: control-to-state map vanishes");
    g.lambda = p.lambda_rel * g.sigma_max * g.sigma_max;
    Eigen::VectorXd utb = op.svd.matrixU().transpose() * b;
    for (Eigen::Index i = 0; i < s.size(); ++i) utb(i) *= s(i) / (s(i) * s(i) + g.lambda);
    const Eigen::VectorXd x = op.svd.matrixV() * utb;
    if (!x.allFinite()) throw SynthesisError("synthesis: non-finite coefficients");
    g.c.assign(p.nt, Coeff4{});
    for (int q = 0; q < p.nt; ++q)
        for (int k = 0; k < 4; ++k) g.c[q][k] = x(4 * q + k);
    g.max_coefficient = x.cwiseAbs().maxCoeff();
    g.residual = (op.A * x - b).norm();
    g.target_norm = b.norm();
    return g;
}

GStar synthesize_gstar(const SynthesisProblem& p) {
    const SynthesisOperator op = build_synthesis_operator(p);
    return solve_synthesis(op, p.v1 - op.free_final);
}

SpectralField predicted_final(const SynthesisOperator& op, const GStar& g) {
    SpectralField v = op.free_final;
    for (int q = 0; q < g.nt; ++q)
        for (int k = 0; k < 4; ++k) v.axpy(g.c[q][k], op.columns[4 * q + k]);
    return v;
}

// ---------------------------------------------------------------------------

TemperatureControl::TemperatureControl(const DriftProgram& U, GStar g, double v0_mean, bool corrected)
    : U_(&U), g_(std::move(g)), v0_mean_(v0_mean), corrected_(corrected) {
    if (std::abs(g_.tstar - U.grid().Tstar) > 1e-14)
        throw SynthesisError("temperature control: period differs from the window length");
    const auto& mom = U.cutoffs().trig_moments(); // (s1, c1, s2, c2)
    moments_ = {mom[0], mom[2], mom[1], mom[3]};
    // mass accumulated by each full window
    const int M = U.grid().M;
    mass_at_window_start_.assign(M + 1, v0_mean_);
    for (int i = 0; i < M; ++i) {
        double acc = 0.0;
        for (int q = 0; q < g_.nt; ++q) {
            const double t = U.grid().ta[i] + 0.5 * g_.tstar + (q + 0.5) * g_.interval();
            acc += patched_mean(t) * g_.interval();
        }
        mass_at_window_start_[i + 1] = mass_at_window_start_[i] + acc;
    }
}

Coeff4 TemperatureControl::patched_coeffs(double t) const {
    const int i = U_->window(t);
    if (i < 0) return {};
    const Coeff4 c = g_.at(t - U_->grid().ta[i]);
    const Vec2& S = U_->cutoffs().covering().shifts[i];
    const double cs1 = std::cos(S[0]), sn1 = std::sin(S[0]), cs2 = std::cos(S[1]), sn2 = std::sin(S[1]);
    // g(x - S) on {sin x1, sin x2, cos x1, cos x2}
    return {c[0] * cs1 + c[2] * sn1, c[1] * cs2 + c[3] * sn2, -c[0] * sn1 + c[2] * cs1, -c[1] * sn2 + c[3] * cs2};
}

double TemperatureControl::patched_mean(double t) const {
    const Coeff4 g = patched_coeffs(t);
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += g[j] * moments_[j];
    return s;
}

double TemperatureControl::mass(double t) const {
    const auto& tg = U_->grid();
    int i = 0;
    while (i < tg.M && t >= tg.tb[i]) ++i;
    double m = mass_at_window_start_[i];
    if (i < tg.M && t > tg.ta[i]) {
        const double s = t - tg.ta[i];
        const double h = g_.interval();
        for (int q = 0; q < g_.nt; ++q) {
            const double a = 0.5 * g_.tstar + q * h;
            const double len = std::clamp(s - a, 0.0, h);
            if (len > 0.0) m += patched_mean(tg.ta[i] + a + 0.5 * h) * len;
        }
    }
    return m;
}

double TemperatureControl::patched(const Vec2& x, double t) const {
    const Coeff4 g = patched_coeffs(t);
    if (g == Coeff4{}) return 0.0;
    double s = 0.0;
    for (int j = 0; j < 4; ++j) s += g[j] * basis_value(j, x);
    return U_->cutoffs().mu(x) * s;
}

double TemperatureControl::value(const Vec2& x, double t) const {
    const Cutoffs& cut = U_->cutoffs();
    const Jet f1 = cut.mu_factor(x[0], 0), f2 = cut.mu_factor(x[1], 1);
    const double mu = f1.t[0] * f2.t[0];
    const double mu1 = f1.t[1] * f2.t[0], mu2 = f1.t[0] * f2.t[1];
    if (mu == 0.0 && mu1 == 0.0 && mu2 == 0.0) return 0.0;
    const Coeff4 g = patched_coeffs(t);
    double v = 0.0;
    for (int j = 0; j < 4; ++j) v += g[j] * basis_value(j, x);
    v *= mu;
    if (!corrected_) return v;
    const double M = cut.mass();
    const double m = mass(t);
    v -= patched_mean(t) * mu / M;
    if (m != 0.0) {
        const Vec2 u = U_->velocity(x, t);
        v -= m / M * (u[0] * mu1 + u[1] * mu2);
    }
    return v;
}

std::array<double, 10> TemperatureControl::coefficients(double t) const {
    std::array<double, 10> c{};
    const Coeff4 g = patched_coeffs(t);
    for (int j = 0; j < 4; ++j) c[j] = g[j];
    if (!corrected_) return c;
    const double r = -mass(t) / U_->cutoffs().mass();
    const Coeff4 w = U_->weights(t);
    for (int j = 0; j < 4; ++j) c[4 + j] = r * w[j];
    const Vec2 y = U_->ybar(t);
    c[8] = r * y[0];
    c[9] = r * y[1];
    return c;
}

const std::vector<SpectralField>& TemperatureControl::generator_fields(int n) const {
    std::lock_guard<std::mutex> lock(cache_->mu);
    auto it = cache_->fields.find(n);
    if (it != cache_->fields.end()) return *it->second;
    auto v = std::make_shared<std::vector<SpectralField>>(temperature_basis(U_->cutoffs(), n).scalars);
    v->push_back(U_->cutoffs().mu_field(n));
    cache_->fields[n] = v;
    return *v;
}

SpectralField TemperatureControl::field(int n, double t) const {
    const auto& B = generator_fields(n);
    const auto c = coefficients(t);
    SpectralField f(n);
    for (int k = 0; k < 10; ++k)
        if (c[k] != 0.0) f.axpy(c[k], B[k]);
    // the list carries mu e_j - mu M_j / int mu; put the mean back when uncorrected
    if (!corrected_) f.axpy(patched_mean(t) / U_->cutoffs().mass(), B[10]);
    return f;
}

std::vector<double> TemperatureControl::breakpoints() const {
    std::vector<double> b = U_->breakpoints();
    for (int i = 0; i < U_->grid().M; ++i)
        for (double s : g_.breakpoints()) b.push_back(U_->grid().ta[i] + s);
    std::sort(b.begin(), b.end());
    b.erase(std::unique(b.begin(), b.end(), [](double p, double q) { return std::abs(p - q) < 1e-14; }), b.end());
    return b;
}

TemperatureControl patch_control(const DriftProgram& U, const GStar& g) { return TemperatureControl(U, g, 0.0, false); }

TemperatureControl zero_mean_correction(const DriftProgram& U, const GStar& g, double v0_mean) {
    return TemperatureControl(U, g, v0_mean, true);
}

// ---------------------------------------------------------------------------

AverageProfiles::AverageProfiles(const ControlRegion& omega, double gap) : omega_(omega) {
    if (!omega.strips) throw GeometryError("average profiles need the strips of the control region");
    h_ = omega.strip_halfwidth - gap;
    if (!(h_ > 0.0)) throw GeometryError("average profiles: strip too narrow");
    norm_ = kBumpNorm;
}

Jet AverageProfiles::profile(double u) const {
    // 2pi * bump(u/h) / (h Z): mean one over the circle
    Jet s = Jet::variable(wrap_centered(u) / h_, 1.0 / h_);
    return (kTwoPi / (h_ * norm_)) * bump_unnormalized(s);
}

Vec2 AverageProfiles::lambda(const Vec2& x) const { return {profile(x[0] - omega_.center[0]).value(), 0.0}; }
Vec2 AverageProfiles::sigma(const Vec2& x) const { return {0.0, profile(x[1] - omega_.center[1]).value()}; }

VectorField AverageProfiles::lambda_field(int n) const {
    return VectorField(SpectralField::sample(n, [this](double a, double b) { return lambda({a, b})[0]; }),
                       SpectralField(n));
}

VectorField AverageProfiles::sigma_field(int n) const {
    return VectorField(SpectralField(n),
                       SpectralField::sample(n, [this](double a, double b) { return sigma({a, b})[1]; }));
}

AverageProfiles average_profiles(const ControlRegion& omega) { return AverageProfiles(omega); }

// ---------------------------------------------------------------------------

std::array<double, 10> temperature_generators(const Cutoffs& cut, const Vec2& x) {
    std::array<double, 10> g{};
    const auto D = cut.mu_derivs(x);
    if (D[0][0] == 0.0 && D[1][0] == 0.0 && D[0][1] == 0.0) return g;
    const auto& mom = cut.trig_moments();
    const double Me[4] = {mom[0], mom[2], mom[1], mom[3]};
    const double M = cut.mass();
    const StreamTable E = window_stream_table(cut, x);
    for (int j = 0; j < 4; ++j) {
        g[j] = D[0][0] * (basis_value(j, x) - Me[j] / M);
        g[4 + j] = E[j][0][1] * D[1][0] - E[j][1][0] * D[0][1];
    }
    g[8] = D[1][0];
    g[9] = D[0][1];
    return g;
}

std::array<Vec2, 34> velocity_generators(const Cutoffs& cut, const AverageProfiles& av, const Vec2& x) {
    std::array<Vec2, 34> g{};
    g[0] = av.lambda(x);
    g[1] = av.sigma(x);
    const StreamTable E = window_stream_table(cut, x);
    for (int j = 0; j < 4; ++j) {
        const auto& P = E[j];
        g[2 + j] = {P[1][1], -P[2][0]};
        g[6 + j] = {P[0][2], -P[1][1]};
        g[10 + j] = {P[0][1], -P[1][0]};
        g[14 + j] = {P[2][1] + P[0][3], -(P[3][0] + P[1][2])};
    }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
            const auto& A = E[a];
            const auto& B = E[b];
            const double w1 = A[0][1], w2 = -A[1][0];
            g[18 + 4 * a + b] = {w1 * B[1][1] + w2 * B[0][2], -(w1 * B[2][0] + w2 * B[1][1])};
        }
    return g;
}

namespace {
void finish_basis(ControlBasis& B, const ControlRegion& omega, int n, int comps) {
    const auto pts = grid_points(n);
    const std::size_t np = pts.size();
    const Eigen::Index K = static_cast<Eigen::Index>(B.grid.size());
    Eigen::MatrixXd S(static_cast<Eigen::Index>(np * comps), K);
    double peak = 0.0, outside = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
        for (std::size_t r = 0; r < np * comps; ++r) {
            const double v = B.grid[k][r];
            S(static_cast<Eigen::Index>(r), k) = v;
            peak = std::max(peak, std::abs(v));
            if (!omega.contains(pts[r % np])) outside = std::max(outside, std::abs(v));
        }
        const double nk = S.col(k).norm();
        if (nk > 0.0) S.col(k) /= nk;
    }
    B.outside_ratio = peak > 0.0 ? outside / peak : 0.0;
    const Eigen::MatrixXd G = S.transpose() * S;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
    B.gram_min_eig = es.eigenvalues()(0);
    B.gram_cond = es.eigenvalues()(K - 1) / std::max(B.gram_min_eig, 1e-300);
}
} // namespace

ControlBasis temperature_basis(const Cutoffs& cut, int n) {
    ControlBasis B;
    B.labels = {"mu*sin(x1)~", "mu*sin(x2)~", "mu*cos(x1)~", "mu*cos(x2)~", "W[sin x1].grad mu", "W[sin x2].grad mu",
                "W[cos x1].grad mu", "W[cos x2].grad mu", "d1 mu", "d2 mu"};
    const auto pts = grid_points(n);
    B.grid.assign(10, std::vector<double>(pts.size()));
    for (std::size_t r = 0; r < pts.size(); ++r) {
        const auto g = temperature_generators(cut, pts[r]);
        for (int k = 0; k < 10; ++k) B.grid[k][r] = g[k];
    }
    for (int k = 0; k < 10; ++k) B.scalars.push_back(SpectralField::from_grid(B.grid[k], n));
    finish_basis(B, cut.region(), n, 1);
    return B;
}

ControlBasis velocity_basis(const Cutoffs& cut, const AverageProfiles& av, int n) {
    ControlBasis B;
    static const char* e[4] = {"sin x1", "sin x2", "cos x1", "cos x2"};
    B.labels = {"Lambda", "Sigma"};
    for (int j = 0; j < 4; ++j) B.labels.push_back(std::string("d1 W[") + e[j] + "]");
    for (int j = 0; j < 4; ++j) B.labels.push_back(std::string("d2 W[") + e[j] + "]");
    for (int j = 0; j < 4; ++j) B.labels.push_back(std::string("W[") + e[j] + "]");
    for (int j = 0; j < 4; ++j) B.labels.push_back(std::string("Lap W[") + e[j] + "]");
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) B.labels.push_back(std::string("(W[") + e[a] + "].grad) W[" + e[b] + "]");
    const auto pts = grid_points(n);
    const std::size_t np = pts.size();
    B.grid.assign(34, std::vector<double>(2 * np));
    for (std::size_t r = 0; r < np; ++r) {
        const auto g = velocity_generators(cut, av, pts[r]);
        for (int k = 0; k < 34; ++k) {
            B.grid[k][r] = g[k][0];
            B.grid[k][np + r] = g[k][1];
        }
    }
    for (int k = 0; k < 34; ++k) {
        std::vector<double> a(B.grid[k].begin(), B.grid[k].begin() + static_cast<long>(np));
        std::vector<double> b(B.grid[k].begin() + static_cast<long>(np), B.grid[k].end());
        B.vectors.emplace_back(SpectralField::from_grid(a, n), SpectralField::from_grid(b, n));
    }
    finish_basis(B, cut.region(), n, 2);
    return B;
}

std::array<double, 34> velocity_coefficients(const DriftProgram& U, double t, double delta, double nu) {
    std::array<double, 34> c{};
    const double i2 = 1.0 / (delta * delta), i1 = 1.0 / delta;
    const Vec2 yd = U.ybar_dot(t), y = U.ybar(t);
    c[0] = i2 * yd[0];
    c[1] = i2 * yd[1];
    const Coeff4 w = U.weights(t), wd = U.weights_dot(t);
    for (int j = 0; j < 4; ++j) {
        c[2 + j] = i2 * y[0] * w[j];
        c[6 + j] = i2 * y[1] * w[j];
        c[10 + j] = i2 * wd[j];
        c[14 + j] = -i1 * nu * w[j];
    }
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) c[18 + 4 * a + b] = i2 * w[a] * w[b];
    return c;
}

Vec2 velocity_force(const DriftProgram& U, const AverageProfiles& av, const Vec2& x, double t, double delta,
                    double nu) {
    const Vec2 yd = U.ybar_dot(t), y = U.ybar(t);
    const Vec2 L = av.lambda(x), S = av.sigma(x);
    Vec2 h{yd[0] * L[0] + yd[1] * S[0], yd[0] * L[1] + yd[1] * S[1]};
    const StreamTable E = window_stream_table(U.cutoffs(), x);
    Cutoffs::DerivTable P{}, Pt{};
    const Coeff4 w = U.weights(t), wd = U.weights_dot(t);
    for (int j = 0; j < 4; ++j)
        for (int a = 0; a <= 4; ++a)
            for (int b = 0; a + b <= 4; ++b) {
                P[a][b] += w[j] * E[j][a][b];
                Pt[a][b] += wd[j] * E[j][a][b];
            }
    // W = (P01, -P10)
    const double W1 = P[0][1], W2 = -P[1][0];
    const double d1W1 = P[1][1], d2W1 = P[0][2], d1W2 = -P[2][0], d2W2 = -P[1][1];
    const double a1 = y[0] + W1, a2 = y[1] + W2;
    h[0] += Pt[0][1] + a1 * d1W1 + a2 * d2W1;
    h[1] += -Pt[1][0] + a1 * d1W2 + a2 * d2W2;
    const double lap1 = P[2][1] + P[0][3], lap2 = -(P[3][0] + P[1][2]);
    return {h[0] / (delta * delta) - nu / delta * lap1, h[1] / (delta * delta) - nu / delta * lap2};
}

Projection project_onto(const ControlBasis& basis, const std::vector<double>& samples) {
    const Eigen::Index K = static_cast<Eigen::Index>(basis.grid.size());
    const Eigen::Index R = static_cast<Eigen::Index>(samples.size());
    Eigen::MatrixXd S(R, K);
    for (Eigen::Index k = 0; k < K; ++k) {
        if (static_cast<Eigen::Index>(basis.grid[k].size()) != R)
            throw std::invalid_argument("projection: sample length differs from the basis");
        for (Eigen::Index r = 0; r < R; ++r) S(r, k) = basis.grid[k][r];
    }
    const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(samples.data(), R);
    const Eigen::VectorXd x = S.colPivHouseholderQr().solve(b);
    Projection p;
    p.coeffs.assign(x.data(), x.data() + K);
    const double nb = b.norm();
    p.residual = nb > 0.0 ? (S * x - b).norm() / nb : (S * x).norm();
    return p;
}

int velocity_dimension(int d_omega) {
    const int q = (d_omega + 4) * (d_omega + 4);
    return 12 + 3 * d_omega + (q - 4 - d_omega) / 2;
}

// ---------------------------------------------------------------------------

double unit_bump(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return 2.0 / kBumpNorm * bump_unnormalized(Jet::variable(2.0 * s - 1.0)).value();
}

double unit_bump_cdf(double s) {
    if (s <= 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return bump_mass(-1.0, 2.0 * s - 1.0) / kBumpNorm;
}

double AverageTemperatureControl::rate(double t) const { return (tau1 - tau0) * unit_bump(t); }
double AverageTemperatureControl::mean(double t) const { return tau0 + (tau1 - tau0) * unit_bump_cdf(t); }
double AverageTemperatureControl::value(const Cutoffs& cut, const Vec2& x, double t) const {
    return rate(t) * cut.mu(x) / cut.mass();
}

AverageTemperatureControl temperature_average_control(double tau0, double tau1) { return {tau0, tau1}; }

SteeringSchedule average_steering_schedule(const Vec2& A0, const Vec2& A1, double tau0, double tau1) {
    SteeringSchedule s;
    // K = int_0^1 (1 - s) B(s) ds; 1/2 for a symmetric bump
    s.K = 0.5;
    s.l01 = -A0[0];
    s.l11 = A1[0];
    s.r0 = -tau0;
    s.r1 = tau1;
    s.l02 = -A0[1] - tau0 + tau0 * s.K;
    s.l12 = A1[1] - tau1 * s.K;
    return s;
}

std::array<double, 6> steering_residuals(const SteeringSchedule& s, const Vec2& A0, const Vec2& A1, double tau0,
                                         double tau1) {
    using boost::math::quadrature::gauss_kronrod;
    const double I = gauss_kronrod<double, 31>::integrate([](double t) { return unit_bump(t); }, 0.0, 1.0, 12, 1e-15);
    const double II =
        gauss_kronrod<double, 31>::integrate([](double t) { return unit_bump_cdf(t); }, 0.0, 1.0, 12, 1e-15);
    return {s.l01 * I + A0[0],
            s.l11 * I - A1[0],
            s.r0 * I + tau0,
            s.l02 * I + s.r0 * II + A0[1] + tau0,
            s.r1 * I - tau1,
            s.l12 * I + s.r1 * II - A1[1]};
}

} // namespace tbf
