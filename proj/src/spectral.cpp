#include "tbflow/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace tbf {

namespace {

struct PlanPair {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
};

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex g_plan_mutex;

const PlanPair& plans_for(int n) {
    static std::map<int, std::unique_ptr<PlanPair>> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return *it->second;
    auto p = std::make_unique<PlanPair>();
    const std::size_t nc = static_cast<std::size_t>(n) * (n / 2 + 1);
    double* r = fftw_alloc_real(static_cast<std::size_t>(n) * n);
    fftw_complex* c = fftw_alloc_complex(nc);
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p->fwd = fftw_plan_dft_r2c_2d(n, n, r, c, flags);
    p->inv = fftw_plan_dft_c2r_2d(n, n, c, r, flags | FFTW_DESTROY_INPUT);
    fftw_free(r);
    fftw_free(c);
    if (!p->fwd || !p->inv) throw std::runtime_error("FFTW planning failed");
    auto& ref = *p;
    cache.emplace(n, std::move(p));
    return ref;
}

void check_resolution(int n) {
    if (n < 4 || n % 2 != 0) throw std::invalid_argument("resolution must be even and >= 4");
}

void require_same(const SpectralField& a, const SpectralField& b) {
    if (a.n() != b.n()) throw std::invalid_argument("resolution mismatch");
}

} // namespace

SpectralField::SpectralField(int n) : n_(n) {
    check_resolution(n);
    coef_.assign(static_cast<std::size_t>(n) * (n / 2 + 1), cplx(0.0, 0.0));
}

cplx SpectralField::coef(int n1, int n2) const {
    if (n2 < 0) return std::conj(coef(-n1, -n2));
    if (n2 > n_ / 2 || std::abs(n1) > n_ / 2) return {0.0, 0.0};
    int row = ((n1 % n_) + n_) % n_;
    return at(row, n2);
}

void SpectralField::set_coef(int n1, int n2, cplx v) {
    if (n2 < 0) {
        n1 = -n1;
        n2 = -n2;
        v = std::conj(v);
    }
    if (n2 > n_ / 2 || std::abs(n1) > n_ / 2) throw std::out_of_range("wavenumber outside band");
    int row = ((n1 % n_) + n_) % n_;
    at(row, n2) = v;
    if (n2 == 0 || n2 == n_ / 2) {
        int mrow = ((-n1 % n_) + n_) % n_;
        at(mrow, n2) = std::conj(v);
    }
}

bool SpectralField::all_finite() const {
    return std::all_of(coef_.begin(), coef_.end(),
                       [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

void forward_transform(int n, const double* grid, cplx* coef) {
    const PlanPair& p = plans_for(n);
    fftw_execute_dft_r2c(p.fwd, const_cast<double*>(grid), reinterpret_cast<fftw_complex*>(coef));
    const double scale = 1.0 / (static_cast<double>(n) * n);
    const std::size_t nc = static_cast<std::size_t>(n) * (n / 2 + 1);
    for (std::size_t i = 0; i < nc; ++i) coef[i] *= scale;
}

void inverse_transform(int n, const cplx* coef, double* grid) {
    const PlanPair& p = plans_for(n);
    const std::size_t nc = static_cast<std::size_t>(n) * (n / 2 + 1);
    std::vector<cplx> work(coef, coef + nc);
    fftw_execute_dft_c2r(p.inv, reinterpret_cast<fftw_complex*>(work.data()), grid);
}

SpectralField SpectralField::from_grid(const std::vector<double>& values, int n) {
    if (values.size() != static_cast<std::size_t>(n) * n) throw std::invalid_argument("grid size mismatch");
    SpectralField f(n);
    forward_transform(n, values.data(), f.coef_.data());
    return f;
}

SpectralField SpectralField::sample(int n, const std::function<double(double, double)>& fn) {
    check_resolution(n);
    std::vector<double> g(static_cast<std::size_t>(n) * n);
    const double h = kTwoPi / n;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) g[static_cast<std::size_t>(i) * n + j] = fn(i * h, j * h);
    return from_grid(g, n);
}

std::vector<double> SpectralField::to_grid() const {
    std::vector<double> g(static_cast<std::size_t>(n_) * n_);
    inverse_transform(n_, coef_.data(), g.data());
    return g;
}

SpectralField& SpectralField::operator+=(const SpectralField& o) {
    require_same(*this, o);
    for (std::size_t i = 0; i < coef_.size(); ++i) coef_[i] += o.coef_[i];
    return *this;
}

SpectralField& SpectralField::operator-=(const SpectralField& o) {
    require_same(*this, o);
    for (std::size_t i = 0; i < coef_.size(); ++i) coef_[i] -= o.coef_[i];
    return *this;
}

SpectralField& SpectralField::operator*=(double s) {
    for (auto& z : coef_) z *= s;
    return *this;
}

void SpectralField::axpy(double s, const SpectralField& o) {
    require_same(*this, o);
    for (std::size_t i = 0; i < coef_.size(); ++i) coef_[i] += s * o.coef_[i];
}

SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
SpectralField operator*(double s, SpectralField a) { return a *= s; }

namespace {

// multiplies each coefficient by a function of the wavenumber
template <class F>
SpectralField apply_symbol(const SpectralField& f, F symbol) {
    SpectralField out(f.n());
    const int n = f.n();
    for (int r = 0; r < n; ++r)
        for (int c = 0; c <= n / 2; ++c) out.at(r, c) = f.at(r, c) * symbol(f.k1(r), f.k2(c));
    return out;
}

} // namespace

SpectralField d1(const SpectralField& f) {
    const int half = f.n() / 2;
    return apply_symbol(f, [half](int k1, int) { return k1 == half ? cplx(0.0) : cplx(0.0, k1); });
}

SpectralField d2(const SpectralField& f) {
    const int half = f.n() / 2;
    return apply_symbol(f, [half](int, int k2) { return k2 == half ? cplx(0.0) : cplx(0.0, k2); });
}

SpectralField laplacian(const SpectralField& f) {
    return apply_symbol(f, [](int k1, int k2) { return cplx(-double(k1 * k1 + k2 * k2), 0.0); });
}

SpectralField inverse_laplacian(const SpectralField& f) {
    return apply_symbol(f, [](int k1, int k2) {
        int k = k1 * k1 + k2 * k2;
        return k == 0 ? cplx(0.0) : cplx(-1.0 / k, 0.0);
    });
}

SpectralField dealias(const SpectralField& f) {
    const int cut = f.n() / 3;
    return apply_symbol(f, [cut](int k1, int k2) {
        return (std::abs(k1) <= cut && std::abs(k2) <= cut) ? cplx(1.0) : cplx(0.0);
    });
}

SpectralField constant_field(int n, double value) {
    SpectralField f(n);
    f.at(0, 0) = value;
    return f;
}

VectorField grad_perp(const SpectralField& phi) {
    SpectralField a = d2(phi);
    SpectralField b = d1(phi);
    b *= -1.0;
    return VectorField(std::move(a), std::move(b), true);
}

VectorField gradient(const SpectralField& phi) { return VectorField(d1(phi), d2(phi), false); }

VectorField upsilon(const SpectralField& z, const Vec2& mean) {
    const double scale = sobolev_norm(z, 0);
    if (std::abs(z.mean()) > 1e-12 * scale)
        throw std::domain_error("upsilon: vorticity must have zero mean");
    SpectralField phi = inverse_laplacian(z);
    phi *= -1.0; // Lap(phi) = -z
    VectorField u = grad_perp(phi);
    u.c1.at(0, 0) = mean[0];
    u.c2.at(0, 0) = mean[1];
    u.divergence_free = true;
    return u;
}

SpectralField curl(const VectorField& u) { return d1(u.c2) - d2(u.c1); }

SpectralField divergence(const VectorField& u) { return d1(u.c1) + d2(u.c2); }

SpectralField multiply(const SpectralField& a, const SpectralField& b) {
    require_same(a, b);
    std::vector<double> ga = a.to_grid(), gb = b.to_grid();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= gb[i];
    return SpectralField::from_grid(ga, a.n());
}

SpectralField advect(const VectorField& u, const SpectralField& f) {
    require_same(u.c1, f);
    const int n = f.n();
    SpectralField fd = dealias(f);
    std::vector<double> u1 = dealias(u.c1).to_grid(), u2 = dealias(u.c2).to_grid();
    std::vector<double> g1 = d1(fd).to_grid(), g2 = d2(fd).to_grid();
    for (std::size_t i = 0; i < u1.size(); ++i) u1[i] = u1[i] * g1[i] + u2[i] * g2[i];
    return dealias(SpectralField::from_grid(u1, n));
}

VectorField advect_vector(const VectorField& u, const VectorField& w) {
    return VectorField(advect(u, w.c1), advect(u, w.c2), false);
}

double sobolev_norm(const SpectralField& f, int m) {
    if (m < 0) throw std::invalid_argument("sobolev_norm: negative index");
    const int n = f.n();
    double s = 0.0;
    for (int r = 0; r < n; ++r) {
        const int k1 = f.k1(r);
        for (int c = 0; c <= n / 2; ++c) {
            const int k2 = c;
            // columns 1..N/2-1 stand for themselves and their conjugate partners
            const double mult = (c == 0 || c == n / 2) ? 1.0 : 2.0;
            const double w = std::pow(1.0 + k1 * k1 + k2 * k2, m);
            s += mult * w * std::norm(f.at(r, c));
        }
    }
    return std::sqrt(s);
}

double sobolev_norm(const VectorField& u, int m) {
    const double a = sobolev_norm(u.c1, m), b = sobolev_norm(u.c2, m);
    return std::sqrt(a * a + b * b);
}

double l2_grid_norm(const std::vector<double>& values) {
    double s = 0.0;
    for (double v : values) s += v * v;
    return values.empty() ? 0.0 : std::sqrt(s / static_cast<double>(values.size()));
}

double divergence_defect(const VectorField& u) {
    const int n = u.n();
    double num = 0.0, den = 0.0;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c <= n / 2; ++c) {
            const int k1 = u.c1.k1(r), k2 = c;
            cplx a = u.c1.at(r, c), b = u.c2.at(r, c);
            num = std::max(num, std::abs(double(k1) * a + double(k2) * b));
            den = std::max({den, std::abs(a), std::abs(b)});
        }
    return den == 0.0 ? 0.0 : num / den;
}

double evaluate(const SpectralField& f, double x1, double x2) { return evaluate_with_gradient(f, x1, x2)[0]; }

std::array<double, 3> evaluate_with_gradient(const SpectralField& f, double x1, double x2) {
    const int n = f.n();
    const int half = n / 2;
    // phase tables e^{i k x} for k = 0..N/2
    std::vector<cplx> e1(half + 1), e2(half + 1);
    for (int k = 0; k <= half; ++k) {
        e1[k] = std::polar(1.0, k * x1);
        e2[k] = std::polar(1.0, k * x2);
    }
    double v = 0.0, g1 = 0.0, g2 = 0.0;
    for (int r = 0; r < n; ++r) {
        const int k1 = f.k1(r);
        const cplx p1 = k1 >= 0 ? e1[k1] : std::conj(e1[-k1]);
        for (int c = 0; c <= half; ++c) {
            const double mult = (c == 0 || c == half) ? 1.0 : 2.0;
            const cplx term = f.at(r, c) * p1 * e2[c];
            v += mult * term.real();
            // Nyquist modes carry no derivative (same convention as d1/d2)
            if (k1 != half) g1 += mult * (cplx(0.0, k1) * term).real();
            if (c != half) g2 += mult * (cplx(0.0, c) * term).real();
        }
    }
    return {v, g1, g2};
}

double wrap(double x) {
    double y = std::fmod(x, kTwoPi);
    if (y < 0) y += kTwoPi;
    if (y >= kTwoPi) y -= kTwoPi;
    return y;
}

double wrap_centered(double x) {
    double y = wrap(x + kPi) - kPi;
    return y;
}

double torus_distance(const Vec2& a, const Vec2& b) {
    const double d1v = wrap_centered(a[0] - b[0]), d2v = wrap_centered(a[1] - b[1]);
    return std::hypot(d1v, d2v);
}

void write_tbfld(const std::string& path, const std::vector<SpectralField>& comps) {
    if (comps.empty()) throw std::invalid_argument("write_tbfld: no components");
    const int n = comps.front().n();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.write("TBFLD", 5);
    auto put_u32 = [&](std::uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v & 0xff), static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
        out.write(reinterpret_cast<const char*>(b), 4);
    };
    put_u32(static_cast<std::uint32_t>(n));
    put_u32(static_cast<std::uint32_t>(comps.size()));
    for (const auto& f : comps) {
        if (f.n() != n) throw std::invalid_argument("write_tbfld: mixed resolutions");
        for (double v : f.to_grid()) {
            std::uint64_t bits;
            std::memcpy(&bits, &v, 8);
            unsigned char b[8];
            for (int k = 0; k < 8; ++k) b[k] = static_cast<unsigned char>((bits >> (8 * k)) & 0xff);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    }
}

std::vector<SpectralField> read_tbfld(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    char magic[5];
    in.read(magic, 5);
    if (!in || std::string(magic, 5) != "TBFLD") throw std::runtime_error("not a TBFLD file: " + path);
    auto get_u32 = [&]() {
        unsigned char b[4];
        in.read(reinterpret_cast<char*>(b), 4);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    };
    const int n = static_cast<int>(get_u32());
    const std::uint32_t count = get_u32();
    std::vector<SpectralField> out;
    for (std::uint32_t c = 0; c < count; ++c) {
        std::vector<double> g(static_cast<std::size_t>(n) * n);
        for (auto& v : g) {
            unsigned char b[8];
            in.read(reinterpret_cast<char*>(b), 8);
            std::uint64_t bits = 0;
            for (int k = 0; k < 8; ++k) bits |= static_cast<std::uint64_t>(b[k]) << (8 * k);
            std::memcpy(&v, &bits, 8);
        }
        if (!in) throw std::runtime_error("truncated TBFLD file: " + path);
        out.push_back(SpectralField::from_grid(g, n));
    }
    return out;
}

} // namespace tbf
