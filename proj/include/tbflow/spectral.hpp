#pragma once
// Fourier field algebra on the 2pi-periodic square.
//
// Grid convention: value index i*N + j sits at x = (2pi i/N, 2pi j/N), so the
// first array axis is x1. Coefficients follow the r2c layout of that array:
// N rows (k1) by N/2+1 columns (k2 >= 0), normalized so that the (0,0)
// coefficient is the spatial mean.

#include <array>
#include <complex>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tbf {

using cplx = std::complex<double>;
using Vec2 = std::array<double, 2>;

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

class SpectralField {
public:
    SpectralField() = default;
    explicit SpectralField(int n);

    int n() const { return n_; }
    int cols() const { return n_ / 2 + 1; }
    std::size_t size() const { return coef_.size(); }

    cplx& at(int row, int col) { return coef_[static_cast<std::size_t>(row) * cols() + col]; }
    const cplx& at(int row, int col) const { return coef_[static_cast<std::size_t>(row) * cols() + col]; }
    std::vector<cplx>& data() { return coef_; }
    const std::vector<cplx>& data() const { return coef_; }

    // signed wavenumber of a row / column index
    int k1(int row) const { return row <= n_ / 2 ? row : row - n_; }
    int k2(int col) const { return col; }

    // coefficient of exp(i n.x) for any n in the stored band (uses conjugate symmetry)
    cplx coef(int n1, int n2) const;
    void set_coef(int n1, int n2, cplx v);

    double mean() const { return coef_.empty() ? 0.0 : coef_[0].real(); }
    bool all_finite() const;

    static SpectralField from_grid(const std::vector<double>& values, int n);
    static SpectralField sample(int n, const std::function<double(double, double)>& f);
    std::vector<double> to_grid() const;

    SpectralField& operator+=(const SpectralField& o);
    SpectralField& operator-=(const SpectralField& o);
    SpectralField& operator*=(double s);
    // this += s * o
    void axpy(double s, const SpectralField& o);

private:
    int n_ = 0;
    std::vector<cplx> coef_;
};

SpectralField operator+(SpectralField a, const SpectralField& b);
SpectralField operator-(SpectralField a, const SpectralField& b);
SpectralField operator*(double s, SpectralField a);

struct VectorField {
    SpectralField c1, c2;
    bool divergence_free = false;

    VectorField() = default;
    VectorField(SpectralField a, SpectralField b, bool div_free = false)
        : c1(std::move(a)), c2(std::move(b)), divergence_free(div_free) {}

    int n() const { return c1.n(); }
    Vec2 mean() const { return {c1.mean(), c2.mean()}; }
};

// grid <-> coefficient transforms on raw arrays (length N*N and N*(N/2+1))
void forward_transform(int n, const double* grid, cplx* coef);
void inverse_transform(int n, const cplx* coef, double* grid);

SpectralField d1(const SpectralField& f);
SpectralField d2(const SpectralField& f);
SpectralField laplacian(const SpectralField& f);
// solves Lap(phi) = f for zero-mean phi; the mean of f is ignored
SpectralField inverse_laplacian(const SpectralField& f);
// keeps |k1|,|k2| <= N/3
SpectralField dealias(const SpectralField& f);
SpectralField constant_field(int n, double value);

// Biot-Savart inverse: grad_perp(phi) + A with Lap(phi) = -z. Throws on nonzero mean.
VectorField upsilon(const SpectralField& z, const Vec2& mean = {0.0, 0.0});
SpectralField curl(const VectorField& u);
SpectralField divergence(const VectorField& u);
VectorField grad_perp(const SpectralField& phi);
VectorField gradient(const SpectralField& phi);
// U . grad f with 2/3-rule truncation of both factors and of the product
SpectralField advect(const VectorField& u, const SpectralField& f);
// (U . grad) W componentwise, same dealiasing as advect
VectorField advect_vector(const VectorField& u, const VectorField& w);
// product computed on the grid without truncation
SpectralField multiply(const SpectralField& a, const SpectralField& b);

// (sum (1+|n|^2)^m |f(n)|^2)^(1/2)
double sobolev_norm(const SpectralField& f, int m);
double sobolev_norm(const VectorField& u, int m);
double l2_grid_norm(const std::vector<double>& values);
// max_n |n . U(n)| relative to max_n |U(n)|
double divergence_defect(const VectorField& u);

// trigonometric interpolation at an arbitrary point (O(N^2) per call)
double evaluate(const SpectralField& f, double x1, double x2);
// same, with first derivatives
std::array<double, 3> evaluate_with_gradient(const SpectralField& f, double x1, double x2);

double wrap(double x);          // into [0, 2pi)
double wrap_centered(double x); // into [-pi, pi)
double torus_distance(const Vec2& a, const Vec2& b);

// TBFLD snapshots: "TBFLD", u32 N, u32 component count, row-major float64 grid values
void write_tbfld(const std::string& path, const std::vector<SpectralField>& comps);
std::vector<SpectralField> read_tbfld(const std::string& path);

} // namespace tbf
