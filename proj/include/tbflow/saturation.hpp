#pragma once
// Exact trigonometric algebra of the quadratic terms (Upsilon(q).grad) q and
// the representation of single modes as q0 + sum_i (Upsilon(q_i).grad) q_i
// with q0, q_i built from E0 = {sin(n.x), cos(n.x) : n1 >= 1, n2 >= 0}.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tbflow/spectral.hpp"

namespace tbf {

enum class Parity { Sin, Cos };

struct TrigMode {
    int n1 = 1, n2 = 0;
    Parity parity = Parity::Sin;
    double coef = 1.0;
};

// canonical half plane: n1 > 0, or n1 == 0 and n2 > 0
bool canonical(int n1, int n2);
// same function written on a canonical wavenumber
TrigMode canonicalize(const TrigMode& m);
bool in_e0(int n1, int n2);

// Sparse real trigonometric polynomial on canonical wavenumbers (no mean term).
class TrigPoly {
public:
    TrigPoly() = default;
    TrigPoly(const TrigMode& m) { add(m); }

    void add(const TrigMode& m);
    void add(const TrigPoly& p, double s = 1.0);
    double sin_coef(int n1, int n2) const;
    double cos_coef(int n1, int n2) const;
    std::vector<TrigMode> modes(double tol = 0.0) const;
    double l2() const; // sqrt(sum (S^2 + C^2)/2): the normalized L2 norm
    int max_degree() const;
    bool empty() const { return c_.empty(); }

    SpectralField to_field(int n) const;
    static TrigPoly from_field(const SpectralField& f, int band, double tol = 0.0);
    // d_1^{-1}: requires n1 != 0 on every term
    TrigPoly x1_primitive() const;

private:
    // (n1, n2) -> (sin, cos)
    std::map<std::pair<int, int>, std::pair<double, double>> c_;
};

// (Upsilon(q_a).grad) q_b, exact
TrigPoly advect_pair(const TrigMode& a, const TrigMode& b);
// (Upsilon(q_a).grad) q_b + (Upsilon(q_b).grad) q_a
TrigPoly bilinear_expand(const TrigMode& a, const TrigMode& b);
// (Upsilon(q).grad) q, exact
TrigPoly self_advection(const TrigPoly& q);

class SaturationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ModeCombo {
    TrigMode target;       // canonical
    int depth = 0;         // 0: target in E0, 1: one quadratic interaction
    std::pair<int, int> a{0, 0}, b{0, 0}; // interacting wavenumbers when depth 1
    TrigPoly q0;
    std::vector<TrigPoly> q;
    double residual = 0.0; // exact sparse check
};

// Search over E0 pairs a - b = n with |a|,|b|_inf <= search_band, ordered by
// (max degree, a1, a2); |a| != |b| and a x b != 0 are required.
ModeCombo represent_mode(const TrigMode& target, int search_band);

struct CoverageRow {
    int n1 = 0, n2 = 0;
    int depth = -1; // -1 unreachable
    double residual = 0.0;
};
std::vector<CoverageRow> saturation_closure(int band, int search_band);

struct StagingPlan {
    int band = 0;
    TrigPoly q0, Q0;
    std::vector<TrigPoly> q, Q; // Q_i = d_1^{-1} q_i
    double out_of_band = 0.0;   // L2 norm of the defect beyond the band
    double residual = 0.0;      // || w0 - q0 - sum (Upsilon(q_i).grad) q_i - w1 || on the grid
};

// Plan for w1 = w0 - q0 - sum_i (Upsilon(q_i).grad) q_i
StagingPlan staging_plan(const SpectralField& w0, const SpectralField& w1, int band, int search_band,
                         double tol = 1e-13);

std::string plan_json(const StagingPlan& p);
StagingPlan plan_from_json(const std::string& text);
// grid defect of a plan, computed with the solver's dealiased advection at resolution n
double plan_defect(const StagingPlan& p, const SpectralField& w0, const SpectralField& w1);

} // namespace tbf
