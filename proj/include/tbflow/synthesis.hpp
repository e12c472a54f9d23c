#pragma once
// Transport control synthesis along the generating drift, its localized
// rearrangement along the convection profile, the zero-mean correction and the
// finite generator lists for temperature and velocity forces.

#include <array>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tbflow/drift.hpp"
#include "tbflow/flow.hpp"

namespace tbf {

class SynthesisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ColumnMethod { Spectral, Characteristics };

struct SynthesisProblem {
    GeneratingDrift drift;
    SpectralField v0, v1;
    int nt = 32;               // piecewise-constant intervals on [T*/2, T*]
    double lambda_rel = 1e-15; // Tikhonov weight relative to sigma_max^2
    int n_obs = 8;             // observed modes |n|_inf <= n_obs
    int m = 1;                 // Sobolev weight of the observation
    int steps_per_period = 512;
    ColumnMethod method = ColumnMethod::Spectral;
    bool parallel = true;
};

// g*(x, t) = sum_k c_k(t) g_k(x), g = {sin x1, sin x2, cos x1, cos x2}, c piecewise constant
struct GStar {
    double tstar = 0.0;
    int nt = 0;
    std::vector<Coeff4> c;

    // diagnostics of the least-squares solve (observed, H^m-weighted)
    double residual = 0.0, target_norm = 0.0;
    double sigma_max = 0.0, sigma_min = 0.0, lambda = 0.0;
    double max_coefficient = 0.0;

    double interval() const { return 0.5 * tstar / nt; }
    int interval_at(double t) const; // -1 outside [T*/2, T*)
    Coeff4 at(double t) const;
    double value(const Vec2& x, double t) const;
    std::vector<double> breakpoints() const;
    GStar scaled(double s) const;
};

// Columns of the control-to-final-state map, kept so that several targets can
// reuse them.
struct SynthesisOperator {
    SynthesisProblem problem;
    SpectralField free_final;             // v0 transported to T* without forcing
    std::vector<SpectralField> columns;   // final states, index 4*q + k
    Eigen::MatrixXd A;                    // observation of the columns
    Eigen::JacobiSVD<Eigen::MatrixXd> svd;
};

SynthesisOperator build_synthesis_operator(const SynthesisProblem& p);
// serial reference of the column assembly (same numbers as the OpenMP path)
std::vector<SpectralField> synthesis_columns_serial(const SynthesisProblem& p);
Eigen::VectorXd observe(const SpectralField& f, int n_obs, int m);
// defect: v1 - free_final for the problem's own target
GStar solve_synthesis(const SynthesisOperator& op, const SpectralField& defect);
GStar synthesize_gstar(const SynthesisProblem& p);
// final state predicted by the discrete map for control g
SpectralField predicted_final(const SynthesisOperator& op, const GStar& g);

// Temperature control on [0, 1]: the patched control mu * g*(x - S_i, t - ta_i)
// inside the windows and, when corrected, the zero-mean modification that keeps
// int V = 0 along the way.
class TemperatureControl {
public:
    TemperatureControl(const DriftProgram& U, GStar g, double v0_mean, bool corrected);

    const DriftProgram& program() const { return *U_; }
    const GStar& gstar() const { return g_; }
    bool corrected() const { return corrected_; }

    // e-basis coefficients of the patched control
    Coeff4 patched_coeffs(double t) const;
    double patched_mean(double t) const; // int G~(., t)
    double mass(double t) const;         // int v0 + int_0^t int G~

    double patched(const Vec2& x, double t) const;
    double value(const Vec2& x, double t) const; // G if corrected, else G~
    // coefficients on the temperature generator list
    std::array<double, 10> coefficients(double t) const;
    SpectralField field(int n, double t) const;
    std::vector<double> breakpoints() const;

private:
    const DriftProgram* U_;
    GStar g_;
    double v0_mean_;
    bool corrected_;
    std::array<double, 4> moments_{}; // int mu e_j, e-basis order
    std::vector<double> mass_at_window_start_;
    // generator fields per resolution, shared between copies
    struct FieldCache {
        std::mutex mu;
        std::map<int, std::shared_ptr<const std::vector<SpectralField>>> fields;
    };
    std::shared_ptr<FieldCache> cache_ = std::make_shared<FieldCache>();
    const std::vector<SpectralField>& generator_fields(int n) const;
};

TemperatureControl patch_control(const DriftProgram& U, const GStar& g);
TemperatureControl zero_mean_correction(const DriftProgram& U, const GStar& g, double v0_mean);

// Average profiles: curl-free, supported in the strips, means e1 and e2.
class AverageProfiles {
public:
    AverageProfiles() = default;
    explicit AverageProfiles(const ControlRegion& omega, double gap = 0.05);

    Vec2 lambda(const Vec2& x) const;
    Vec2 sigma(const Vec2& x) const;
    Jet profile(double u) const; // 2pi * bump(u), unit mean on the circle
    VectorField lambda_field(int n) const;
    VectorField sigma_field(int n) const;
    double halfwidth() const { return h_; }

private:
    ControlRegion omega_;
    double h_ = 0.0, norm_ = 1.0;
};

AverageProfiles average_profiles(const ControlRegion& omega);

// Spatial generator lists. Temperature: 10 scalars; velocity: 34 vector fields.
struct ControlBasis {
    std::vector<std::string> labels;
    std::vector<SpectralField> scalars;   // temperature list
    std::vector<VectorField> vectors;     // velocity list
    std::vector<std::vector<double>> grid; // exact grid samples, components stacked
    double gram_min_eig = 0.0, gram_cond = 0.0;
    double outside_ratio = 0.0; // max |value| outside omega / peak
    std::size_t size() const { return labels.size(); }
};

std::array<double, 10> temperature_generators(const Cutoffs& cut, const Vec2& x);
std::array<Vec2, 34> velocity_generators(const Cutoffs& cut, const AverageProfiles& av, const Vec2& x);
ControlBasis temperature_basis(const Cutoffs& cut, int n);
ControlBasis velocity_basis(const Cutoffs& cut, const AverageProfiles& av, int n);

// coefficients of the velocity force xi = d^-2 Hbar - d^-1 nu Lap U on the 34 generators
std::array<double, 34> velocity_coefficients(const DriftProgram& U, double t, double delta, double nu);
// xi evaluated directly from the summed stream function (independent of the list)
Vec2 velocity_force(const DriftProgram& U, const AverageProfiles& av, const Vec2& x, double t, double delta,
                    double nu);

struct Projection {
    std::vector<double> coeffs;
    double residual = 0.0; // relative l2 on the grid
};
Projection project_onto(const ControlBasis& basis, const std::vector<double>& samples);

constexpr int kVelocityGenerators = 34;
constexpr int kTemperatureGenerators = 10;
// 12 + 3 D + ((D + 4)^2 - 4 - D)/2 with D = dim of the flushing space
int velocity_dimension(int d_omega);

// Temperature-average add-on: zeta = tau(t) mu / int mu with int_0^1 tau = tau1 - tau0.
struct AverageTemperatureControl {
    double tau0 = 0.0, tau1 = 0.0;
    double rate(double t) const;             // tau(t)
    double mean(double t) const;             // tau0 + int_0^t tau
    double value(const Cutoffs& cut, const Vec2& x, double t) const;
};
AverageTemperatureControl temperature_average_control(double tau0, double tau1);

// Smooth unit-mass bump on (0,1) and its running integral.
double unit_bump(double s);
double unit_bump_cdf(double s);

struct SteeringSchedule {
    double l01 = 0, l02 = 0, l11 = 0, l12 = 0, r0 = 0, r1 = 0; // amplitudes of unit_bump
    double K = 0.5; // int_0^1 int_0^t bump
};
SteeringSchedule average_steering_schedule(const Vec2& A0, const Vec2& A1, double tau0, double tau1);
// the six constraint residuals, evaluated by quadrature
std::array<double, 6> steering_residuals(const SteeringSchedule& s, const Vec2& A0, const Vec2& A1, double tau0,
                                         double tau1);

} // namespace tbf
