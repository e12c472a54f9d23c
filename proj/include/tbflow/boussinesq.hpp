#pragma once
// Vorticity-temperature Boussinesq solver with prescribed velocity average,
// the scaled control run on [0, delta] and the linear limit system on [0, 1].
//
//   d_t w - nu Lap w + (u.grad) w = d_1 theta + h1
//   d_t theta - tau Lap theta + (u.grad) theta = h2
//   u = Upsilon(w, mean(t))
//
// Integrating-factor RK3: the diffusion is exact, the rest is Kutta's third
// order scheme.

#include <functional>
#include <string>
#include <vector>

#include "tbflow/drift.hpp"
#include "tbflow/flow.hpp"

namespace tbf {

struct Physics {
    double nu = 0.01;
    double tau = 0.01;
};

struct SolverConfig {
    int n = 64;
    double dt_max = 1e-3;
    double cfl = 0.5;
    int max_halvings = 16;
    bool dealias = true;
};

struct BoussinesqState {
    double t = 0.0;
    SpectralField w, theta;
};

using MeanFn = std::function<Vec2(double)>;

struct ForcingProgram {
    FieldFn h1, h2; // empty: zero
    MeanFn mean;    // velocity average; empty: zero
    std::vector<double> breaks;
};

class InstabilityError : public std::runtime_error {
public:
    InstabilityError(const std::string& msg, BoussinesqState last, long step)
        : std::runtime_error(msg), last(std::move(last)), step(step) {}
    BoussinesqState last;
    long step;
};

struct SolveStats {
    long steps = 0;
    long halvings = 0;
    double max_courant = 0.0;
};

using StateObserver = std::function<void(const BoussinesqState&)>;

BoussinesqState resolve(const BoussinesqState& s0, const ForcingProgram& f, const Physics& ph, const SolverConfig& cfg,
                        double t1, const StateObserver& obs = nullptr, SolveStats* stats = nullptr);

// velocity of a state
VectorField velocity(const BoussinesqState& s, const Vec2& mean);

// ---------------------------------------------------------------------------
// Scaled control run and its limit. Everything indexed by s lives on [0, 1]
// (limit time); the solver sees t = delta s.

struct ScaledControl {
    const DriftProgram* U = nullptr;
    double delta = 0.1;
    Vec2 A{0.0, 0.0};
    FieldFn zeta;                         // zeta_delta(s), temperature control of the limit system
    std::function<double(double)> zeta_mean; // int zeta_delta(., s); empty: zero
    FieldFn curl_b;                        // curl b(s); empty: zero
    MeanFn b_mean;                         // int b(., s); empty: zero
    std::vector<double> breaks;            // extra limit-time breakpoints (control intervals)
    int steps_per_unit = 4480;             // solver steps per unit of limit time
};

// B_delta(s) = A + int_0^s int b + e2 delta^-1 int_0^s int vartheta,
// with int vartheta(s) = delta int theta0 + int_0^s int zeta
MeanFn limit_mean(const ScaledControl& sc, double theta0_mean);

// forcing seen by the solver: h + delta^-2 H11 + delta^-1 nu H12 + curl b_delta, delta^-2 zeta_delta
ForcingProgram scaled_forcing(const ScaledControl& sc, const Physics& ph, int n, double theta0_mean,
                              const FieldFn& h1 = nullptr, const FieldFn& h2 = nullptr);

struct ScaledRun {
    BoussinesqState end;
    Vec2 end_mean{};
    SolveStats stats;
};

ScaledRun run_scaled_control(const ScaledControl& sc, const BoussinesqState& s0, const Physics& ph,
                             const SolverConfig& cfg, const FieldFn& h1 = nullptr, const FieldFn& h2 = nullptr,
                             const StateObserver& obs = nullptr);

struct LimitSolution {
    SpectralField v, vartheta; // at s = 1
    Vec2 B{};
};

// Same RK3 and step grid as the scaled run, without diffusion.
LimitSolution solve_limit_system(const ScaledControl& sc, const SpectralField& w0, const SpectralField& theta0,
                                 int n);

// ||w - v||_{m-1} + ||theta - delta^-1 vartheta||_m
double limit_gap(const BoussinesqState& end, const LimitSolution& lim, double delta, int m);

// ---------------------------------------------------------------------------
// diagnostics

struct Diagnostics {
    double t = 0.0;
    double energy = 0.0;    // 1/2 int |u|^2
    double enstrophy = 0.0; // 1/2 int w^2
    double theta_l2 = 0.0;
    double w_mean = 0.0, theta_mean = 0.0;
    double max_speed = 0.0;
};
Diagnostics diagnose(const BoussinesqState& s, const Vec2& mean);

// CSV writer for a diagnostic series
void write_diagnostics_csv(const std::string& path, const std::vector<Diagnostics>& rows);

// checkpoints: w and theta as a two-component snapshot
void write_checkpoint(const std::string& path, const BoussinesqState& s);
BoussinesqState read_checkpoint(const std::string& path, double t = 0.0);

} // namespace tbf
