#pragma once
// Characteristics and linear transport along drift programs.

#include <functional>
#include <vector>

#include "tbflow/drift.hpp"
#include "tbflow/spectral.hpp"

namespace tbf {

using VelocityFn = std::function<Vec2(const Vec2&, double)>;
using ScalarFn = std::function<double(const Vec2&, double)>;

class IntegrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Splits [s, t] (either orientation) at the breakpoints strictly inside and
// returns the node times of a stepping with at most dt per step per piece.
std::vector<double> step_nodes(double s, double t, double dt, const std::vector<double>& breaks);

// Classical RK4 for dPhi/dt = v(Phi, t), Phi(s) = x; backward when t < s.
Vec2 integrate_flow(const VelocityFn& v, const Vec2& x, double s, double t, double dt,
                    const std::vector<double>& breaks = {});

struct FlowEnsemble {
    std::vector<Vec2> seeds;
    double start = 0.0;
    std::vector<double> times;
    std::vector<std::vector<Vec2>> positions; // [time][seed]
};

// seed-parallel (OpenMP) and serial reference versions; identical results
FlowEnsemble flow_ensemble(const VelocityFn& v, const std::vector<Vec2>& seeds, double s,
                           const std::vector<double>& times, double dt, const std::vector<double>& breaks = {});
FlowEnsemble flow_ensemble_serial(const VelocityFn& v, const std::vector<Vec2>& seeds, double s,
                                  const std::vector<double>& times, double dt,
                                  const std::vector<double>& breaks = {});

// Method of characteristics with Duhamel forcing:
//   V(x, t1) = v0(Phi(x, t1, t0)) + int_{t0}^{t1} g(Phi(x, t1, s), s) ds
// Backward RK4 for the characteristic, Simpson's rule per step with a cubic
// Hermite midpoint. g may be piecewise in time; it is sampled just inside each
// step so that breakpoints pick the correct piece.
std::vector<double> transport_characteristics(const VelocityFn& v, const ScalarFn& v0, const ScalarFn& g, double t0,
                                              double t1, const std::vector<Vec2>& probes, double dt,
                                              const std::vector<double>& breaks = {}, bool parallel = true);

// grid points of an n x n grid in storage order
std::vector<Vec2> grid_points(int n);

// A drift seen through its spectral samples.
struct SpectralDrift {
    std::function<VectorField(double)> velocity;
    std::function<SpectralField(double)> vorticity; // curl of velocity
    std::vector<double> breaks;
};
SpectralDrift spectral_drift(const DriftProgram& U, int n);
SpectralDrift spectral_drift(const GeneratingDrift& g, int n);
SpectralDrift constant_drift(const Vec2& c, int n);

using FieldFn = std::function<SpectralField(double)>; // an empty field (n() == 0) means zero

struct SpectralTransportOptions {
    double dt_max = 1e-3;
    double cfl = 0.5;
    double dt_min = 1e-10;
    // exp(-36 (|k|/kmax)^36) after each step; off by default
    bool filter = false;
};

using TransportObserver = std::function<void(double, const SpectralField&)>;

// dV/dt + (U.grad)V = g, dealiased pseudospectral RK4 with steps aligned to drift.breaks
SpectralField transport_spectral(const SpectralDrift& drift, SpectralField v0, const FieldFn& g, double t0, double t1,
                                 const SpectralTransportOptions& opt = {}, const TransportObserver& obs = nullptr);

// dV/dt + (U.grad)V + (Upsilon(V, B).grad) curl U = f
SpectralField convect_stretching(const SpectralDrift& drift, SpectralField v0, const std::function<Vec2(double)>& B,
                                 const FieldFn& f, double t0, double t1, const SpectralTransportOptions& opt = {},
                                 const TransportObserver& obs = nullptr);

} // namespace tbf
