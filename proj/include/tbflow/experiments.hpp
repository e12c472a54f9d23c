#pragma once
// Configuration, run artifacts and the end-to-end pipelines behind the CLI
// subcommands and the acceptance binary.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "tbflow/boussinesq.hpp"
#include "tbflow/saturation.hpp"
#include "tbflow/synthesis.hpp"

namespace tbf {

using json = nlohmann::json;

struct ExperimentConfig {
    // geometry
    double L = 3.5;
    ControlRegion omega;
    CutoffParams cutoff;
    // physics
    Physics physics;
    // discretization
    int N = 64;
    double dt_max = 1e-3;
    int steps_per_unit = 4480;   // solver steps per unit limit time in scaled runs
    int nt = 32;
    int n_obs = 8;
    double lambda_reg = 1e-15;
    int m = 1;
    int column_steps = 512;      // steps per T* for the synthesis columns
    int flow_steps = 512;        // steps per T* for characteristics
    ColumnMethod column_method = ColumnMethod::Spectral;
    // generating signals
    std::uint64_t seed = 7;
    int degree = 6;
    int envelope_power = 8;
    // scenario (mode lists, optionally snapshot paths)
    json v0 = json::array(), v1 = json::array();
    json w0 = json::array(), theta0 = json::array(), theta1 = json::array(), w1 = json::array();
    json q = json::array();
    Vec2 A0{0.0, 0.0};   // mean velocity of the initial state
    int band = 5;        // saturation band / staging band
    int search_band = 8; // saturation pair search
    // sweeps
    std::vector<double> deltas{0.2, 0.1, 0.05};
    std::vector<int> nt_sweep{8, 16, 32};
    int stages = 1;
    bool staged = false;
    bool average_stages = false;
    // output
    std::string out = "out";
    int jobs = 1;

    static ExperimentConfig defaults();
    static ExperimentConfig from_json(const json& j);
    static ExperimentConfig load(const std::string& path);
    json to_json() const;
    void validate() const;
};

// Field from a mode list [{"n":[n1,n2],"parity":"sin"|"cos","coef":c}] or {"path": "file.tbfld"}.
SpectralField field_from_spec(const json& spec, int n);
json modes_json(const std::vector<TrigMode>& modes);

// Everything built from the geometry and the signal seed.
struct Setup {
    ControlRegion omega;
    Covering cov;
    Cutoffs cut;
    TimeGrid tg;
    SignalFamily sig;
    double kappa = 0.0;
    GeneratingDrift gen;
    std::unique_ptr<DriftProgram> U;
    AverageProfiles av;
};
std::unique_ptr<Setup> make_setup(const ExperimentConfig& cfg);

// Output directory with manifest, report, series and fields.
class RunArtifact {
public:
    RunArtifact(std::string dir, const ExperimentConfig& cfg, std::string command);

    void check(const std::string& name, bool pass, double value, double tol, const std::string& note = "");
    json& report() { return report_; }
    std::string write_csv(const std::string& name, const std::vector<std::string>& header,
                          const std::vector<std::vector<double>>& rows);
    std::string write_fields(const std::string& name, const std::vector<SpectralField>& comps);
    std::string write_text(const std::string& name, const std::string& text);
    void finish();
    bool all_pass() const;
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::string command_;
    std::string started_;
    json config_;
    json report_;
    std::vector<std::string> files_;
};

// ---------------------------------------------------------------------------
// pipelines

struct GeometrySummary {
    int M = 0;
    double Tstar = 0.0, kappa = 0.0, mass = 0.0;
    double partition_residual = 0.0; // max |sum_i mu(x + S_i) - 1| on the grid
    double mu_outside = 0.0;         // max mu outside the reference square
    double chi_plateau_defect = 0.0; // max |chi - 1| on the r-neighbourhood of the square
    double r = 0.0;                  // measured neighbourhood radius
    bool covered = false;
};
GeometrySummary geometry_summary(const Setup& s, int n, int seeds = 500);

struct FlowIdentities {
    double symmetry = 0.0;    // Phi(x,0,t) vs Phi(x,0,T*-t) and Phi(x,0,T*) = x
    double composition = 0.0;
    double equivariance = 0.0;
    double window_symmetry = 0.0;
    double closure = 0.0;       // Phi^U(x,0,1) = x
    double block_closure = 0.0; // Phi^U(x,tc_{l-1},tc_l) = x
    double conjugation = 0.0;   // window conjugation identity
    int conjugation_seeds = 0;
};
FlowIdentities flow_identities(const Setup& s, int seeds, std::uint64_t rng_seed, int steps_per_window = 2048);

struct TransportOutcome {
    GStar g;
    double end_error = 0.0;       // ||V(1) - v1||_m / ||v1||_m (absolute when v1 = 0)
    double rearrangement_gap = 0.0;
    double mean_max = 0.0;        // max_t |int G(., t)|
    double synthesis_residual = 0.0;
    SpectralField V1;
};
struct TransportSettings {
    int nt = 32;
    bool check_rearrangement = true;
};
// reuses op when it matches (same drift, v0 resolution, nt)
TransportOutcome transport_pipeline(const Setup& s, const ExperimentConfig& cfg, const SpectralField& v0,
                                    const SpectralField& v1, const TransportSettings& ts,
                                    const SynthesisOperator* op = nullptr);
SynthesisProblem synthesis_problem(const Setup& s, const ExperimentConfig& cfg, const SpectralField& v0,
                                   const SpectralField& v1, int nt);
// V(., t1) along U with control G from v0, by characteristics on the n-grid
SpectralField transport_along_program(const Setup& s, const ExperimentConfig& cfg, const SpectralField& v0,
                                      const TemperatureControl& G, int n);

struct ContractReport {
    int dim_ft = 0, dim_fv = 0, d_v = 0;
    double ft_gram_min = 0.0, fv_gram_min = 0.0;
    double ft_projection = 0.0, fv_projection = 0.0; // worst relative residuals
    double outside = 0.0;                             // worst peak-relative value outside omega
    double mean_ft = 0.0;                             // worst |int F_t generator|
};
ContractReport control_contract(const Setup& s, const ExperimentConfig& cfg, const TemperatureControl& G,
                                int samples = 48);

// relative H^1 return errors of the stretching convection for the given data
std::vector<double> stretching_return(const Setup& s, const ExperimentConfig& cfg,
                                      const std::vector<SpectralField>& data);

struct ManufacturedReport {
    double error_single = 0.0;      // sin x1 data, N = cfg.N
    double error_coarse = 0.0, error_fine = 0.0; // broad-spectrum data at N/2 and N
    double decay_error = 0.0;       // w0 = sin x1, theta0 = 0
};
ManufacturedReport manufactured_check(int n, double dt);

struct ScalingPoint {
    double delta = 0.0;
    double gap = 0.0;
    double end_mean_norm = 0.0; // |aleph(delta) - B(1)|
    double seconds = 0.0;
};
std::vector<ScalingPoint> scaling_sweep(const Setup& s, const ExperimentConfig& cfg, const TemperatureControl& G,
                                        const SpectralField& w0, const SpectralField& theta0);

struct LscPoint {
    double delta = 0.0, gap1 = 0.0, gap2 = 0.0, remainder2 = 0.0;
};
std::vector<LscPoint> lsc_sweep(const ExperimentConfig& cfg, const SpectralField& w0, const SpectralField& theta0,
                                const SpectralField& q);

struct FullPoint {
    double delta = 0.0;
    double u_error = 0.0, theta_error = 0.0, combined = 0.0, relative = 0.0;
    double seconds = 0.0;
};
std::vector<FullPoint> temperature_demo(const Setup& s, const ExperimentConfig& cfg, const TemperatureControl& G,
                                        const SpectralField& w0, const Vec2& A0, const SpectralField& theta0,
                                        const SpectralField& theta1);

struct StagedPoint {
    double scale = 0.0;
    double defect = 0.0; // ||w_end - w1||_{m-1} / ||w1 - w0||_{m-1}
    std::vector<double> stage_errors;
};
std::vector<StagedPoint> staged_demo(const Setup& s, const ExperimentConfig& cfg, const SpectralField& w0,
                                     const SpectralField& theta0, const SpectralField& w1,
                                     const std::vector<double>& scales);

struct SaturationReport {
    int total = 0, covered = 0;
    double worst_exact = 0.0, worst_fft = 0.0;
    std::vector<CoverageRow> rows;
};
SaturationReport saturation_check(int band, int search_band, int n);

// ---------------------------------------------------------------------------
// CLI entry points; return the process exit code

int cmd_geometry(const ExperimentConfig& cfg);
int cmd_transport(const ExperimentConfig& cfg);
int cmd_scaling(const ExperimentConfig& cfg);
int cmd_lsc(const ExperimentConfig& cfg);
int cmd_full(const ExperimentConfig& cfg);
int cmd_saturation(const ExperimentConfig& cfg);
int cmd_selftest(const ExperimentConfig& cfg);

} // namespace tbf
