// Acceptance suite: one PASS/FAIL line per criterion AC1-AC12.
// Usage: acceptance [AC5 AC9 ...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tbflow/experiments.hpp"

using namespace tbf;

namespace {

struct Line {
    std::string id;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

std::vector<Line> lines;

std::string fmt(const char* f, double a) {
    char b[64];
    std::snprintf(b, sizeof b, f, a);
    return b;
}

bool decreasing(const std::vector<double>& v) {
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

std::string list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt("%.3e", v[i]);
    return s + "]";
}

} // namespace

int main(int argc, char** argv) {
    std::set<std::string> only(argv + 1, argv + argc);
    auto wanted = [&](const char* id) { return only.empty() || only.count(id); };
    auto run = [&](const char* id, const std::function<Line()>& f) {
        if (!wanted(id)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Line l;
        try {
            l = f();
        } catch (const std::exception& e) {
            l.pass = false;
            l.detail = std::string("exception: ") + e.what();
        }
        l.id = id;
        l.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s %s  %s  (%.1f s)\n", l.id.c_str(), l.pass ? "PASS" : "FAIL", l.detail.c_str(), l.seconds);
        std::fflush(stdout);
        lines.push_back(l);
    };

    const ExperimentConfig cfg = ExperimentConfig::defaults();
    const auto setup = make_setup(cfg);
    const Setup& s = *setup;
    const int N = cfg.N;

    // AC1-AC3 share one seed ensemble
    FlowIdentities fi;
    bool have_fi = false;
    auto identities = [&]() -> const FlowIdentities& {
        if (!have_fi) {
            fi = flow_identities(s, 200, 2024, 2048);
            have_fi = true;
        }
        return fi;
    };
    run("AC1", [&] {
        const auto& f = identities();
        const double worst = std::max({f.symmetry, f.composition, f.equivariance, f.window_symmetry});
        return Line{"", worst <= 1e-6,
                    "max identity error " + fmt("%.2e", worst) + " <= 1e-6 over 200 seeds (symmetry " +
                        fmt("%.1e", f.symmetry) + ", composition " + fmt("%.1e", f.composition) + ", shift " +
                        fmt("%.1e", f.equivariance) + ", window " + fmt("%.1e", f.window_symmetry) + ")"};
    });
    run("AC2", [&] {
        const auto& f = identities();
        const double worst = std::max(f.closure, f.block_closure);
        return Line{"", worst <= 1e-4,
                    "closure " + fmt("%.2e", f.closure) + ", block closure " + fmt("%.2e", f.block_closure) +
                        " <= 1e-4, 200 seeds, M = " + std::to_string(s.cov.M)};
    });
    run("AC3", [&] {
        const auto& f = identities();
        return Line{"", f.conjugation <= 1e-6 && f.conjugation_seeds > 0,
                    "conjugation error " + fmt("%.2e", f.conjugation) + " <= 1e-6 on " +
                        std::to_string(f.conjugation_seeds) + " orbit/window pairs meeting supp(mu)"};
    });

    // AC4-AC6 share the transport runs
    const SpectralField zero(N);
    const std::vector<std::pair<std::string, SpectralField>> targets{
        {"sin(x1+x2)", SpectralField::sample(N, [](double a, double b) { return std::sin(a + b); })},
        {"cos(2x1+x2)", SpectralField::sample(N, [](double a, double b) { return std::cos(2 * a + b); })}};
    std::vector<std::vector<double>> errors(targets.size());
    std::vector<double> target_seconds(targets.size(), 0.0);
    std::optional<TransportOutcome> first;
    bool have_transport = false;
    auto transport = [&] {
        if (have_transport) return;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const auto t0 = std::chrono::steady_clock::now();
            for (int nt : {8, 16, 32}) {
                TransportSettings ts;
                ts.nt = nt;
                ts.check_rearrangement = i == 0 && nt == 32;
                TransportOutcome o = transport_pipeline(s, cfg, zero, targets[i].second, ts);
                errors[i].push_back(o.end_error);
                if (ts.check_rearrangement) first = std::move(o);
            }
            target_seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        have_transport = true;
    };
    run("AC4", [&] {
        transport();
        const double g = first->rearrangement_gap;
        return Line{"", g <= 1e-3, "relative L2 gap " + fmt("%.2e", g) + " <= 1e-3 at N = 64"};
    });
    run("AC5", [&] {
        transport();
        bool ok = true;
        std::string d;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const bool t_ok = errors[i].back() <= 0.05 && decreasing(errors[i]);
            ok = ok && t_ok;
            d += targets[i].first + ": H1 errors (Nt 8,16,32) " + list(errors[i]) + fmt(" in %.0f s; ", target_seconds[i]);
        }
        return Line{"", ok, d + "need <= 0.05 at Nt = 32 and decreasing"};
    });
    run("AC6", [&] {
        transport();
        const TemperatureControl G = zero_mean_correction(*s.U, first->g, 0.0);
        const ContractReport c = control_contract(s, cfg, G);
        const double worst = std::max({c.ft_projection, c.fv_projection, c.outside});
        const bool ok = c.dim_ft == 10 && c.d_v == 33 && c.dim_fv == 34 && worst <= 1e-8;
        return Line{"", ok,
                    "dim F_t = " + std::to_string(c.dim_ft) + ", D_v = " + std::to_string(c.d_v) + " with " +
                        std::to_string(c.dim_fv) + " generators; projection F_t " + fmt("%.1e", c.ft_projection) +
                        ", F_v " + fmt("%.1e", c.fv_projection) + ", outside omega " + fmt("%.1e", c.outside) +
                        " (<= 1e-8)"};
    });
    run("AC7", [&] {
        const std::vector<SpectralField> data{
            SpectralField::sample(N, [](double a, double) { return std::sin(a); }),
            SpectralField::sample(N, [](double a, double b) { return std::cos(a + 2 * b); }),
            SpectralField::sample(N, [](double a, double b) {
                return 0.5 * std::sin(2 * a - b) + 0.3 * std::cos(3 * b) + 0.2 * std::sin(a + b);
            })};
        const auto e = stretching_return(s, cfg, data);
        const double worst = *std::max_element(e.begin(), e.end());
        return Line{"", worst <= 1e-3, "relative H1 return errors " + list(e) + " <= 1e-3"};
    });
    run("AC8", [&] {
        const ManufacturedReport m = manufactured_check(64, 1e-3);
        const double factor = m.error_coarse / m.error_fine;
        const bool ok = m.error_single <= 1e-6 && factor >= 100.0;
        return Line{"", ok,
                    "manufactured relative error " + fmt("%.2e", m.error_single) +
                        " <= 1e-6; broad-spectrum N=32 " + fmt("%.2e", m.error_coarse) + ", N=64 " +
                        fmt("%.2e", m.error_fine) + ", factor " + fmt("%.1f", factor) + " >= 100"};
    });

    const SpectralField w0 = field_from_spec(cfg.w0, N), th0 = field_from_spec(cfg.theta0, N),
                        th1 = field_from_spec(cfg.theta1, N);
    std::optional<TemperatureControl> G01;
    auto steering = [&]() -> const TemperatureControl& {
        if (!G01) {
            TransportSettings ts;
            ts.nt = cfg.nt;
            ts.check_rearrangement = false;
            const SynthesisOperator op = build_synthesis_operator(synthesis_problem(s, cfg, th0, th1, cfg.nt));
            const GStar g = solve_synthesis(op, th1 - op.free_final);
            G01.emplace(zero_mean_correction(*s.U, g, th0.mean()));
        }
        return *G01;
    };
    run("AC9", [&] {
        const auto pts = scaling_sweep(s, cfg, steering(), w0, th0);
        std::vector<double> gaps, secs;
        for (const auto& p : pts) {
            gaps.push_back(p.gap);
            secs.push_back(p.seconds);
        }
        return Line{"", decreasing(gaps),
                    "gaps over delta {0.2, 0.1, 0.05}: " + list(gaps) + " strictly decreasing; seconds per run " +
                        list(secs)};
    });
    run("AC10", [&] {
        const SpectralField q = SpectralField::sample(N, [](double a, double b) { return std::sin(a + b); });
        const auto pts = lsc_sweep(cfg, w0, th0, q);
        std::vector<double> g1, g2;
        for (const auto& p : pts) {
            g1.push_back(p.gap1);
            g2.push_back(p.gap2);
        }
        return Line{"", decreasing(g1) && decreasing(g2),
                    "lsc1 gaps " + list(g1) + ", lsc2 gaps " + list(g2) + " strictly decreasing"};
    });
    run("AC11", [&] {
        const SaturationReport r = saturation_check(5, 8, 64);
        return Line{"", r.covered == r.total && r.worst_fft <= 1e-10,
                    std::to_string(r.covered) + "/" + std::to_string(r.total) +
                        " modes with |n|_inf <= 5 represented; worst FFT residual " + fmt("%.2e", r.worst_fft) +
                        " <= 1e-10"};
    });
    run("AC12", [&] {
        const auto pts = temperature_demo(s, cfg, steering(), w0, {0.0, 0.0}, th0, th1);
        std::vector<double> rel;
        for (const auto& p : pts) rel.push_back(p.relative);
        const double best = *std::min_element(rel.begin(), rel.end());
        return Line{"", best <= 0.25 && decreasing(rel),
                    "relative combined H2 error over delta {0.2, 0.1, 0.05}: " + list(rel) + "; best " +
                        fmt("%.3f", best) + " <= 0.25 and decreasing (monotone improvement is the surrogate for the "
                                            "existence of delta_0)"};
    });

    int failed = 0;
    for (const auto& l : lines) failed += !l.pass;
    std::printf("%zu criteria, %d failed\n", lines.size(), failed);
    return failed ? 1 : 0;
}
