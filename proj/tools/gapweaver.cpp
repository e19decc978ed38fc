// gapweaver: band structure, gap-opening bifurcation, coupled-mode
// coefficients, gap-soliton solves and diagnostics for separable periodic
// potentials. Every run writes its resolved config and a manifest with
// checksums so results can be reproduced from one file.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gapweaver/elliptic2d.hpp"
#include "gapweaver/errors.hpp"
#include "gapweaver/io.hpp"
#include "gapweaver/parallel.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gapweaver;

namespace {

PeriodicPotential load_potential(const std::string& spec) {
    if (spec == "one-minus-cos") return PeriodicPotential::one_minus_cos();
    if (spec == "zero") return PeriodicPotential::zero();
    std::ifstream in(spec);
    if (!in) throw gapweaver::Error("potential '" + spec + "' is neither builtin nor a readable file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return potential_from_json(ss.str());
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

struct RangeSpec {
    double a, b, step;
};
RangeSpec parse_range(const std::string& s) {
    RangeSpec r{};
    if (std::sscanf(s.c_str(), "%lf:%lf:%lf", &r.a, &r.b, &r.step) != 3)
        throw gapweaver::Error("range must be a:b:step, got '" + s + "'");
    return r;
}

ResonanceCoefficients coeffs_for(const json& cfg, const PeriodicPotential& p) {
    if (cfg.contains("coeffs_file") && !cfg["coeffs_file"].get<std::string>().empty())
        return read_coefficients_file(cfg["coeffs_file"]);
    const int grid_n = cfg.value("grid_n", 512);
    double eta0 = cfg.value("eta0", 0.0);
    if (eta0 <= 0.0) {
        auto b = find_bifurcation_eta(p, cfg.value("bracket_lo", 0.05),
                                      cfg.value("bracket_hi", 0.5), grid_n);
        eta0 = b.eta0;
    }
    return compute_coefficients(p, eta0, grid_n);
}

struct RunPaths {
    fs::path out;
    std::vector<ManifestEntry> inputs, outputs;

    std::string emit(const std::string& name) { return (out / name).string(); }
    void record(const std::string& path) { outputs.push_back({path, file_checksum(path)}); }
    void record_input(const std::string& path) {
        if (fs::exists(path)) inputs.push_back({path, file_checksum(path)});
    }
};

int run_command(const json& cfg);

int cmd_bands(const json& cfg, RunPaths& rp) {
    auto p = load_potential(cfg["potential"]);
    const int grid_n = cfg.value("grid_n", 512);
    const int nb = cfg.value("n_bands", 6);
    const int nk = cfg.value("k_points", 33);
    const double eta = cfg.value("eta", 0.1745);

    std::vector<double> ks(nk);
    for (int i = 0; i < nk; ++i) ks[i] = -0.5 + i * (1.0 / (nk - 1));
    BandData bd = compute_band_data(p, eta, nb, ks, grid_n);
    const std::string band_path = rp.emit("bands.dat");
    write_band_file(band_path, bd);
    rp.record(band_path);

    // 2D band diagram along Gamma -> X -> M -> Gamma from sums of 1D bands
    auto rho_at = [&](int band, double k) {
        std::vector<double> kk = {k};
        return band_function(p, eta, band, kk, grid_n)[0];
    };
    const int seg = cfg.value("path_points", 24);
    std::string csv = "s,k1,k2";
    const int nsurf = 8;
    for (int i = 0; i < nsurf; ++i) csv += ",omega" + std::to_string(i + 1);
    csv += "\n";
    auto emit_point = [&](double s, double k1, double k2) {
        std::vector<double> sums;
        for (int b1 = 1; b1 <= nb; ++b1)
            for (int b2 = 1; b2 <= nb; ++b2) sums.push_back(rho_at(b1, k1) + rho_at(b2, k2));
        std::sort(sums.begin(), sums.end());
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f", s, k1, k2);
        csv += buf;
        for (int i = 0; i < nsurf; ++i) {
            std::snprintf(buf, sizeof buf, ",%.12g", sums[i]);
            csv += buf;
        }
        csv += "\n";
    };
    for (int i = 0; i <= seg; ++i) emit_point(i / double(seg), 0.5 * i / seg, 0.0);
    for (int i = 1; i <= seg; ++i) emit_point(1.0 + i / double(seg), 0.5, 0.5 * i / seg);
    for (int i = 1; i <= seg; ++i)
        emit_point(2.0 + i / double(seg), 0.5 - 0.5 * i / seg, 0.5 - 0.5 * i / seg);
    const std::string diag_path = rp.emit("band2d.csv");
    write_file_atomic(diag_path, csv);
    rp.record(diag_path);
    return 0;
}

int cmd_bifurcate(const json& cfg, RunPaths& rp) {
    auto p = load_potential(cfg["potential"]);
    const int grid_n = cfg.value("grid_n", 512);
    auto b = find_bifurcation_eta(p, cfg.value("bracket_lo", 0.05),
                                  cfg.value("bracket_hi", 0.5), grid_n);
    json j;
    j["eta0"] = b.eta0;
    j["omega0"] = b.omega0;
    j["lambda1"] = b.lambda1;
    j["mu1"] = b.mu1;
    j["mu2"] = b.mu2;
    j["residual"] = b.residual;
    j["evals"] = b.evals;
    const std::string path = rp.emit("bifurcation.json");
    write_file_atomic(path, j.dump(2) + "\n");
    rp.record(path);
    std::printf("eta0 = %.6f  omega0 = %.6f  (lambda1 = %.6f, mu1 = %.6f, mu2 = %.6f)\n",
                b.eta0, b.omega0, b.lambda1, b.mu1, b.mu2);
    return 0;
}

int cmd_coeffs(const json& cfg, RunPaths& rp) {
    auto p = load_potential(cfg["potential"]);
    auto c = coeffs_for(cfg, p);
    const std::string path = rp.emit("coefficients.json");
    write_coefficients_file(path, c);
    rp.record(path);
    std::printf("eta0   = %.6f    omega0 = %.6f\n", c.eta0, c.omega0);
    std::printf("beta1  = %.4f    beta2  = %.4f\n", c.beta1, c.beta2);
    std::printf("gamma1 = %.4e  gamma2 = %.4e  gamma3 = %.4e  gamma4 = %.4e\n", c.gamma1,
                c.gamma2, c.gamma3, c.gamma4);
    std::printf("alpha1 = %.4f    alpha2 = %.4f   alpha3 = %.4f\n", c.alpha1, c.alpha2,
                c.alpha3);
    return 0;
}

int cmd_solve(const json& cfg, RunPaths& rp) {
    auto p = load_potential(cfg["potential"]);
    auto c = coeffs_for(cfg, p);
    const CmeClass cls = class_from_tag(cfg["class"]);
    NewtonOptions nopt;
    nopt.tol = cfg.value("tol", 1e-10);
    CMEField f = solve_class(cls, cfg["omega"], c, cfg.value("D", 16.0),
                             cfg.value("dy", 0.14), nopt, cfg.value("homotopy_steps", 6));
    const std::string path = rp.emit(std::string("solution_") + class_tag(cls) + ".gwf");
    write_field_file(path, f);
    rp.record(path);
    std::printf("class %s at Omega = %.4f: amplitude %.6f, residual %.2e, reversibility %.2e\n",
                class_tag(cls), f.omega, amplitude_measure(f), cme_residual_norm(f),
                reversibility_error(f));
    return 0;
}

int cmd_continue(const json& cfg, RunPaths& rp) {
    rp.record_input(cfg["from"]);
    CMEField seed = read_field_file(cfg["from"]);
    auto range = parse_range(cfg["omega_range"]);
    seed.omega = range.a;
    NewtonOptions nopt;
    nopt.tol = cfg.value("tol", 1e-10);
    solve_cme_newton(seed, nopt);
    const bool keep = cfg.value("keep_fields", false);
    SolutionBranch br = continue_in_omega(seed, range.b, range.step, nopt, keep);
    std::vector<std::string> paths;
    if (keep) {
        for (std::size_t i = 0; i < br.fields.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof name, "branch_%04zu.gwf", i);
            paths.push_back(rp.emit(name));
            write_field_file(paths.back(), br.fields[i]);
            rp.record(paths.back());
        }
    }
    const std::string path = rp.emit("branch.csv");
    write_branch_file(path, br, paths);
    rp.record(path);
    std::printf("branch: %zu points, omega in [%.4f, %.4f], amplitude %.4g -> %.4g\n",
                br.omega.size(), br.omega.front(), br.omega.back(), br.amplitude.front(),
                br.amplitude.back());
    return 0;
}

int cmd_diag_kernel(const json& cfg, RunPaths& rp) {
    rp.record_input(cfg["field"]);
    CMEField f = read_field_file(cfg["field"]);
    std::vector<double> Ds = parse_list(cfg["D"]);
    NewtonOptions nopt;
    nopt.tol = cfg.value("tol", 1e-10);
    KernelReport rep = kernel_report(f, Ds, nopt);
    const std::string csv = rp.emit("kernel.csv"), vj = rp.emit("kernel_verdict.json");
    write_kernel_report(csv, vj, rep);
    rp.record(csv);
    rp.record(vj);
    for (const auto& row : rep.rows)
        std::printf("D = %5.1f: |lJ| = %.3e %.3e %.3e %.3e  angle = %.4f\n", row.D,
                    std::abs(row.eigs[0]), std::abs(row.eigs[1]), std::abs(row.eigs[2]),
                    std::abs(row.eigs[3]), row.subspace_angle);
    std::printf("%s\n", rep.verdict ? "persistence conditions verified"
                                    : "persistence conditions NOT verified");
    return rep.verdict ? 0 : 1;
}

int cmd_verify_eps(const json& cfg, RunPaths& rp) {
    auto p = load_potential(cfg["potential"]);
    auto c = coeffs_for(cfg, p);
    auto efs = edge_eigenfunctions(p, c.eta0, 2, cfg.value("grid_n", 512));
    StudyOptions sopt;
    sopt.envelope_D = cfg.value("envelope_D", 20.0);
    sopt.envelope_dy = cfg.value("envelope_dy", 0.14);
    sopt.pts_per_period = cfg.value("pts_per_period", 100);
    sopt.newton_tol = cfg.value("tol", 1e-8);
    const CmeClass cls = class_from_tag(cfg["class"]);
    auto st = convergence_study(cls, cfg["omega"], parse_list(cfg["eps"]), p, c, efs, sopt);
    const std::string csv = rp.emit("convergence.csv"), js = rp.emit("convergence.json");
    write_convergence_report(csv, js, st, class_tag(cls), cfg["omega"]);
    rp.record(csv);
    rp.record(js);
    for (std::size_t i = 0; i < st.eps.size(); ++i)
        std::printf("eps = %.4f: err = %.6e (grid %d^2)\n", st.eps[i], st.err[i],
                    st.grid_n[i]);
    std::printf("fitted slope: %.4f%s\n", st.slope, st.complete ? "" : "  [INCOMPLETE]");
    return st.complete ? 0 : 1;
}

int cmd_evolve(const json& cfg, RunPaths& rp) {
    const std::string model = cfg.value("model", "cme");
    rp.record_input(cfg["from"]);
    if (model == "cme") {
        CMEField f = read_field_file(cfg["from"]);
        auto trep = integrate_cme_time(f, cfg["T"], cfg.value("dt", 1e-3));
        const std::string path = rp.emit("evolved.gwf");
        write_field_file(path, f);
        rp.record(path);
        std::printf("evolved T = %g in %d steps; power %.10g -> %.10g\n",
                    cfg["T"].get<double>(), trep.steps, trep.power_initial,
                    trep.power_final);
        return 0;
    }
    if (model == "gp") {
        auto p = load_potential(cfg["potential"]);
        GridField2D g = read_grid_field_file(cfg["from"]);
        auto grep = integrate_gp_time(g, p, cfg["T"], cfg.value("dt", 1e-3));
        const std::string path = rp.emit("evolved_gp.gwf");
        write_grid_field_file(path, g);
        rp.record(path);
        std::printf("evolved t = %g in %d steps; mass %.10g -> %.10g\n",
                    cfg["T"].get<double>(), grep.steps, grep.mass_initial, grep.mass_final);
        return 0;
    }
    throw gapweaver::Error("unknown evolve model: " + model);
}

int cmd_nonres(const json& cfg, RunPaths& rp) {
    auto p = load_potential(cfg["potential"]);
    const int grid_n = cfg.value("grid_n", 512);
    double eta0 = cfg.value("eta0", 0.0);
    double omega0 = 0.0;
    if (eta0 <= 0.0) {
        auto b = find_bifurcation_eta(p, cfg.value("bracket_lo", 0.05),
                                      cfg.value("bracket_hi", 0.5), grid_n);
        eta0 = b.eta0;
        omega0 = b.omega0;
    } else {
        auto ev = edge_eigenvalues(p, eta0, 2, grid_n);
        omega0 = ev.lambda[0] + ev.mu[1];
    }
    auto rep = check_nonresonance(p, eta0, omega0, cfg.value("n_max", 20), grid_n);
    json j;
    j["min_value"] = rep.min_value;
    j["attained_at"] = {{"n1", rep.n1}, {"n2", rep.n2}, {"j1", rep.j1},
                        {"j2", rep.j2}, {"j3", rep.j3}, {"k1", rep.k1}, {"k2", rep.k2}};
    j["excluded_direct_resonances"] = rep.excluded;
    j["certified"] = rep.certified;
    j["tail_n"] = rep.tail_n;
    j["growth_fit"] = {{"c_minus", rep.c_minus}, {"c_shift", rep.c_shift}};
    const std::string path = rp.emit("nonres.json");
    write_file_atomic(path, j.dump(2) + "\n");
    rp.record(path);
    std::printf("non-resonance minimum %.6f at (n1=%d, n2=%d, j=%d,%d,%d)%s\n",
                rep.min_value, rep.n1, rep.n2, rep.j1, rep.j2, rep.j3,
                rep.certified ? ", tail certified" : ", tail NOT certified");
    return rep.min_value > 0 && rep.certified ? 0 : 1;
}

int run_command(const json& cfg) {
    const std::string cmd = cfg.at("command");
    RunPaths rp;
    rp.out = cfg.value("out", ".");
    fs::create_directories(rp.out);
    if (cfg.contains("potential")) {
        const std::string spec = cfg["potential"];
        if (spec != "one-minus-cos" && spec != "zero") rp.record_input(spec);
    }

    int rc = 0;
    if (cmd == "bands")
        rc = cmd_bands(cfg, rp);
    else if (cmd == "bifurcate")
        rc = cmd_bifurcate(cfg, rp);
    else if (cmd == "coeffs")
        rc = cmd_coeffs(cfg, rp);
    else if (cmd == "solve")
        rc = cmd_solve(cfg, rp);
    else if (cmd == "continue")
        rc = cmd_continue(cfg, rp);
    else if (cmd == "diag-kernel")
        rc = cmd_diag_kernel(cfg, rp);
    else if (cmd == "verify-eps")
        rc = cmd_verify_eps(cfg, rp);
    else if (cmd == "evolve")
        rc = cmd_evolve(cfg, rp);
    else if (cmd == "nonres")
        rc = cmd_nonres(cfg, rp);
    else
        throw gapweaver::Error("unknown command: " + cmd);

    const std::string cfg_path = (rp.out / "config.json").string();
    write_file_atomic(cfg_path, cfg.dump(2) + "\n");
    write_manifest((rp.out / "manifest.json").string(), cmd, cfg.dump(), rp.inputs,
                   rp.outputs);
    return rc;
}

}  // namespace

int main(int argc, char** argv) {
    init_threads();
    CLI::App app{"gap-soliton pipeline for separable periodic potentials"};
    app.require_subcommand(0, 1);

    std::string config_file;
    app.add_option("--config", config_file, "replay a persisted run config (JSON)");

    json cfg;
    std::string potential = "one-minus-cos", out = ".";
    int grid_n = 512;
    double tol = 1e-10;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--potential", potential, "builtin name or descriptor file");
        sub->add_option("--grid-n", grid_n, "1D spatial resolution per 2pi period");
        sub->add_option("--tol", tol, "solver tolerance");
        sub->add_option("--out", out, "output directory");
    };

    // bands
    double eta = 0.1745;
    int n_bands = 6, k_points = 33;
    auto* sb = app.add_subcommand("bands", "1D Bloch bands and the 2D diagram");
    add_common(sb);
    sb->add_option("--eta", eta);
    sb->add_option("--n-bands", n_bands);
    sb->add_option("--k-points", k_points);

    // bifurcate
    std::string bracket = "0.05:0.5";
    auto* sf = app.add_subcommand("bifurcate", "locate the gap-opening eta0");
    add_common(sf);
    sf->add_option("--bracket", bracket, "eta bracket lo:hi");

    // coeffs
    double eta0_opt = 0.0;
    std::string coeffs_file;
    auto* sc = app.add_subcommand("coeffs", "coupled-mode coefficients");
    add_common(sc);
    sc->add_option("--eta0", eta0_opt, "skip the bifurcation search");
    sc->add_option("--bracket", bracket);

    // solve
    std::string cls_tag = "A-m0";
    double omega = 1.2, D = 16.0, dy = 0.14;
    int homotopy_steps = 6;
    auto* ss = app.add_subcommand("solve", "stationary coupled-mode solution");
    add_common(ss);
    ss->add_option("--class", cls_tag)->required();
    ss->add_option("--omega", omega)->required();
    ss->add_option("--D", D);
    ss->add_option("--dy", dy);
    ss->add_option("--homotopy-steps", homotopy_steps);
    ss->add_option("--coeffs", coeffs_file, "coefficient file (skips recomputation)");
    ss->add_option("--eta0", eta0_opt);

    // continue
    std::string from, omega_range = "1.2:1.0:0.02";
    bool keep_fields = false;
    auto* scont = app.add_subcommand("continue", "natural-parameter continuation in Omega");
    add_common(scont);
    scont->add_option("--from", from)->required();
    scont->add_option("--omega-range", omega_range, "a:b:step")->required();
    scont->add_flag("--keep-fields", keep_fields);

    // diag-kernel
    std::string d_list = "8,12,16,20";
    auto* sdk = app.add_subcommand("diag-kernel", "Jacobian kernel diagnostics vs box size");
    add_common(sdk);
    sdk->add_option("--field", from)->required();
    sdk->add_option("--D", d_list);

    // verify-eps
    std::string eps_list = "0.04,0.06,0.08,0.1";
    double envelope_D = 20.0, envelope_dy = 0.14;
    int ppp = 100;
    auto* sv = app.add_subcommand("verify-eps", "eps-convergence of the reconstruction");
    add_common(sv);
    sv->add_option("--class", cls_tag)->required();
    sv->add_option("--omega", omega)->required();
    sv->add_option("--eps", eps_list);
    sv->add_option("--envelope-D", envelope_D);
    sv->add_option("--envelope-dy", envelope_dy);
    sv->add_option("--pts-per-period", ppp);
    sv->add_option("--coeffs", coeffs_file);
    sv->add_option("--eta0", eta0_opt);

    // evolve
    double T = 1.0, dt = 1e-3;
    std::string model = "cme";
    auto* se = app.add_subcommand("evolve", "time evolution (cme or gp)");
    add_common(se);
    se->add_option("--from", from)->required();
    se->add_option("--T", T)->required();
    se->add_option("--dt", dt);
    se->add_option("--model", model, "cme | gp");

    // nonres
    int n_max = 20;
    auto* sn = app.add_subcommand("nonres", "non-resonance condition check");
    add_common(sn);
    sn->add_option("--n-max", n_max);
    sn->add_option("--eta0", eta0_opt);
    sn->add_option("--bracket", bracket);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (!config_file.empty()) {
            std::ifstream in(config_file);
            if (!in) throw gapweaver::Error("cannot open config " + config_file);
            json replay;
            in >> replay;
            return run_command(replay);
        }
        if (app.get_subcommands().empty()) {
            std::cerr << app.help() << std::endl;
            return 2;
        }
        CLI::App* sub = app.get_subcommands().front();
        cfg["command"] = sub->get_name();
        cfg["potential"] = potential;
        cfg["grid_n"] = grid_n;
        cfg["tol"] = tol;
        cfg["out"] = out;
        if (sub == sb) {
            cfg["eta"] = eta;
            cfg["n_bands"] = n_bands;
            cfg["k_points"] = k_points;
        } else if (sub == sf || sub == sn || sub == sc) {
            auto r = parse_range(bracket + ":0");
            cfg["bracket_lo"] = r.a;
            cfg["bracket_hi"] = r.b;
            if (eta0_opt > 0) cfg["eta0"] = eta0_opt;
            if (sub == sn) cfg["n_max"] = n_max;
        }
        if (sub == ss) {
            cfg["class"] = cls_tag;
            cfg["omega"] = omega;
            cfg["D"] = D;
            cfg["dy"] = dy;
            cfg["homotopy_steps"] = homotopy_steps;
            if (!coeffs_file.empty()) cfg["coeffs_file"] = coeffs_file;
            if (eta0_opt > 0) cfg["eta0"] = eta0_opt;
        } else if (sub == scont) {
            cfg["from"] = from;
            cfg["omega_range"] = omega_range;
            cfg["keep_fields"] = keep_fields;
        } else if (sub == sdk) {
            cfg["field"] = from;
            cfg["D"] = d_list;
        } else if (sub == sv) {
            cfg["class"] = cls_tag;
            cfg["omega"] = omega;
            cfg["eps"] = eps_list;
            cfg["envelope_D"] = envelope_D;
            cfg["envelope_dy"] = envelope_dy;
            cfg["pts_per_period"] = ppp;
            if (!coeffs_file.empty()) cfg["coeffs_file"] = coeffs_file;
            if (eta0_opt > 0) cfg["eta0"] = eta0_opt;
        } else if (sub == se) {
            cfg["from"] = from;
            cfg["T"] = T;
            cfg["dt"] = dt;
            cfg["model"] = model;
        }
        return run_command(cfg);
    } catch (const gapweaver::Error& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
}
