#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cdjp/config.hpp"
#include "cdjp/util.hpp"

namespace fs = std::filesystem;
using namespace cdjp;

namespace {

struct CommonArgs {
    std::string config_path, preset, out_dir = "out", solution_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int n_traj = 0;
    int threads = 0;
    bool theta0 = false;
};

ExperimentConfig load_config(const CommonArgs& a) {
    ExperimentConfig cfg;
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw ValidationError("cannot open config file " + a.config_path);
        std::stringstream ss;
        ss << in.rdbuf();
        cfg = ExperimentConfig::from_json_text(ss.str());
    } else if (!a.preset.empty()) {
        cfg = ExperimentConfig::preset(a.preset);
    } else {
        throw ValidationError("either --config or --preset is required");
    }
    if (a.seed_set) {
        cfg.seed = a.seed;
        cfg.anneal.seed = a.seed;
    }
    if (a.n_traj > 0) cfg.batch.n_traj = a.n_traj;
    if (a.threads > 0) cfg.threads = a.threads;
    return cfg;
}

void write_file(const fs::path& path, const std::string& body) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << body;
}

std::string provenance_comment(const ExperimentConfig& cfg) {
    return "# config_hash=" + hex64(cfg.hash()) + " seed=" + std::to_string(cfg.seed) + "\n";
}

std::string control_csv(const ControlSchedule& s) {
    std::ostringstream os;
    os.precision(12);
    os << "t,theta,lambda1,r\n";
    for (std::size_t k = 0; k < s.size(); ++k)
        os << k * s.dt << ',' << s.theta[k] << ',' << s.lambda1[k] << ',' << s.r[k] << '\n';
    return os.str();
}

std::string with_provenance(const std::string& json_text, const ExperimentConfig& cfg) {
    nlohmann::json j = nlohmann::json::parse(json_text);
    j["config_hash"] = hex64(cfg.hash());
    j["config_seed"] = cfg.seed;
    return j.dump(2);
}

int cmd_mlp(const CommonArgs& args) {
    const ExperimentConfig cfg = load_config(args);
    const OperatorSet ops = build_operators(FockDim(cfg.dim));
    const int threads = resolve_threads(cfg.threads);
    const fs::path out(args.out_dir);

    const bool theta0_mode = args.theta0 || cfg.name == "gauss-theta0";
    MLPResult res;
    if (theta0_mode) {
        const ShootingProblem prob = cfg.shooting_problem(ops);
        const Theta0FitSolution fit = anneal_theta0(prob, cfg.anneal, threads);
        res = mlp_integrate_fixed(prob.rho0, fit.bundle0, cfg.tau, cfg.t_f, cfg.dt,
                                  [](double) { return std::pair<double, double>(0.0, 0.0); },
                                  ops);
        std::fprintf(stderr, "theta0 fit: fidelity=%.6f converged=%d\n", fit.fidelity,
                     int(fit.converged));
    } else if (!args.solution_path.empty()) {
        std::ifstream in(args.solution_path);
        if (!in) throw ValidationError("cannot open solution " + args.solution_path);
        std::stringstream ss;
        ss << in.rdbuf();
        const OptimalControlSolution sol = OptimalControlSolution::from_json(ss.str());
        res = mlp_integrate(make_state(ops, cfg.initial_state), sol.bundle0, cfg.tau, cfg.t_f,
                            cfg.dt, cfg.lambda1_max, ops);
    } else {
        const Mat rho0 = make_state(ops, cfg.initial_state);
        res = mlp_integrate(rho0, bundle_sigma_identity(rho0, ops), cfg.tau, cfg.t_f, cfg.dt,
                            cfg.lambda1_max, ops);
    }
    write_file(out / "mlp_path.csv", provenance_comment(cfg) + res.path.to_csv(res.schedule));
    write_file(out / "control.csv", provenance_comment(cfg) + control_csv(res.schedule));
    std::printf("wrote %s and %s\n", (out / "mlp_path.csv").c_str(), (out / "control.csv").c_str());
    return 0;
}

int cmd_optimize(const CommonArgs& args) {
    const ExperimentConfig cfg = load_config(args);
    const OperatorSet ops = build_operators(FockDim(cfg.dim));
    const int threads = resolve_threads(cfg.threads);
    const ShootingProblem prob = cfg.shooting_problem(ops);
    const fs::path out(args.out_dir);

    const OptimalControlSolution sol = anneal_optimal(prob, cfg.anneal, threads);
    write_file(out / "solution.json", with_provenance(sol.to_json(), cfg));
    const Evaluation ev = evaluate_control(sol, prob, /*with_path=*/true);
    write_file(out / "mlp_path.csv",
               provenance_comment(cfg) + ev.result.path.to_csv(ev.result.schedule));
    write_file(out / "control.csv", provenance_comment(cfg) + control_csv(ev.result.schedule));
    std::printf("optimize %s: fidelity=%.6f J=%.6f converged=%d evals=%ld\n", cfg.name.c_str(),
                sol.fidelity, sol.j_cost, int(sol.converged), sol.evaluations);
    if (!sol.converged)
        std::fprintf(stderr, "warning: NoConvergence, best-so-far solution written\n");
    return 0;
}

int cmd_sample_control(const CommonArgs& args) {
    const ExperimentConfig cfg = load_config(args);
    const OperatorSet ops = build_operators(FockDim(cfg.dim));
    const int threads = resolve_threads(cfg.threads);
    const ShootingProblem prob = cfg.shooting_problem(ops, cfg.sample_gate);
    const fs::path out(args.out_dir);

    const SampleControlSolution sol = anneal_sample_control(prob, cfg.anneal, threads);
    write_file(out / "sample_solution.json", with_provenance(sol.to_json(), cfg));
    const Evaluation ev = evaluate_control(sol.control, prob, /*with_path=*/true);
    write_file(out / "sample_path.csv",
               provenance_comment(cfg) + ev.result.path.to_csv(ev.result.schedule));
    write_file(out / "sample_control.csv",
               provenance_comment(cfg) + control_csv(ev.result.schedule));
    std::printf("sample-control %s: fidelity=%.6f converged=%d evals=%ld\n", cfg.name.c_str(),
                sol.fidelity, int(sol.converged), sol.evaluations);
    if (!sol.converged)
        std::fprintf(stderr, "warning: NoConvergence, best-so-far control written\n");
    return 0;
}

int cmd_trajectories(const CommonArgs& args) {
    const ExperimentConfig cfg = load_config(args);
    const OperatorSet ops = build_operators(FockDim(cfg.dim));
    const int threads = resolve_threads(cfg.threads);
    const fs::path out(args.out_dir);
    if (args.solution_path.empty())
        throw ValidationError("trajectories requires --solution SOLUTION.json");

    std::ifstream in(args.solution_path);
    if (!in) throw ValidationError("cannot open solution " + args.solution_path);
    std::stringstream ss;
    ss << in.rdbuf();
    const nlohmann::json sj = nlohmann::json::parse(ss.str());
    ControlSchedule schedule;
    const std::string type = sj.at("type").get<std::string>();
    if (type == "optimal")
        schedule = OptimalControlSolution::from_json(ss.str()).schedule;
    else
        schedule = SampleControlSolution::from_json(ss.str()).schedule;

    BatchSpec spec;
    spec.control = schedule;
    spec.rho0 = make_state(ops, cfg.initial_state);
    spec.rho_target = make_state(ops, cfg.target_state);
    spec.n_traj = cfg.batch.n_traj;
    spec.base_seed = cfg.seed;
    spec.tau = cfg.tau;
    spec.t_f = cfg.t_f;
    spec.dt = cfg.dt;
    spec.thresholds = cfg.batch.thresholds;
    spec.bins = cfg.batch.bins;

    const BatchResult res = run_batch(spec, ops, threads);

    nlohmann::json bj;
    bj["config_hash"] = hex64(cfg.hash());
    bj["seed"] = cfg.seed;
    bj["solution_type"] = type;
    bj["n"] = res.hist.n;
    bj["failures"] = res.hist.failures;
    for (const auto& [thr, frac] : res.hist.fractions_above)
        bj["fractions_above"][std::to_string(thr)] = frac;
    bj["thresholds"] = cfg.batch.thresholds;
    write_file(out / "batch.json", bj.dump(2));
    write_file(out / "histogram.csv", provenance_comment(cfg) + res.hist.to_csv());

    std::ostringstream rep;
    rep << "trajectories: " << res.hist.n << " ok, " << res.hist.failures << " failures\n";
    for (const auto& [thr, frac] : res.hist.fractions_above)
        rep << "fraction above " << thr << ": " << frac << "\n";
    write_file(out / "report.txt", rep.str());

    std::ostringstream fos;
    fos.precision(12);
    fos << "trajectory,fidelity\n";
    for (std::size_t i = 0; i < res.fidelities.size(); ++i)
        fos << i << ',' << res.fidelities[i] << '\n';
    write_file(out / "fidelities.csv", provenance_comment(cfg) + fos.str());

    std::printf("%s", rep.str().c_str());
    return 0;
}

int cmd_gauss_bench(const CommonArgs& args) {
    const ExperimentConfig cfg = load_config(args);
    const OperatorSet ops = build_operators(FockDim(cfg.dim));
    const int threads = resolve_threads(cfg.threads);
    const fs::path out(args.out_dir);

    const SteadyCovariances q = steady_state_covariances(cfg.tau);
    std::ostringstream tab;
    tab.precision(12);
    tab << "tau,q3_steady,q4_steady,q5_steady\n"
        << cfg.tau << ',' << q.q3 << ',' << q.q4 << ',' << q.q5 << '\n';
    write_file(out / "gauss_table.csv", provenance_comment(cfg) + tab.str());

    const GaussOptimalPath path(cfg.gauss.q1i, cfg.gauss.q2i, cfg.gauss.q1f, cfg.gauss.q2f,
                                cfg.t_f, cfg.tau);
    std::ostringstream cf;
    cf.precision(12);
    cf << "t,theta,lambda1,r,x_mean,p_mean,var_x,cov_xp,var_p\n";
    const long n = std::lround(cfg.t_f / cfg.dt);
    for (long k = 0; k <= n; ++k) {
        const double t = k * cfg.dt;
        const auto [q1, q2] = path.at(t);
        cf << t << ",0,0," << q1 << ',' << q1 << ',' << q2 << ',' << q.q3 / 2 << ','
           << q.q4 / 2 << ',' << q.q5 / 2 << '\n';
    }
    write_file(out / "gauss_closed_form.csv", provenance_comment(cfg) + cf.str());

    const ShootingProblem prob = cfg.shooting_problem(ops);
    const Theta0FitSolution fit = anneal_theta0(prob, cfg.anneal, threads);
    const MLPResult res = mlp_integrate_fixed(
        prob.rho0, fit.bundle0, cfg.tau, cfg.t_f, cfg.dt,
        [](double) { return std::pair<double, double>(0.0, 0.0); }, ops);
    write_file(out / "gauss_mlp.csv", provenance_comment(cfg) + res.path.to_csv(res.schedule));

    nlohmann::json fj;
    fj["config_hash"] = hex64(cfg.hash());
    fj["seed"] = cfg.seed;
    fj["fidelity"] = fit.fidelity;
    fj["converged"] = fit.converged;
    fj["bundle0"] = {fit.bundle0.g10, fit.bundle0.g01, fit.bundle0.k10, fit.bundle0.k01};
    write_file(out / "gauss_fit.json", fj.dump(2));

    std::printf("gauss-bench: fit fidelity=%.6f; wrote table, closed-form and mlp overlays\n",
                fit.fidelity);
    return 0;
}

int cmd_compare(const std::string& optimal_path, const std::string& sample_path,
                const std::string& out_dir) {
    auto load_hist = [](const std::string& p) {
        std::ifstream in(p);
        if (!in) throw ValidationError("cannot open batch file " + p);
        nlohmann::json j;
        in >> j;
        FidelityHistogram h;
        h.n = j.at("n").get<long>();
        h.failures = j.at("failures").get<long>();
        for (const auto& [k, v] : j.at("fractions_above").items())
            h.fractions_above[std::stod(k)] = v.get<double>();
        return h;
    };
    const FidelityHistogram ho = load_hist(optimal_path);
    const FidelityHistogram hs = load_hist(sample_path);
    std::vector<double> thresholds;
    for (const auto& [thr, frac] : ho.fractions_above) thresholds.push_back(thr);
    const ComparisonReport rep = compare(ho, hs, thresholds);
    const fs::path out(out_dir);
    write_file(out / "comparison.txt", rep.to_text());
    write_file(out / "comparison.csv", rep.to_csv());
    std::printf("%s", rep.to_text().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"most-likely-path optimal control for continuously monitored oscillators"};
    app.require_subcommand(1);

    CommonArgs args;
    std::string compare_optimal, compare_sample;

    auto add_common = [&](CLI::App* cmd, bool with_solution = false) {
        cmd->add_option("--config", args.config_path, "experiment config JSON");
        cmd->add_option("--preset", args.preset,
                        "named preset: binomial, cat-cooling, cat-to-cat, gauss-theta0");
        cmd->add_option("--out", args.out_dir, "output directory");
        cmd->add_option("--seed", args.seed, "seed override")->each([&](std::string) {
            args.seed_set = true;
        });
        cmd->add_option("--n-traj", args.n_traj, "trajectory count override");
        cmd->add_option("--threads", args.threads, "worker threads (env CDJP_THREADS fallback)");
        if (with_solution)
            cmd->add_option("--solution", args.solution_path, "solution JSON produced by optimize");
    };

    CLI::App* mlp = app.add_subcommand("mlp", "integrate the most likely path");
    add_common(mlp, true);
    mlp->add_flag("--theta0", args.theta0, "hold theta=0 and fit the boundary constants");

    CLI::App* optimize = app.add_subcommand("optimize", "solve for the optimal control");
    add_common(optimize);

    CLI::App* sample = app.add_subcommand("sample-control", "synthesize a Fourier sample control");
    add_common(sample);

    CLI::App* traj = app.add_subcommand("trajectories", "simulate a stochastic batch");
    add_common(traj, true);

    CLI::App* gauss = app.add_subcommand("gauss-bench", "analytic position-measurement benchmark");
    add_common(gauss);

    CLI::App* cmp = app.add_subcommand("compare", "compare two batch.json files");
    cmp->add_option("--optimal", compare_optimal, "batch.json from the optimal control")
        ->required();
    cmp->add_option("--sample", compare_sample, "batch.json from the sample control")->required();
    cmp->add_option("--out", args.out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mlp->parsed()) return cmd_mlp(args);
        if (optimize->parsed()) return cmd_optimize(args);
        if (sample->parsed()) return cmd_sample_control(args);
        if (traj->parsed()) return cmd_trajectories(args);
        if (gauss->parsed()) return cmd_gauss_bench(args);
        if (cmp->parsed()) return cmd_compare(compare_optimal, compare_sample, args.out_dir);
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
