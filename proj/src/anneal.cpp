#include "cdjp/anneal.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "cdjp/util.hpp"

namespace cdjp {

std::string hex64(std::uint64_t v) {
    char buf[19];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

double SmallRng::normal() {
    const double u1 = (double((next() >> 11)) + 1.0) * (1.0 / 9007199254740992.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void ShootingProblem::validate() const {
    if (rho0.rows() < 2 || rho0.rows() != rho0.cols() || rho0.rows() != rho_target.rows())
        throw ValidationError("ShootingProblem: state dimensions are inconsistent");
    if (!is_pure(rho_target)) throw NonPureInput("ShootingProblem: target state must be pure");
    if (!(tau > 0) || !(t_f > 0) || !(dt > 0) || lambda1_max < 0)
        throw ValidationError("ShootingProblem: physical parameters must be positive");
    const long n = std::lround(t_f / dt);
    if (std::abs(n * dt - t_f) > 1e-9) throw ValidationError("ShootingProblem: t_f/dt not integral");
    if (!(fidelity_gate > 0 && fidelity_gate < 1))
        throw ValidationError("ShootingProblem: fidelity_gate must lie in (0,1)");
}

std::uint64_t ShootingProblem::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix_mat = [&h](const Mat& m) {
        h = fnv1a(m.data(), sizeof(Complex) * m.size(), h);
    };
    mix_mat(rho0);
    mix_mat(rho_target);
    const double params[6] = {tau, t_f, dt, lambda1_max, fidelity_gate, double(rho0.rows())};
    h = fnv1a(params, sizeof params, h);
    return h;
}

void AnnealConfig::validate() const {
    if (!(initial_temperature > 0) || !(cooling_rate > 0) || cooling_rate >= 1)
        throw ValidationError("AnnealConfig: need T0 > 0 and cooling_rate in (0,1)");
    if (steps_per_temperature <= 0 || restarts <= 0 || max_evals_per_restart <= 0 ||
        stall_levels <= 0 || !(temperature_floor > 0))
        throw ValidationError("AnnealConfig: all budget fields must be positive");
    for (double s : proposal_scale)
        if (!(s > 0)) throw ValidationError("AnnealConfig: proposal scales must be positive");
}

namespace {

std::vector<double> resolve_scales(const AnnealConfig& cfg, std::size_t dim,
                                   const std::vector<double>& fallback) {
    if (cfg.proposal_scale.empty()) return fallback;
    if (cfg.proposal_scale.size() == 1) return std::vector<double>(dim, cfg.proposal_scale[0]);
    if (cfg.proposal_scale.size() != dim)
        throw ValidationError("AnnealConfig: proposal_scale size must match coordinate count");
    return cfg.proposal_scale;
}

struct SARun {
    std::vector<double> x;
    double fidelity = -1;
    double j = std::numeric_limits<double>::infinity();
    bool gate_reached = false;
    long evals = 0;
    int phase2_accepts = 0;
};

// Two-phase annealing: Metropolis on 1−fidelity until the gate is reached,
// then strict descent on J restricted to fidelity ≥ gate. Proposals perturb
// one coordinate at a time; every coordinate carries its own step size,
// adapted toward a mid-range acceptance rate at the end of each temperature
// level (Corana-style variable step widths).
template <typename Objective>
SARun run_sa(Objective&& objective, const std::vector<double>& x0,
             const std::vector<double>& scales, double gate, bool pareto,
             const AnnealConfig& cfg, std::uint64_t seed, double jitter) {
    SmallRng rng(seed);
    const std::size_t n = x0.size();

    std::vector<double> cur_x = x0;
    for (std::size_t i = 0; i < n && jitter > 0; ++i) cur_x[i] += jitter * scales[i] * rng.normal();

    MLPObjective cur = objective(cur_x);
    SARun run;
    run.evals = 1;
    run.x = cur_x;
    run.fidelity = cur.fidelity;
    run.j = cur.J;
    bool phase2 = pareto && cur.fidelity >= gate;
    run.gate_reached = cur.fidelity >= gate;

    std::vector<double> best_x = cur_x;
    double best_f = cur.fidelity;

    double temp = cfg.initial_temperature;
    std::vector<double> step(scales);
    std::vector<int> acc(n, 0), tries(n, 0);
    int stall = 0;
    std::vector<double> prop(n);

    while (temp > cfg.temperature_floor && run.evals < cfg.max_evals_per_restart &&
           stall < cfg.stall_levels) {
        std::fill(acc.begin(), acc.end(), 0);
        std::fill(tries.begin(), tries.end(), 0);
        bool improved = false;
        for (int s = 0; s < cfg.steps_per_temperature; ++s) {
            if (run.evals >= cfg.max_evals_per_restart) break;
            const std::size_t i = s % n;
            prop = cur_x;
            prop[i] += step[i] * rng.normal();
            const MLPObjective cand = objective(prop);
            ++run.evals;
            ++tries[i];

            bool accept;
            if (!phase2) {
                const double de = (1.0 - cand.fidelity) - (1.0 - cur.fidelity);
                accept = de < 0 || rng.uniform() < std::exp(-de / temp);
            } else {
                accept = cand.fidelity >= gate && cand.J < cur.J;
            }
            if (accept) {
                cur_x = prop;
                cur = cand;
                ++acc[i];
                if (phase2) {
                    ++run.phase2_accepts;
                    improved = true;
                    run.x = cur_x;
                    run.fidelity = cur.fidelity;
                    run.j = cur.J;
                }
            }
            if (cand.fidelity > best_f + 1e-12) {
                best_f = cand.fidelity;
                best_x = prop;
                if (!phase2) improved = true;
            }
            if (!phase2 && cur.fidelity >= gate) {
                phase2 = pareto;
                run.gate_reached = true;
                run.x = cur_x;
                run.fidelity = cur.fidelity;
                run.j = cur.J;
                improved = true;
            } else if (!pareto && cand.fidelity >= gate) {
                run.gate_reached = true;
            }
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (tries[i] == 0) continue;
            const double rate = double(acc[i]) / tries[i];
            if (rate > 0.6)
                step[i] = std::min(step[i] * (1.0 + 2.0 * (rate - 0.6)), 1e3 * scales[i]);
            else if (rate < 0.4)
                step[i] = std::max(step[i] / (1.0 + 2.0 * (0.4 - rate)), 1e-5 * scales[i]);
        }
        stall = improved ? 0 : stall + 1;
        temp *= cfg.cooling_rate;
    }

    if (!phase2 || !run.gate_reached) {
        run.x = best_x;
        run.fidelity = best_f;
        run.j = objective(best_x).J;  // J of the reported point
        ++run.evals;
    }
    return run;
}

struct RestartOutcome {
    SARun best;
    int winner = 0;
    long total_evals = 0;
};

// Executes one restart per task across n_threads workers; the reducer is
// deterministic regardless of scheduling.
template <typename MakeObjective>
RestartOutcome run_restarts(MakeObjective&& make_objective, const std::vector<double>& x0,
                            const std::vector<double>& scales, double gate, bool pareto,
                            const AnnealConfig& cfg, int n_threads) {
    std::vector<SARun> runs(cfg.restarts);
    std::atomic<int> next{0};
    auto worker = [&]() {
        auto objective = make_objective();
        for (int r = next.fetch_add(1); r < cfg.restarts; r = next.fetch_add(1)) {
            const std::uint64_t rs = splitmix64(cfg.seed ^ (0x51ed2701ull + 0x9e3779b9ull * r));
            runs[r] = run_sa(objective, x0, scales, gate, pareto, cfg, rs,
                             r == 0 ? 0.0 : cfg.restart_jitter);
        }
    };
    const int workers = std::max(1, std::min(n_threads, cfg.restarts));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    RestartOutcome out;
    auto better = [&](const SARun& a, const SARun& b) {
        if (a.gate_reached != b.gate_reached) return a.gate_reached;
        if (a.gate_reached && pareto && a.j != b.j) return a.j < b.j;
        return a.fidelity > b.fidelity;
    };
    for (int r = 0; r < cfg.restarts; ++r) {
        out.total_evals += runs[r].evals;
        if (r > 0 && better(runs[r], runs[out.winner])) out.winner = r;
    }
    out.best = runs[out.winner];
    return out;
}

ScalarBundle bundle_from_vector(const std::vector<double>& x) {
    ScalarBundle b;
    b.g10 = x[0];
    b.g01 = x[1];
    b.k10 = x[2];
    b.k01 = x[3];
    b.g20 = x[4];
    b.g11t = x[5];
    b.g02 = x[6];
    b.k20 = x[7];
    b.k11 = x[8];
    b.k02 = x[9];
    return b;
}

std::vector<double> vector_from_bundle(const ScalarBundle& b) {
    return {b.g10, b.g01, b.k10, b.k01, b.g20, b.g11t, b.g02, b.k20, b.k11, b.k02};
}

}  // namespace

OptimalControlSolution anneal_optimal(const ShootingProblem& problem, const AnnealConfig& cfg,
                                      int n_threads) {
    problem.validate();
    cfg.validate();
    const OperatorSet ops = build_operators(FockDim(int(problem.rho0.rows())));
    const Vec psi0 = ket_from_density(problem.rho0);
    const Vec psit = ket_from_density(problem.rho_target);
    const std::vector<double> x0 = vector_from_bundle(bundle_sigma_identity(problem.rho0, ops));
    const std::vector<double> scales = resolve_scales(
        cfg, 10, {0.4, 0.4, 2.0, 2.0, 0.5, 0.5, 0.5, 2.0, 2.0, 2.0});

    auto make_objective = [&]() {
        auto prop = std::make_shared<KetPropagator>(ops, problem.tau, problem.dt);
        prop->cache_unitaries(problem.lambda1_max);
        return [&, prop](const std::vector<double>& x) {
            return mlp_objective(psi0, psit, bundle_from_vector(x), problem.t_f,
                                 problem.lambda1_max, *prop);
        };
    };
    const RestartOutcome out = run_restarts(make_objective, x0, scales, problem.fidelity_gate,
                                            true, cfg, n_threads);
    const SARun& run = out.best;

    OptimalControlSolution sol;
    sol.bundle0 = bundle_from_vector(run.x);
    sol.fidelity = run.fidelity;
    sol.j_cost = run.j;
    sol.converged = run.gate_reached;
    sol.seed = cfg.seed;
    sol.problem_hash = problem.hash();
    sol.evaluations = out.total_evals;
    sol.winning_restart = out.winner;
    sol.phase2_accepts = run.phase2_accepts;
    sol.schedule = schedule_from_bundle(sol.bundle0, problem.tau, problem.t_f, problem.dt,
                                        problem.lambda1_max);
    return sol;
}

FourierControl FourierControl::zeros(int n_c, double lambda1_max, double t_f) {
    FourierControl f;
    f.n_c = n_c;
    f.lambda1_max = lambda1_max;
    f.t_f = t_f;
    f.c.assign(n_c + 1, 0.0);
    f.d.assign(n_c + 1, 0.0);
    f.cp.assign(n_c + 1, 0.0);
    f.dp.assign(n_c + 1, 0.0);
    return f;
}

std::pair<double, double> FourierControl::eval(double t) const {
    double f1 = 0, f2 = 0;
    const double w = 2.0 * M_PI / t_f;
    for (int n = 0; n <= n_c; ++n) {
        const double cn = std::cos(w * n * t), sn = std::sin(w * n * t);
        f1 += c[n] * cn + d[n] * sn;
        f2 += cp[n] * cn + dp[n] * sn;
    }
    const double theta = 0.5 * M_PI * std::tanh(2.0 * f1 / M_PI);
    const double l1 = lambda1_max > 0 ? lambda1_max * std::tanh(f2 / lambda1_max) : 0.0;
    return {theta, l1};
}

ControlFn FourierControl::as_fn() const {
    FourierControl copy = *this;
    return [copy](double t) { return copy.eval(t); };
}

std::vector<double> FourierControl::flatten() const {
    std::vector<double> x;
    x.reserve(4 * (n_c + 1));
    x.insert(x.end(), c.begin(), c.end());
    x.insert(x.end(), d.begin(), d.end());
    x.insert(x.end(), cp.begin(), cp.end());
    x.insert(x.end(), dp.begin(), dp.end());
    return x;
}

FourierControl FourierControl::unflatten(const std::vector<double>& x, int n_c,
                                         double lambda1_max, double t_f) {
    if (x.size() != std::size_t(4 * (n_c + 1)))
        throw ValidationError("FourierControl: coefficient vector has wrong size");
    FourierControl f = zeros(n_c, lambda1_max, t_f);
    const int k = n_c + 1;
    std::copy(x.begin(), x.begin() + k, f.c.begin());
    std::copy(x.begin() + k, x.begin() + 2 * k, f.d.begin());
    std::copy(x.begin() + 2 * k, x.begin() + 3 * k, f.cp.begin());
    std::copy(x.begin() + 3 * k, x.end(), f.dp.begin());
    return f;
}

SampleControlSolution anneal_sample_control(const ShootingProblem& problem,
                                            const AnnealConfig& cfg, int n_threads) {
    problem.validate();
    cfg.validate();
    const OperatorSet ops = build_operators(FockDim(int(problem.rho0.rows())));
    const Vec psi0 = ket_from_density(problem.rho0);
    const Vec psit = ket_from_density(problem.rho_target);
    const ScalarBundle seed_bundle = bundle_sigma_identity(problem.rho0, ops);
    const int n_c = 5;
    const std::vector<double> x0(4 * (n_c + 1), 0.0);
    const std::vector<double> scales = resolve_scales(cfg, x0.size(),
                                                      std::vector<double>(x0.size(), 0.35));

    auto make_objective = [&]() {
        auto prop = std::make_shared<KetPropagator>(ops, problem.tau, problem.dt);
        return [&, prop](const std::vector<double>& x) {
            const FourierControl fc =
                FourierControl::unflatten(x, n_c, problem.lambda1_max, problem.t_f);
            return mlp_objective_fixed(psi0, psit, seed_bundle, problem.t_f,
                                       [&fc](double t) { return fc.eval(t); }, *prop);
        };
    };
    const RestartOutcome out = run_restarts(make_objective, x0, scales, problem.fidelity_gate,
                                            false, cfg, n_threads);
    const SARun& run = out.best;

    SampleControlSolution sol;
    sol.control = FourierControl::unflatten(run.x, n_c, problem.lambda1_max, problem.t_f);
    sol.fidelity = run.fidelity;
    sol.j_cost = run.j;
    sol.converged = run.gate_reached;
    sol.seed = cfg.seed;
    sol.problem_hash = problem.hash();
    sol.evaluations = out.total_evals;
    sol.winning_restart = out.winner;
    sol.schedule = schedule_from_controls(sol.control.as_fn(), seed_bundle, problem.tau,
                                          problem.t_f, problem.dt);
    return sol;
}

Theta0FitSolution anneal_theta0(const ShootingProblem& problem, const AnnealConfig& cfg,
                                int n_threads) {
    problem.validate();
    cfg.validate();
    const OperatorSet ops = build_operators(FockDim(int(problem.rho0.rows())));
    const Vec psi0 = ket_from_density(problem.rho0);
    const Vec psit = ket_from_density(problem.rho_target);
    const ScalarBundle seed_bundle = bundle_sigma_identity(problem.rho0, ops);
    const std::vector<double> x0 = {seed_bundle.g10, seed_bundle.g01, 0.0, 0.0};
    const std::vector<double> scales = resolve_scales(cfg, 4, {0.3, 0.3, 6.0, 6.0});
    auto theta0_controls = [](double) { return std::pair<double, double>(0.0, 0.0); };

    auto make_objective = [&]() {
        auto prop = std::make_shared<KetPropagator>(ops, problem.tau, problem.dt);
        return [&, prop](const std::vector<double>& x) {
            ScalarBundle b = seed_bundle;
            b.g10 = x[0];
            b.g01 = x[1];
            b.k10 = x[2];
            b.k01 = x[3];
            return mlp_objective_fixed(psi0, psit, b, problem.t_f,
                                       [](double) { return std::pair<double, double>(0.0, 0.0); },
                                       *prop);
        };
    };
    (void)theta0_controls;
    const RestartOutcome out = run_restarts(make_objective, x0, scales, problem.fidelity_gate,
                                            false, cfg, n_threads);
    const SARun& run = out.best;

    Theta0FitSolution sol;
    sol.bundle0 = seed_bundle;
    sol.bundle0.g10 = run.x[0];
    sol.bundle0.g01 = run.x[1];
    sol.bundle0.k10 = run.x[2];
    sol.bundle0.k01 = run.x[3];
    sol.fidelity = run.fidelity;
    sol.j_cost = run.j;
    sol.converged = run.gate_reached;
    sol.evaluations = out.total_evals;
    return sol;
}

namespace {

nlohmann::json schedule_to_json(const ControlSchedule& s) {
    return {{"dt", s.dt}, {"theta", s.theta}, {"lambda1", s.lambda1}, {"r", s.r}};
}

ControlSchedule schedule_from_json(const nlohmann::json& j) {
    ControlSchedule s;
    s.dt = j.at("dt").get<double>();
    s.theta = j.at("theta").get<std::vector<double>>();
    s.lambda1 = j.at("lambda1").get<std::vector<double>>();
    s.r = j.at("r").get<std::vector<double>>();
    return s;
}

}  // namespace

std::string OptimalControlSolution::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["type"] = "optimal";
    j["problem_hash"] = hex64(problem_hash);
    j["seed"] = seed;
    j["bundle0"] = vector_from_bundle(bundle0);
    j["fidelity"] = fidelity;
    j["j_cost"] = j_cost;
    j["converged"] = converged;
    j["evaluations"] = evaluations;
    j["winning_restart"] = winning_restart;
    j["phase2_accepts"] = phase2_accepts;
    j["schedule"] = schedule_to_json(schedule);
    return j.dump(2);
}

OptimalControlSolution OptimalControlSolution::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("type").get<std::string>() != "optimal")
        throw ValidationError("solution file is not an optimal-control solution");
    OptimalControlSolution s;
    s.bundle0 = bundle_from_vector(j.at("bundle0").get<std::vector<double>>());
    s.fidelity = j.at("fidelity").get<double>();
    s.j_cost = j.at("j_cost").get<double>();
    s.converged = j.at("converged").get<bool>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.problem_hash = std::stoull(j.at("problem_hash").get<std::string>(), nullptr, 16);
    s.evaluations = j.at("evaluations").get<long>();
    s.winning_restart = j.at("winning_restart").get<int>();
    s.phase2_accepts = j.value("phase2_accepts", 0);
    s.schedule = schedule_from_json(j.at("schedule"));
    return s;
}

std::string SampleControlSolution::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["type"] = "sample";
    j["problem_hash"] = hex64(problem_hash);
    j["seed"] = seed;
    j["n_c"] = control.n_c;
    j["lambda1_max"] = control.lambda1_max;
    j["t_f"] = control.t_f;
    j["coefficients"] = control.flatten();
    j["fidelity"] = fidelity;
    j["j_cost"] = j_cost;
    j["converged"] = converged;
    j["evaluations"] = evaluations;
    j["winning_restart"] = winning_restart;
    j["schedule"] = schedule_to_json(schedule);
    return j.dump(2);
}

SampleControlSolution SampleControlSolution::from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    if (j.at("type").get<std::string>() != "sample")
        throw ValidationError("solution file is not a sample-control solution");
    SampleControlSolution s;
    s.control = FourierControl::unflatten(j.at("coefficients").get<std::vector<double>>(),
                                          j.at("n_c").get<int>(),
                                          j.at("lambda1_max").get<double>(),
                                          j.at("t_f").get<double>());
    s.fidelity = j.at("fidelity").get<double>();
    s.j_cost = j.at("j_cost").get<double>();
    s.converged = j.at("converged").get<bool>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.problem_hash = std::stoull(j.at("problem_hash").get<std::string>(), nullptr, 16);
    s.evaluations = j.at("evaluations").get<long>();
    s.winning_restart = j.at("winning_restart").get<int>();
    s.schedule = schedule_from_json(j.at("schedule"));
    return s;
}

Evaluation evaluate_control(const OptimalControlSolution& sol, const ShootingProblem& problem,
                            bool with_path) {
    problem.validate();
    const OperatorSet ops = build_operators(FockDim(int(problem.rho0.rows())));
    KetPropagator prop(ops, problem.tau, problem.dt);
    prop.cache_unitaries(problem.lambda1_max);
    const Vec psi0 = ket_from_density(problem.rho0);
    const Vec psit = ket_from_density(problem.rho_target);
    const MLPObjective obj =
        mlp_objective(psi0, psit, sol.bundle0, problem.t_f, problem.lambda1_max, prop);
    Evaluation ev;
    ev.fidelity = obj.fidelity;
    ev.j_cost = obj.J;
    if (with_path) {
        ev.result = mlp_integrate(problem.rho0, sol.bundle0, problem.tau, problem.t_f, problem.dt,
                                  problem.lambda1_max, ops);
    } else {
        ev.result.schedule = sol.schedule;
    }
    return ev;
}

Evaluation evaluate_control(const FourierControl& control, const ShootingProblem& problem,
                            bool with_path) {
    problem.validate();
    const OperatorSet ops = build_operators(FockDim(int(problem.rho0.rows())));
    KetPropagator prop(ops, problem.tau, problem.dt);
    const Vec psi0 = ket_from_density(problem.rho0);
    const Vec psit = ket_from_density(problem.rho_target);
    const ScalarBundle seed_bundle = bundle_sigma_identity(problem.rho0, ops);
    const auto fn = control.as_fn();
    const MLPObjective obj = mlp_objective_fixed(psi0, psit, seed_bundle, problem.t_f, fn, prop);
    Evaluation ev;
    ev.fidelity = obj.fidelity;
    ev.j_cost = obj.J;
    if (with_path)
        ev.result = mlp_integrate_fixed(problem.rho0, seed_bundle, problem.tau, problem.t_f,
                                        problem.dt, fn, ops);
    else
        ev.result.schedule = schedule_from_controls(fn, seed_bundle, problem.tau, problem.t_f,
                                                    problem.dt);
    return ev;
}

Evaluation evaluate_control(const ControlSchedule& schedule, const ShootingProblem& problem,
                            bool with_path) {
    problem.validate();
    const OperatorSet ops = build_operators(FockDim(int(problem.rho0.rows())));
    KetPropagator prop(ops, problem.tau, problem.dt);
    const Vec psi0 = ket_from_density(problem.rho0);
    const Vec psit = ket_from_density(problem.rho_target);
    const ScalarBundle seed_bundle = bundle_sigma_identity(problem.rho0, ops);
    auto fn = [&schedule](double t) {
        return std::pair<double, double>(schedule.theta_at(t), schedule.lambda1_at(t));
    };
    const MLPObjective obj = mlp_objective_fixed(psi0, psit, seed_bundle, problem.t_f, fn, prop);
    Evaluation ev;
    ev.fidelity = obj.fidelity;
    ev.j_cost = obj.J;
    if (with_path)
        ev.result = mlp_integrate_fixed(problem.rho0, seed_bundle, problem.tau, problem.t_f,
                                        problem.dt, fn, ops);
    return ev;
}

}  // namespace cdjp
