#include "cdjp/config.hpp"

#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "cdjp/util.hpp"

namespace cdjp {

namespace {

using nlohmann::json;

void require_keys(const json& j, std::initializer_list<const char*> allowed,
                  const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                ok = true;
                break;
            }
        if (!ok) throw ValidationError("unknown key '" + it.key() + "' in " + where);
    }
}

Complex complex_from(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2)
        throw ValidationError(where + " must be a [re, im] pair");
    return {j[0].get<double>(), j[1].get<double>()};
}

json complex_to(Complex z) { return json::array({z.real(), z.imag()}); }

StateSpec state_from_json(const json& j, const std::string& where) {
    require_keys(j, {"kind", "coefficients", "alpha", "xi", "displacement"}, where);
    StateSpec s;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "fock_superposition") {
        s.kind = StateKind::FockSuperposition;
        const json& c = j.at("coefficients");
        s.coefficients = Vec::Zero(c.size());
        for (std::size_t i = 0; i < c.size(); ++i)
            s.coefficients(i) = complex_from(c[i], where + ".coefficients");
    } else if (kind == "cat") {
        s.kind = StateKind::Cat;
        s.alpha = complex_from(j.at("alpha"), where + ".alpha");
    } else if (kind == "coherent") {
        s.kind = StateKind::Coherent;
        s.alpha = complex_from(j.at("alpha"), where + ".alpha");
    } else if (kind == "squeezed_vacuum") {
        s.kind = StateKind::SqueezedVacuum;
        s.xi = complex_from(j.at("xi"), where + ".xi");
        if (j.contains("displacement"))
            s.displacement = complex_from(j.at("displacement"), where + ".displacement");
    } else {
        throw ValidationError(where + ": unknown state kind '" + kind + "'");
    }
    return s;
}

json state_to_json(const StateSpec& s) {
    json j;
    switch (s.kind) {
        case StateKind::FockSuperposition: {
            j["kind"] = "fock_superposition";
            json c = json::array();
            for (Eigen::Index i = 0; i < s.coefficients.size(); ++i)
                c.push_back(complex_to(s.coefficients(i)));
            j["coefficients"] = c;
            break;
        }
        case StateKind::Cat:
            j["kind"] = "cat";
            j["alpha"] = complex_to(s.alpha);
            break;
        case StateKind::Coherent:
            j["kind"] = "coherent";
            j["alpha"] = complex_to(s.alpha);
            break;
        case StateKind::SqueezedVacuum:
            j["kind"] = "squeezed_vacuum";
            j["xi"] = complex_to(s.xi);
            if (s.displacement != Complex(0, 0)) j["displacement"] = complex_to(s.displacement);
            break;
    }
    return j;
}

AnnealConfig anneal_from_json(const json& j) {
    require_keys(j,
                 {"initial_temperature", "cooling_rate", "steps_per_temperature",
                  "proposal_scale", "restarts", "seed", "temperature_floor",
                  "max_evals_per_restart", "stall_levels", "restart_jitter"},
                 "anneal");
    AnnealConfig a;
    a.initial_temperature = j.value("initial_temperature", a.initial_temperature);
    a.cooling_rate = j.value("cooling_rate", a.cooling_rate);
    a.steps_per_temperature = j.value("steps_per_temperature", a.steps_per_temperature);
    if (j.contains("proposal_scale"))
        a.proposal_scale = j.at("proposal_scale").get<std::vector<double>>();
    a.restarts = j.value("restarts", a.restarts);
    a.seed = j.value("seed", a.seed);
    a.temperature_floor = j.value("temperature_floor", a.temperature_floor);
    a.max_evals_per_restart = j.value("max_evals_per_restart", a.max_evals_per_restart);
    a.stall_levels = j.value("stall_levels", a.stall_levels);
    a.restart_jitter = j.value("restart_jitter", a.restart_jitter);
    return a;
}

json anneal_to_json(const AnnealConfig& a) {
    json j;
    j["initial_temperature"] = a.initial_temperature;
    j["cooling_rate"] = a.cooling_rate;
    j["steps_per_temperature"] = a.steps_per_temperature;
    if (!a.proposal_scale.empty()) j["proposal_scale"] = a.proposal_scale;
    j["restarts"] = a.restarts;
    j["seed"] = a.seed;
    j["temperature_floor"] = a.temperature_floor;
    j["max_evals_per_restart"] = a.max_evals_per_restart;
    j["stall_levels"] = a.stall_levels;
    j["restart_jitter"] = a.restart_jitter;
    return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    require_keys(j,
                 {"schema_version", "name", "dim", "tau", "t_f", "dt", "lambda1_max",
                  "initial_state", "target_state", "fidelity_gate", "sample_gate", "anneal",
                  "batch", "gauss", "seed", "threads"},
                 "config");
    ExperimentConfig c;
    c.schema_version = j.value("schema_version", 1);
    if (c.schema_version != 1)
        throw ValidationError("unsupported schema_version " + std::to_string(c.schema_version));
    c.name = j.value("name", c.name);
    c.dim = j.value("dim", c.dim);
    c.tau = j.value("tau", c.tau);
    c.t_f = j.value("t_f", c.t_f);
    c.dt = j.value("dt", c.dt);
    c.lambda1_max = j.value("lambda1_max", c.lambda1_max);
    if (!j.contains("initial_state")) throw ValidationError("config: missing initial_state");
    if (!j.contains("target_state")) throw ValidationError("config: missing target_state");
    c.initial_state = state_from_json(j.at("initial_state"), "initial_state");
    c.target_state = state_from_json(j.at("target_state"), "target_state");
    c.fidelity_gate = j.value("fidelity_gate", c.fidelity_gate);
    c.sample_gate = j.value("sample_gate", c.sample_gate);
    if (j.contains("anneal")) c.anneal = anneal_from_json(j.at("anneal"));
    if (j.contains("batch")) {
        const json& b = j.at("batch");
        require_keys(b, {"n_traj", "thresholds", "bins"}, "batch");
        c.batch.n_traj = b.value("n_traj", c.batch.n_traj);
        if (b.contains("thresholds"))
            c.batch.thresholds = b.at("thresholds").get<std::vector<double>>();
        c.batch.bins = b.value("bins", c.batch.bins);
    }
    if (j.contains("gauss")) {
        const json& g = j.at("gauss");
        require_keys(g, {"q_i", "q_f"}, "gauss");
        if (g.contains("q_i")) {
            c.gauss.q1i = g.at("q_i")[0].get<double>();
            c.gauss.q2i = g.at("q_i")[1].get<double>();
        }
        if (g.contains("q_f")) {
            c.gauss.q1f = g.at("q_f")[0].get<double>();
            c.gauss.q2f = g.at("q_f")[1].get<double>();
        }
    }
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.validate();
    return c;
}

std::string ExperimentConfig::to_json_text() const {
    json j;
    j["schema_version"] = schema_version;
    j["name"] = name;
    j["dim"] = dim;
    j["tau"] = tau;
    j["t_f"] = t_f;
    j["dt"] = dt;
    j["lambda1_max"] = lambda1_max;
    j["initial_state"] = state_to_json(initial_state);
    j["target_state"] = state_to_json(target_state);
    j["fidelity_gate"] = fidelity_gate;
    j["sample_gate"] = sample_gate;
    j["anneal"] = anneal_to_json(anneal);
    j["batch"] = {{"n_traj", batch.n_traj}, {"thresholds", batch.thresholds},
                  {"bins", batch.bins}};
    j["gauss"] = {{"q_i", {gauss.q1i, gauss.q2i}}, {"q_f", {gauss.q1f, gauss.q2f}}};
    j["seed"] = seed;
    j["threads"] = threads;
    return j.dump(2);
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json_text()); }

void ExperimentConfig::validate() const {
    if (dim < 2) throw ValidationError("config: dim must be >= 2");
    if (!(tau > 0) || !(t_f >= 0) || !(dt > 0) || lambda1_max < 0)
        throw ValidationError("config: physical parameters must be positive");
    if (!(fidelity_gate > 0 && fidelity_gate < 1) || !(sample_gate > 0 && sample_gate < 1))
        throw ValidationError("config: gates must lie in (0,1)");
    if (batch.n_traj < 1) throw ValidationError("config: batch.n_traj must be >= 1");
    anneal.validate();
}

ShootingProblem ExperimentConfig::shooting_problem(const OperatorSet& ops, double gate) const {
    ShootingProblem p;
    p.rho0 = make_state(ops, initial_state);
    p.rho_target = make_state(ops, target_state);
    p.tau = tau;
    p.t_f = t_f;
    p.dt = dt;
    p.lambda1_max = lambda1_max;
    p.fidelity_gate = gate > 0 ? gate : fidelity_gate;
    return p;
}

ExperimentConfig ExperimentConfig::preset(const std::string& name) {
    ExperimentConfig c;
    c.name = name;

    // solver settings shared by the state-preparation presets
    c.anneal.initial_temperature = 0.25;
    c.anneal.cooling_rate = 0.93;
    c.anneal.steps_per_temperature = 120;
    c.anneal.restarts = 8;
    c.anneal.temperature_floor = 5e-4;
    c.anneal.max_evals_per_restart = 6000;
    c.anneal.stall_levels = 25;
    c.anneal.seed = 1;

    auto fock_coeffs = [](std::initializer_list<Complex> cs) {
        Vec v(Eigen::Index(cs.size()));
        Eigen::Index i = 0;
        for (Complex z : cs) v(i++) = z;
        return v;
    };
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);

    if (name == "binomial") {
        c.initial_state.kind = StateKind::FockSuperposition;
        c.initial_state.coefficients =
            fock_coeffs({inv_sqrt2, 0, 0, 0, -inv_sqrt2});
        c.target_state.kind = StateKind::FockSuperposition;
        c.target_state.coefficients = fock_coeffs({inv_sqrt2, 0, 0, 0, inv_sqrt2});
        c.fidelity_gate = 0.93;
        c.sample_gate = 0.93;
        c.seed = 101;
    } else if (name == "cat-cooling") {
        c.initial_state.kind = StateKind::Cat;
        c.initial_state.alpha = Complex(0.25, -0.75);
        c.target_state.kind = StateKind::FockSuperposition;
        c.target_state.coefficients = fock_coeffs({1.0});
        c.fidelity_gate = 0.95;
        c.sample_gate = 0.95;
        c.seed = 102;
    } else if (name == "cat-to-cat") {
        c.initial_state.kind = StateKind::Cat;
        c.initial_state.alpha = Complex(-0.25, 1.55);
        c.target_state.kind = StateKind::Cat;
        c.target_state.alpha = Complex(1.35, -0.75);
        c.fidelity_gate = 0.93;
        c.sample_gate = 0.95;
        c.seed = 103;
    } else if (name == "gauss-theta0") {
        const SteadyCovariances q = steady_state_covariances(c.tau);
        const Complex xi = squeezing_parameter(q.q3, q.q4, q.q5);
        c.lambda1_max = 0.0;
        c.initial_state.kind = StateKind::SqueezedVacuum;
        c.initial_state.xi = xi;
        c.target_state.kind = StateKind::SqueezedVacuum;
        c.target_state.xi = xi;
        c.target_state.displacement =
            Complex(c.gauss.q1f * inv_sqrt2, c.gauss.q2f * inv_sqrt2);
        c.fidelity_gate = 0.98;
        c.sample_gate = 0.98;
        c.seed = 104;
        c.anneal.proposal_scale = {0.3, 0.3, 6.0, 6.0};
    } else {
        throw ValidationError("unknown preset '" + name + "'");
    }
    return c;
}

int resolve_threads(int cli_value) {
    if (cli_value > 0) return cli_value;
    if (const char* env = std::getenv("CDJP_THREADS")) {
        const int v = std::atoi(env);
        if (v > 0) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw > 0 ? int(hw) : 1;
}

}  // namespace cdjp
