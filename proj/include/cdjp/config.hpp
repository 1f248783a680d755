#pragma once

#include <string>

#include "cdjp/anneal.hpp"
#include "cdjp/batch.hpp"
#include "cdjp/gauss.hpp"

namespace cdjp {

struct BatchConfig {
    int n_traj = 2000;
    std::vector<double> thresholds = {0.90, 0.95};
    int bins = 50;
};

struct GaussBenchConfig {
    double q1i = 0, q2i = 0;  // mean-value endpoints for the θ=0 benchmark
    double q1f = 1.0, q2f = 0.5;
};

// One experiment: states, physics parameters, solver and batch settings.
// JSON round-trip is strict: unknown keys are rejected, the schema is
// versioned, and the canonical dump feeds the provenance hash embedded in
// every output file.
struct ExperimentConfig {
    int schema_version = 1;
    std::string name = "custom";
    int dim = 36;
    double tau = 15.0, t_f = 3.0, dt = 1e-3;
    double lambda1_max = 0.2;
    StateSpec initial_state;
    StateSpec target_state;
    double fidelity_gate = 0.92;
    double sample_gate = 0.95;
    AnnealConfig anneal;
    BatchConfig batch;
    GaussBenchConfig gauss;
    std::uint64_t seed = 1;
    int threads = 0;  // 0 = resolve from CDJP_THREADS or hardware

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig preset(const std::string& name);  // binomial, cat-cooling,
                                                              // cat-to-cat, gauss-theta0
    std::string to_json_text() const;
    std::uint64_t hash() const;  // of the canonical dump

    void validate() const;
    ShootingProblem shooting_problem(const OperatorSet& ops, double gate = -1) const;
};

// --threads flag beats CDJP_THREADS beats hardware concurrency.
int resolve_threads(int cli_value);

}  // namespace cdjp
