#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cdjp/mlp.hpp"

namespace cdjp {

struct ShootingProblem {
    Mat rho0, rho_target;  // target must be pure
    double tau = 15.0;
    double t_f = 3.0;
    double dt = 1e-3;
    double lambda1_max = 0.2;
    double fidelity_gate = 0.92;

    void validate() const;
    std::uint64_t hash() const;  // stable content hash for provenance
};

struct AnnealConfig {
    double initial_temperature = 1.0;
    double cooling_rate = 0.97;
    int steps_per_temperature = 200;
    std::vector<double> proposal_scale;  // per coordinate; empty = solver default
    int restarts = 8;
    std::uint64_t seed = 1;

    // budget controls
    double temperature_floor = 1e-4;
    long max_evals_per_restart = 20000;
    int stall_levels = 30;  // end a restart after this many levels without progress
    double restart_jitter = 1.0;  // relative spread of restart starting points

    void validate() const;
};

struct OptimalControlSolution {
    ScalarBundle bundle0;
    ControlSchedule schedule;
    double fidelity = 0;
    double j_cost = 0;
    bool converged = false;  // fidelity gate reached (NoConvergence flag otherwise)
    std::uint64_t seed = 0;
    std::uint64_t problem_hash = 0;
    long evaluations = 0;
    int winning_restart = -1;
    int phase2_accepts = 0;

    std::string to_json() const;
    static OptimalControlSolution from_json(const std::string& text);
};

// Shooting over the ten initial bundle values. Phase 1 anneals 1 − fidelity;
// once the gate is reached, proposals are accepted only if fidelity stays at
// or above the gate and the readout cost J strictly decreases.
OptimalControlSolution anneal_optimal(const ShootingProblem& problem, const AnnealConfig& cfg,
                                      int n_threads = 1);

// tanh-bounded Fourier controls: θ = (π/2)·tanh(2f1/π), λ1 = λ1max·tanh(f2/λ1max)
// with f1, f2 truncated Fourier series over [0, t_f].
struct FourierControl {
    int n_c = 5;
    std::vector<double> c, d, cp, dp;  // each of size n_c + 1
    double lambda1_max = 0.2;
    double t_f = 3.0;

    static FourierControl zeros(int n_c, double lambda1_max, double t_f);
    std::pair<double, double> eval(double t) const;  // (θ, λ1)
    ControlFn as_fn() const;
    std::vector<double> flatten() const;
    static FourierControl unflatten(const std::vector<double>& x, int n_c, double lambda1_max,
                                    double t_f);
};

struct SampleControlSolution {
    FourierControl control;
    ControlSchedule schedule;
    double fidelity = 0;
    double j_cost = 0;
    bool converged = false;
    std::uint64_t seed = 0;
    std::uint64_t problem_hash = 0;
    long evaluations = 0;
    int winning_restart = -1;

    std::string to_json() const;
    static SampleControlSolution from_json(const std::string& text);
};

// Fidelity maximization over the Fourier coefficients; the most-likely path
// is co-integrated with the first-order bundle only.
SampleControlSolution anneal_sample_control(const ShootingProblem& problem,
                                            const AnnealConfig& cfg, int n_threads = 1);

// θ ≡ 0, λ1 ≡ 0 boundary fit over the four first-order bundle values,
// used by the analytic position-measurement benchmark.
struct Theta0FitSolution {
    ScalarBundle bundle0;  // only first-order entries populated
    double fidelity = 0;
    double j_cost = 0;
    bool converged = false;
    long evaluations = 0;
};
Theta0FitSolution anneal_theta0(const ShootingProblem& problem, const AnnealConfig& cfg,
                                int n_threads = 1);

struct Evaluation {
    double fidelity = 0;
    double j_cost = 0;
    MLPResult result;  // populated when with_path
};

// Deterministic re-computation of a stored solution.
Evaluation evaluate_control(const OptimalControlSolution& sol, const ShootingProblem& problem,
                            bool with_path = false);
Evaluation evaluate_control(const FourierControl& control, const ShootingProblem& problem,
                            bool with_path = false);
Evaluation evaluate_control(const ControlSchedule& schedule, const ShootingProblem& problem,
                            bool with_path = false);

}  // namespace cdjp
