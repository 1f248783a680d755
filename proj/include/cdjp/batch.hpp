#pragma once

#include <map>
#include <string>
#include <vector>

#include "cdjp/stepper.hpp"

namespace cdjp {

struct BatchSpec {
    ControlSchedule control;
    Mat rho0, rho_target;  // target must be pure
    int n_traj = 1000;
    std::uint64_t base_seed = 0;
    double tau = 15.0, t_f = 3.0, dt = 1e-3;
    std::vector<double> thresholds = {0.90, 0.95};
    int bins = 50;
    bool keep_fidelities = true;

    void validate() const;
};

struct FidelityHistogram {
    std::vector<double> bin_edges;             // bins+1 edges on [0,1]
    std::vector<long> counts;                  // per bin
    std::map<double, double> fractions_above;  // threshold → fraction strictly above
    long n = 0;                                // successful trajectories
    long failures = 0;                         // positivity losses (must be 0 normally)

    std::string to_csv() const;
};

struct BatchResult {
    FidelityHistogram hist;
    std::vector<double> fidelities;  // per trajectory when kept
};

// Simulate n_traj stochastic trajectories under the schedule; trajectory i
// draws its noise from stream_id = i of base_seed. Deterministic and
// order-independent under any thread count.
BatchResult run_batch(const BatchSpec& spec, const OperatorSet& ops, int n_threads = 1);

struct ComparisonReport {
    std::vector<double> thresholds;
    std::vector<double> fraction_optimal, fraction_sample;
    std::vector<double> relative_increase_pct;

    std::string to_text() const;
    std::string to_csv() const;
};

ComparisonReport compare(const FidelityHistogram& optimal, const FidelityHistogram& sample,
                         const std::vector<double>& thresholds);

}  // namespace cdjp
