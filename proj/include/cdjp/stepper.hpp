#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "cdjp/fock.hpp"

namespace cdjp {

struct StepParams {
    double dt = 1e-3;    // units of 1/ω
    double tau = 15.0;   // collapse timescale, units of 1/ω
    double theta = 0.0;  // quadrature angle
    double lambda1 = 0.0;
    double lambda2 = 0.0;

    void validate() const;  // dt>0, tau>0, weak-measurement regime dt/tau < 0.01
};

// Counter-based Gaussian stream: the increment at a given step is a pure
// function of (seed, stream_id, step), so trajectories are reproducible
// bit-for-bit and batches parallelize without shared state.
struct NoiseStream {
    std::uint64_t seed = 0;
    std::uint64_t stream_id = 0;

    double normal(std::uint64_t step) const;                   // N(0,1)
    double wiener(std::uint64_t step, double dt) const;        // N(0,dt)
};

// One step of the deterministic-readout (Stratonovich-form) master equation:
// ρ' = U M ρ M† U† / Tr(·) with M = 1 + (r·dt/2τ)L − (dt/4τ)L² and U the
// 4th-order truncated exponential of −iH·dt. Single-Kraus conjugation keeps
// ρ positive for any dt.
Mat stratonovich_step(const Mat& rho, double r, const StepParams& p, const OperatorSet& ops);

// One Itô trajectory step: r = ⟨L_θ⟩ + √τ·dW/dt,
// M = 1 − iH·dt + (r·dt/2τ)L − (dt/8τ)L², ρ' = MρM†/Tr(·).
// Returns the updated state and the readout used.
std::pair<Mat, double> ito_step(const Mat& rho, double dW, const StepParams& p,
                                const OperatorSet& ops);

// 4th-order truncated exponential of −i·dt·H.
Mat truncated_unitary(const Mat& h, double dt);

// Time-sampled control pair (θ(t), λ1(t)) plus the reference readout record.
struct ControlSchedule {
    double dt = 1e-3;  // sample spacing
    std::vector<double> theta;
    std::vector<double> lambda1;
    std::vector<double> r;  // most-likely readout that produced this schedule

    std::size_t size() const { return theta.size(); }
    int index_at(double t) const;
    double theta_at(double t) const { return theta[index_at(t)]; }
    double lambda1_at(double t) const { return lambda1[index_at(t)]; }
};

struct TrajectoryRecord {
    std::vector<double> t;
    std::vector<Moments> moments;
    std::vector<double> readout;  // readout used during [t_k, t_k+dt)
    Mat final_state;              // density matrix at t_f
    double final_fidelity = -1;   // filled by the caller against its target

    std::string to_csv() const;  // columns: t,x_mean,p_mean,var_x,cov_xp,var_p,r
};

// Integrate one stochastic trajectory from ρ0 under the given schedule.
// Trajectory noise comes from `noise`; state invariants (trace, Hermiticity,
// positivity) are enforced/checked along the way.
TrajectoryRecord simulate_trajectory(const Mat& rho0, const ControlSchedule& schedule, double tau,
                                     double t_f, double dt, const NoiseStream& noise,
                                     const OperatorSet& ops, bool record_steps = true);

// Matrix-free propagation of pure states by the same Kraus maps. Single-Kraus
// conjugation keeps pure states pure, so this path is algebraically identical
// to the density-matrix steppers for rank-1 input, at matvec cost.
class KetPropagator {
public:
    KetPropagator(const OperatorSet& ops, double tau, double dt);

    // Precompute the truncated unitaries for a bang-bang pair ±λ1max.
    void cache_unitaries(double lambda1_max);

    struct StepStats {
        Moments m;          // moments of the state before the step
        double exp_l = 0;   // ⟨L_θ⟩ before the step
        double exp_l2 = 0;  // ⟨L_θ²⟩ before the step
        double r = 0;       // readout used
    };

    StepStats strat_step(Vec& psi, double r, double theta, double lambda1);
    StepStats ito_step(Vec& psi, double dW, double theta, double lambda1);
    StepStats measure(const Vec& psi, double theta);  // stats only, no update

    double dt() const { return dt_; }
    double tau() const { return tau_; }

private:
    const Mat* find_cached(double lambda1) const;
    void apply_truncated_unitary(Vec& psi, double lambda1);  // Horner fallback

    const OperatorSet& ops_;
    double tau_, dt_;
    std::vector<std::pair<double, Mat>> u_cache_;
    Vec xpsi_, ppsi_, lpsi_, xlpsi_, plpsi_, l2psi_, hpsi_, acc_, work_;
};

}  // namespace cdjp
