#pragma once

#include <functional>
#include <vector>

#include "cdjp/fock.hpp"
#include "cdjp/stepper.hpp"

namespace cdjp {

// The ten real reduced variables tracking the state/costate pair through
// Γ(n,m) = Tr(XⁿPᵐΩ), κ(n,m) = i·Tr(XⁿPᵐΛ) with Ω = ½[ρ,σ]₊, Λ = [ρ,σ].
// g11t is the shifted real quantity Γ̃(1,1) = Γ(1,1) − i/2. Γ(0,0)=1 and
// κ(0,0)=0 are implicit.
struct ScalarBundle {
    double g10 = 0, g01 = 0;  // Γ(1,0), Γ(0,1)
    double k10 = 0, k01 = 0;  // κ(1,0), κ(0,1)
    double g20 = 0, g11t = 0, g02 = 0;
    double k20 = 0, k11 = 0, k02 = 0;

    ScalarBundle& operator+=(const ScalarBundle& o);
    friend ScalarBundle operator+(ScalarBundle a, const ScalarBundle& b) { return a += b; }
    friend ScalarBundle operator*(double s, const ScalarBundle& b);
};

// Trace-definition bundle for a given (ρ, σ) pair.
ScalarBundle bundle_from_state(const Mat& rho, const Mat& sigma, const OperatorSet& ops);
// The σ = 𝟙 point: κ ≡ 0 and Γ equal to the plain moments of ρ.
ScalarBundle bundle_sigma_identity(const Mat& rho, const OperatorSet& ops);

// r_θ = cosθ·Γ(1,0) + sinθ·Γ(0,1)
double optimal_readout(const ScalarBundle& b, double theta);

// The closed ten-variable system (λ2 must vanish for closure).
ScalarBundle bundle_rhs(const ScalarBundle& b, double theta, double lambda1, double tau,
                        double lambda2 = 0.0);

// Bang-bang parametric potential λ1* = −λ1max·sign(κ(2,0)); +λ1max at the tie.
double optimal_lambda1(double k20, double lambda1_max);

struct ThetaStar {
    double a_gamma = 0, b_gamma = 0, r_gamma = 0;
    double theta = 0;
};
// θ* = ½·atan2(B_Γ, A_Γ); holds prev_theta when R_Γ < 1e-12.
ThetaStar optimal_theta(const ScalarBundle& b, double prev_theta);

struct PontryaginValue {
    double K = 0;
    double p0 = -1.0;  // abnormal multiplier, fixed
};
PontryaginValue pontryagin_value(const ScalarBundle& b, double lambda1_max, double tau);

// ---- operator-level costate machinery (generic in H and L) ----

// Conditional-evolution generator: F(ρ,r) = −i[H,ρ] − (1/4τ)[ΔV,ρ]₊ + (r/2τ)[ΔL,ρ]₊.
Mat sme_rhs(const Mat& rho, double r, const Mat& h, const Mat& l, double tau);

// Coupled most-likely-path derivatives (gauge ⟨σ⟩ = Tr(σρ) = 1):
// dσ/dt = −i[H,σ] + (1/4τ)[ΔV,σ]₊ − (r/2τ)[ΔL,σ]₊ (the negative adjoint of F).
// Throws GaugeViolation when |Tr(σρ) − 1| > 1e-6.
std::pair<Mat, Mat> costate_rhs(const Mat& rho, const Mat& sigma, double r, const Mat& h,
                                const Mat& l, double tau);
// Oscillator specialization with H = H0 + λ1X² + λ2X³ and L = L_θ.
std::pair<Mat, Mat> costate_rhs(const Mat& rho, const Mat& sigma, double r, double theta,
                                double lambda1, double lambda2, double tau,
                                const OperatorSet& ops);

// r* = ½⟨[L,σ]₊⟩ evaluated from the operators.
double optimal_readout_trace(const Mat& rho, const Mat& sigma, const Mat& l);

// Stochastic Hamiltonian −f⁰ + Tr(σF(ρ,r)) with p0 = −1.
double stochastic_hamiltonian(const Mat& rho, const Mat& sigma, double r, const Mat& h,
                              const Mat& l, double tau);

// One RK4 step of the coupled (ρ,σ) system with the readout recomputed from
// the pair at every stage. Used as the reduction-equivalence oracle.
void costate_pair_rk4_step(Mat& rho, Mat& sigma, double theta, double lambda1, double lambda2,
                           double tau, double dt, const OperatorSet& ops);

// ---- resonantly-driven readout system (plain oscillator, λ1 = 0) ----

struct UVWZ {
    double r = 0, v = 0, w = 0, z = 0;
};
UVWZ uvwz_rhs(const UVWZ& s, double phi_dot, double tau);

// Closed form r_θ + i·v_θ = e^{−iφ}(α + it(A+iB)/8τ + ∫₀ᵗ h), with
// h = (i/8τ)(A−iB)e^{2iφ}; the phase integral is evaluated by Simpson
// quadrature of the supplied φ(t).
std::pair<double, double> analytic_uvwz(Complex alpha, double A, double B, double tau,
                                        const std::function<double(double)>& phi, double t,
                                        int quad_points = 2000);

// ---- general-order recurrences ----

// C(n,m,k) = −(−i)^k n!m!/(k!(n−k)!(m−k)!) for k ≤ min(n,m), else 0.
// Commutator expansions [Xⁿ,Pᵐ] = Σ_{k≥1} C(n,m,k)X^{n−k}P^{m−k}.
Complex mccoy_coefficient(int n, int m, int k);

// Complex Γ/κ tables over all (n,m) with n+m ≤ order_cap.
struct GammaKappaTable {
    int order_cap = 2;
    Eigen::MatrixXcd gamma, kappa;  // entry (n,m); invalid corners stay zero
    bool truncated = false;         // a derivative referenced an above-cap entry

    explicit GammaKappaTable(int cap);
    Complex& g(int n, int m) { return gamma(n, m); }
    Complex& k(int n, int m) { return kappa(n, m); }
};

GammaKappaTable table_from_state(const Mat& rho, const Mat& sigma, const OperatorSet& ops,
                                 int order_cap);
GammaKappaTable table_from_bundle(const ScalarBundle& b);  // order_cap = 2

// Both recurrences for every (n,m) with n+m ≤ order_cap; entries above the
// cap are zero-filled and flagged via `truncated` on the result.
GammaKappaTable general_bundle_rhs(const GammaKappaTable& t, double theta, double lambda1,
                                   double lambda2, double tau);

// ---- probability cost ----

// J = ∫ dt/2τ (r² − 2r⟨L⟩ + ⟨L²⟩), trapezoidal rule on aligned samples.
double cost_functional(const std::vector<double>& r, const std::vector<double>& exp_l,
                       const std::vector<double>& exp_l2, double tau, double dt);

// ---- most-likely-path integration ----

struct MLPOptions {
    bool record_path = true;
    bool debug_shadow = false;  // co-integrate an operator-level (ρ,σ) shadow pair
    Mat shadow_sigma0;          // costate seed for the shadow; 𝟙 when empty
                                // (must be consistent with the initial bundle)
};

struct MLPPath {
    std::vector<double> t;
    std::vector<Moments> moments;
    std::vector<double> r, exp_l, exp_l2, pontryagin;
    double J = 0;
    Mat final_state;
    ScalarBundle final_bundle;
    double shadow_drift = -1;  // max |r_bundle − r_trace|, debug_shadow only

    std::string to_csv(const ControlSchedule& schedule) const;
};

struct MLPResult {
    MLPPath path;
    ControlSchedule schedule;
};

// Optimal-control integration: θ*, λ1* and r_θ are derived from the bundle at
// every step (RK4 on the closed-loop bundle system, Kraus stepping for ρ).
MLPResult mlp_integrate(const Mat& rho0, const ScalarBundle& b0, double tau, double t_f,
                        double dt, double lambda1_max, const OperatorSet& ops,
                        const MLPOptions& opts = {});

// Fixed-control integration: (θ(t), λ1(t)) supplied, only the first-order
// bundle entries are evolved (the subsystem is closed).
using ControlFn = std::function<std::pair<double, double>(double)>;
MLPResult mlp_integrate_fixed(const Mat& rho0, const ScalarBundle& b0, double tau, double t_f,
                              double dt, const ControlFn& controls, const OperatorSet& ops,
                              const MLPOptions& opts = {});

// Bundle-only integrations producing the realized control schedule (θ, λ1, r
// per step, plus the closing sample at t_f). Pure functions of their inputs.
ControlSchedule schedule_from_bundle(const ScalarBundle& b0, double tau, double t_f, double dt,
                                     double lambda1_max);
ControlSchedule schedule_from_controls(const ControlFn& controls, const ScalarBundle& b0,
                                       double tau, double t_f, double dt);

// Matvec-path objective used by the shooting solvers: final fidelity against
// a pure target plus the accumulated readout cost J.
struct MLPObjective {
    double fidelity = 0;
    double J = 0;
};
MLPObjective mlp_objective(const Vec& psi0, const Vec& psi_target, const ScalarBundle& b0,
                           double t_f, double lambda1_max, KetPropagator& prop);
MLPObjective mlp_objective_fixed(const Vec& psi0, const Vec& psi_target, const ScalarBundle& b0,
                                 double t_f, const ControlFn& controls, KetPropagator& prop);

}  // namespace cdjp
