#pragma once

#include <complex>
#include <string>

#include <Eigen/Dense>

#include "cdjp/errors.hpp"

namespace cdjp {

using Complex = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Truncated Fock basis size. Levels run 0..n_levels-1.
struct FockDim {
    int n_levels = 36;

    FockDim() = default;
    explicit FockDim(int n) : n_levels(n) {
        if (n < 2) throw ValidationError("FockDim requires n_levels >= 2, got " + std::to_string(n));
    }
};

// Dense ladder/quadrature operators in the dimensionless convention
// X = (a + a†)/√2, P = i(a† − a)/√2, so the vacuum has Var X = Var P = 1/2.
struct OperatorSet {
    int dim = 0;
    Mat a, adag;
    Mat x, p;
    Mat x2, p2, x3;
    Mat xp_sym;  // (XP + PX)/2
    Mat h0;      // (X² + P²)/2
    Mat identity;
};

OperatorSet build_operators(FockDim dim);

// L_θ = cosθ·X + sinθ·P and the conjugate M_θ = −sinθ·X + cosθ·P.
std::pair<Mat, Mat> quadratures(const OperatorSet& ops, double theta);

// H = (X² + P²)/2 + λ1·X² + λ2·X³.
Mat hamiltonian(const OperatorSet& ops, double lambda1, double lambda2 = 0.0);

// --- state constructors (kets). All are normalized; TruncationLeak is thrown
// when more than 1e-10 weight sits in the top two Fock levels.
Vec fock_superposition_ket(const OperatorSet& ops, const Vec& coefficients);
Vec coherent_ket(const OperatorSet& ops, Complex alpha);
// Even cat |α⟩ + |−α⟩, normalized including the ⟨α|−α⟩ overlap.
Vec cat_ket(const OperatorSet& ops, Complex alpha);
// exp(½(ξ̄ a² − ξ a†²))|0⟩, optionally displaced by β afterwards.
Vec squeezed_vacuum_ket(const OperatorSet& ops, Complex xi, Complex displacement = Complex(0, 0));

enum class StateKind { FockSuperposition, Cat, Coherent, SqueezedVacuum };

struct StateSpec {
    StateKind kind = StateKind::Coherent;
    Vec coefficients;                 // fock_superposition
    Complex alpha{0, 0};              // cat / coherent
    Complex xi{0, 0};                 // squeezed_vacuum
    Complex displacement{0, 0};       // squeezed_vacuum
};

Vec make_state_ket(const OperatorSet& ops, const StateSpec& spec);
Mat make_state(const OperatorSet& ops, const StateSpec& spec);  // pure density matrix

inline Mat density_from_ket(const Vec& psi) { return psi * psi.adjoint(); }

// Dominant eigenvector of a (numerically) pure density matrix.
// Throws NonPureInput when the largest eigenvalue is not ≈ 1.
Vec ket_from_density(const Mat& rho, double tol = 1e-6);

// Tr(ρ ρ_target), target must be pure. Real part returned; the imaginary
// residue is checked to stay below 1e-10.
double fidelity(const Mat& rho, const Mat& rho_target);
double fidelity_ket(const Vec& psi, const Vec& psi_target);
// Tr(ρ |ψ⟩⟨ψ|) without forming the target density matrix.
double fidelity_against_ket(const Mat& rho, const Vec& psi_target);

struct Moments {
    double x_mean = 0, p_mean = 0;
    double var_x = 0, cov_xp = 0, var_p = 0;
};

Moments moments(const Mat& rho, const OperatorSet& ops);
Moments moments_ket(const Vec& psi, const OperatorSet& ops);

// --- small matrix utilities shared across modules
inline void hermitize(Mat& m) { m = 0.5 * (m + m.adjoint()).eval(); }
double hermiticity_residual(const Mat& m);              // ‖M − M†‖_max
double min_eigenvalue_hermitian(const Mat& m);          // assumes Hermitian input
bool is_pure(const Mat& rho, double tol = 1e-8);        // Tr(ρ²) ≈ 1
double expval(const Mat& rho, const Mat& op);           // Re Tr(ρ·op)
double expval_ket(const Vec& psi, const Mat& op);

}  // namespace cdjp
