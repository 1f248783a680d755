#include "cdjp/fock.hpp"

#include <cmath>

namespace cdjp {

OperatorSet build_operators(FockDim dim) {
    const int n = dim.n_levels;
    if (n < 2) throw ValidationError("build_operators requires n_levels >= 2");

    OperatorSet ops;
    ops.dim = n;
    ops.a = Mat::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) ops.a(i, i + 1) = std::sqrt(double(i + 1));
    ops.adag = ops.a.adjoint();

    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    ops.x = inv_sqrt2 * (ops.a + ops.adag);
    ops.p = Complex(0, 1) * inv_sqrt2 * (ops.adag - ops.a);
    hermitize(ops.x);
    hermitize(ops.p);

    ops.x2 = ops.x * ops.x;
    ops.p2 = ops.p * ops.p;
    ops.x3 = ops.x2 * ops.x;
    ops.xp_sym = 0.5 * (ops.x * ops.p + ops.p * ops.x);
    ops.h0 = 0.5 * (ops.x2 + ops.p2);
    hermitize(ops.x2);
    hermitize(ops.p2);
    hermitize(ops.x3);
    hermitize(ops.xp_sym);
    hermitize(ops.h0);
    ops.identity = Mat::Identity(n, n);
    return ops;
}

std::pair<Mat, Mat> quadratures(const OperatorSet& ops, double theta) {
    if (!std::isfinite(theta)) throw ValidationError("quadratures: theta must be finite");
    const double c = std::cos(theta), s = std::sin(theta);
    return {c * ops.x + s * ops.p, -s * ops.x + c * ops.p};
}

Mat hamiltonian(const OperatorSet& ops, double lambda1, double lambda2) {
    if (!std::isfinite(lambda1) || !std::isfinite(lambda2))
        throw ValidationError("hamiltonian: control values must be finite");
    Mat h = ops.h0 + lambda1 * ops.x2;
    if (lambda2 != 0.0) h += lambda2 * ops.x3;
    return h;
}

namespace {

void check_truncation(const Vec& psi, const char* what) {
    const int n = int(psi.size());
    const double top = std::norm(psi(n - 1)) + std::norm(psi(n - 2));
    if (top > 1e-10)
        throw TruncationLeak(std::string(what) + " puts " + std::to_string(top) +
                             " weight in the top two Fock levels");
}

}  // namespace

Vec fock_superposition_ket(const OperatorSet& ops, const Vec& coefficients) {
    if (coefficients.size() > ops.dim)
        throw DimensionMismatch("fock_superposition: more coefficients than basis levels");
    Vec psi = Vec::Zero(ops.dim);
    psi.head(coefficients.size()) = coefficients;
    const double nrm = psi.norm();
    if (nrm < 1e-300) throw ValidationError("fock_superposition: zero-norm coefficient vector");
    psi /= nrm;
    check_truncation(psi, "fock_superposition");
    return psi;
}

Vec coherent_ket(const OperatorSet& ops, Complex alpha) {
    Vec psi(ops.dim);
    // |α⟩ = e^{-|α|²/2} Σ αⁿ/√n! |n⟩, built by recursion to avoid overflow.
    psi(0) = std::exp(-0.5 * std::norm(alpha));
    for (int k = 1; k < ops.dim; ++k) psi(k) = psi(k - 1) * alpha / std::sqrt(double(k));
    const double nrm = psi.norm();
    psi /= nrm;
    check_truncation(psi, "coherent state");
    return psi;
}

Vec cat_ket(const OperatorSet& ops, Complex alpha) {
    Vec plus = Vec(ops.dim), minus = Vec(ops.dim);
    plus(0) = minus(0) = std::exp(-0.5 * std::norm(alpha));
    for (int k = 1; k < ops.dim; ++k) {
        plus(k) = plus(k - 1) * alpha / std::sqrt(double(k));
        minus(k) = minus(k - 1) * (-alpha) / std::sqrt(double(k));
    }
    Vec psi = plus + minus;
    const double nrm = psi.norm();  // includes the ⟨α|−α⟩ interference term
    if (nrm < 1e-300) throw ValidationError("cat state has zero norm");
    psi /= nrm;
    check_truncation(psi, "cat state");
    return psi;
}

Vec squeezed_vacuum_ket(const OperatorSet& ops, Complex xi, Complex displacement) {
    const int n = ops.dim;
    // S(ξ)|0⟩ in the Fock basis: only even levels populated,
    // c_{2k} = (−e^{iΘ} tanh R)^k √((2k)!)/(2^k k!) / √cosh R.
    const double r = std::abs(xi);
    Vec psi = Vec::Zero(n);
    if (r < 1e-300) {
        psi(0) = 1.0;
    } else {
        const Complex phase = xi / r;
        const double th = std::tanh(r);
        Complex ck(1.0, 0.0);
        psi(0) = ck;
        for (int k = 1; 2 * k < n; ++k) {
            // ratio c_{2k}/c_{2k-2} = −e^{iΘ} tanh(R) √((2k−1)(2k)) / (2k)
            ck *= -phase * th * std::sqrt(double(2 * k - 1) * double(2 * k)) / double(2 * k);
            psi(2 * k) = ck;
        }
        psi /= psi.norm();
    }
    if (displacement != Complex(0, 0)) {
        // D(β) = exp(β a† − β̄ a), applied by scaling-and-squaring on the ket.
        Mat g = displacement * ops.adag - std::conj(displacement) * ops.a;
        int squarings = 0;
        double gn = g.cwiseAbs().maxCoeff() * ops.dim;
        while (gn > 0.25 && squarings < 40) {
            g *= 0.5;
            gn *= 0.5;
            ++squarings;
        }
        Mat d = Mat::Identity(n, n);
        Mat term = Mat::Identity(n, n);
        for (int k = 1; k <= 12; ++k) {
            term = (term * g / double(k)).eval();
            d += term;
        }
        for (int s = 0; s < squarings; ++s) d = (d * d).eval();
        psi = d * psi;
        psi /= psi.norm();
    }
    check_truncation(psi, "squeezed state");
    return psi;
}

Vec make_state_ket(const OperatorSet& ops, const StateSpec& spec) {
    switch (spec.kind) {
        case StateKind::FockSuperposition: return fock_superposition_ket(ops, spec.coefficients);
        case StateKind::Cat: return cat_ket(ops, spec.alpha);
        case StateKind::Coherent: return coherent_ket(ops, spec.alpha);
        case StateKind::SqueezedVacuum: return squeezed_vacuum_ket(ops, spec.xi, spec.displacement);
    }
    throw ValidationError("make_state: unknown state kind");
}

Mat make_state(const OperatorSet& ops, const StateSpec& spec) {
    return density_from_ket(make_state_ket(ops, spec));
}

Vec ket_from_density(const Mat& rho, double tol) {
    Eigen::SelfAdjointEigenSolver<Mat> es(rho);
    const int n = int(rho.rows());
    const double top = es.eigenvalues()(n - 1);
    if (std::abs(top - 1.0) > tol)
        throw NonPureInput("ket_from_density: largest eigenvalue " + std::to_string(top));
    Vec psi = es.eigenvectors().col(n - 1);
    // fix the global phase so the extraction is deterministic
    int pivot = 0;
    for (int i = 0; i < n; ++i)
        if (std::abs(psi(i)) > std::abs(psi(pivot))) pivot = i;
    psi *= std::conj(psi(pivot)) / std::abs(psi(pivot));
    return psi;
}

double fidelity(const Mat& rho, const Mat& rho_target) {
    if (rho.rows() != rho_target.rows() || rho.cols() != rho_target.cols())
        throw DimensionMismatch("fidelity: states have different dimensions");
    if (!is_pure(rho_target))
        throw NonPureInput("fidelity: Tr(ρ ρ_f) requires a pure target state");
    const Complex f = (rho * rho_target).trace();
    if (std::abs(f.imag()) > 1e-10)
        throw Error("fidelity: imaginary residue " + std::to_string(f.imag()));
    return f.real();
}

double fidelity_ket(const Vec& psi, const Vec& psi_target) {
    if (psi.size() != psi_target.size())
        throw DimensionMismatch("fidelity_ket: states have different dimensions");
    return std::norm(psi_target.dot(psi));
}

double fidelity_against_ket(const Mat& rho, const Vec& psi_target) {
    if (rho.rows() != psi_target.size())
        throw DimensionMismatch("fidelity_against_ket: dimension mismatch");
    const Complex f = psi_target.dot(rho * psi_target);
    return f.real();
}

Moments moments(const Mat& rho, const OperatorSet& ops) {
    Moments m;
    m.x_mean = expval(rho, ops.x);
    m.p_mean = expval(rho, ops.p);
    m.var_x = expval(rho, ops.x2) - m.x_mean * m.x_mean;
    m.var_p = expval(rho, ops.p2) - m.p_mean * m.p_mean;
    m.cov_xp = expval(rho, ops.xp_sym) - m.x_mean * m.p_mean;
    return m;
}

Moments moments_ket(const Vec& psi, const OperatorSet& ops) {
    Moments m;
    const Vec xpsi = ops.x * psi;
    const Vec ppsi = ops.p * psi;
    m.x_mean = psi.dot(xpsi).real();
    m.p_mean = psi.dot(ppsi).real();
    m.var_x = xpsi.squaredNorm() - m.x_mean * m.x_mean;
    m.var_p = ppsi.squaredNorm() - m.p_mean * m.p_mean;
    m.cov_xp = xpsi.dot(ppsi).real() - m.x_mean * m.p_mean;
    return m;
}

double hermiticity_residual(const Mat& m) {
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue_hermitian(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

bool is_pure(const Mat& rho, double tol) {
    return std::abs((rho * rho).trace().real() - 1.0) < tol;
}

double expval(const Mat& rho, const Mat& op) {
    return (rho * op).trace().real();
}

double expval_ket(const Vec& psi, const Mat& op) {
    return psi.dot(op * psi).real();
}

}  // namespace cdjp
