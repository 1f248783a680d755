#include "cdjp/stepper.hpp"

#include <cmath>
#include <sstream>

namespace cdjp {

void StepParams::validate() const {
    if (!(dt > 0)) throw ValidationError("StepParams: dt must be positive");
    if (!(tau > 0)) throw ValidationError("StepParams: tau must be positive");
    if (!(dt / tau < 0.01))
        throw ValidationError("StepParams: weak-measurement regime requires dt/tau < 0.01");
    if (!std::isfinite(theta) || !std::isfinite(lambda1) || !std::isfinite(lambda2))
        throw ValidationError("StepParams: controls must be finite");
}

namespace {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline double u64_to_unit(std::uint64_t x) {
    // (0,1]: never zero, safe for log()
    return (double(x >> 11) + 1.0) * (1.0 / 9007199254740992.0);
}

}  // namespace

double NoiseStream::normal(std::uint64_t step) const {
    const std::uint64_t key = splitmix64(splitmix64(splitmix64(seed) ^ stream_id) ^ step);
    const double u1 = u64_to_unit(splitmix64(key));
    const double u2 = u64_to_unit(splitmix64(key ^ 0x5851f42d4c957f2dull));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double NoiseStream::wiener(std::uint64_t step, double dt) const {
    return normal(step) * std::sqrt(dt);
}

Mat truncated_unitary(const Mat& h, double dt) {
    const int n = int(h.rows());
    const Mat a = Complex(0, -dt) * h;
    // I + A(I + A/2(I + A/3(I + A/4)))
    Mat t = Mat::Identity(n, n) + 0.25 * a;
    t = Mat::Identity(n, n) + (a * t) / 3.0;
    t = Mat::Identity(n, n) + 0.5 * (a * t);
    return Mat::Identity(n, n) + a * t;
}

namespace {

// Shared Kraus assembly: M = c0·I + c1·L + c2·L² with L = cosθX + sinθP.
Mat measurement_kraus(const OperatorSet& ops, double theta, Complex c1, Complex c2) {
    const double c = std::cos(theta), s = std::sin(theta);
    Mat l2 = (c * c) * ops.x2 + (2.0 * s * c) * ops.xp_sym + (s * s) * ops.p2;
    Mat m = c1 * (c * ops.x + s * ops.p) + c2 * l2;
    m += Mat::Identity(ops.dim, ops.dim);
    return m;
}

void finalize_state(Mat& rho, long step_hint) {
    hermitize(rho);
    const double tr = rho.trace().real();
    if (!(tr > 0) || !std::isfinite(tr))
        throw PositivityLoss("non-positive trace after Kraus update", step_hint);
    rho /= tr;
    const double diag_min = rho.diagonal().real().minCoeff();
    if (diag_min < -1e-6)
        throw PositivityLoss("negative population " + std::to_string(diag_min), step_hint);
}

}  // namespace

Mat stratonovich_step(const Mat& rho, double r, const StepParams& p, const OperatorSet& ops) {
    p.validate();
    const Mat m = measurement_kraus(ops, p.theta, Complex(r * p.dt / (2 * p.tau), 0),
                                    Complex(-p.dt / (4 * p.tau), 0));
    const Mat u = truncated_unitary(hamiltonian(ops, p.lambda1, p.lambda2), p.dt);
    Mat out = u * (m * rho * m.adjoint()) * u.adjoint();
    finalize_state(out, -1);
    return out;
}

std::pair<Mat, double> ito_step(const Mat& rho, double dW, const StepParams& p,
                                const OperatorSet& ops) {
    p.validate();
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    const double exp_l = c * expval(rho, ops.x) + s * expval(rho, ops.p);
    const double r = exp_l + std::sqrt(p.tau) * dW / p.dt;
    Mat m = measurement_kraus(ops, p.theta, Complex(r * p.dt / (2 * p.tau), 0),
                              Complex(-p.dt / (8 * p.tau), 0));
    m -= Complex(0, p.dt) * hamiltonian(ops, p.lambda1, p.lambda2);
    Mat out = m * rho * m.adjoint();
    finalize_state(out, -1);
    return {out, r};
}

int ControlSchedule::index_at(double t) const {
    if (theta.empty()) throw ValidationError("ControlSchedule is empty");
    long idx = long(std::floor(t / dt + 1e-9));
    if (idx < 0) idx = 0;
    if (idx >= long(theta.size())) idx = long(theta.size()) - 1;
    return int(idx);
}

std::string TrajectoryRecord::to_csv() const {
    std::ostringstream os;
    os.precision(12);
    os << "t,x_mean,p_mean,var_x,cov_xp,var_p,r\n";
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Moments& m = moments[k];
        const double rk = k < readout.size() ? readout[k] : 0.0;
        os << t[k] << ',' << m.x_mean << ',' << m.p_mean << ',' << m.var_x << ',' << m.cov_xp
           << ',' << m.var_p << ',' << rk << '\n';
    }
    return os.str();
}

TrajectoryRecord simulate_trajectory(const Mat& rho0, const ControlSchedule& schedule, double tau,
                                     double t_f, double dt, const NoiseStream& noise,
                                     const OperatorSet& ops, bool record_steps) {
    const long n_steps = std::lround(t_f / dt);
    if (std::abs(n_steps * dt - t_f) > 1e-9 * std::max(1.0, t_f))
        throw ValidationError("simulate_trajectory: t_f/dt must be integral");
    if (n_steps > 0 && schedule.dt > dt * (1 + 1e-9))
        throw ValidationError("simulate_trajectory: schedule must be sampled at least every dt");

    TrajectoryRecord rec;
    Mat rho = rho0;
    StepParams p;
    p.dt = dt;
    p.tau = tau;
    if (n_steps > 0) p.validate();

    const long eig_check_every = 250;
    for (long k = 0; k <= n_steps; ++k) {
        const double tk = k * dt;
        if (record_steps || k == 0 || k == n_steps) {
            rec.t.push_back(tk);
            rec.moments.push_back(moments(rho, ops));
        }
        if (k == n_steps) break;
        p.theta = schedule.theta_at(tk);
        p.lambda1 = schedule.lambda1_at(tk);
        double r_used = 0;
        try {
            auto [next, r] = ito_step(rho, noise.wiener(std::uint64_t(k), dt), p, ops);
            rho = std::move(next);
            r_used = r;
        } catch (const PositivityLoss&) {
            throw PositivityLoss("trajectory step failed", k);
        }
        if ((k + 1) % eig_check_every == 0 && min_eigenvalue_hermitian(rho) < -1e-6)
            throw PositivityLoss("negative eigenvalue", k);
        if (record_steps) rec.readout.push_back(r_used);
    }
    if (min_eigenvalue_hermitian(rho) < -1e-6) throw PositivityLoss("negative eigenvalue", n_steps);
    rec.final_state = rho;
    return rec;
}

KetPropagator::KetPropagator(const OperatorSet& ops, double tau, double dt)
    : ops_(ops), tau_(tau), dt_(dt) {
    const int n = ops.dim;
    xpsi_.resize(n);
    ppsi_.resize(n);
    lpsi_.resize(n);
    xlpsi_.resize(n);
    plpsi_.resize(n);
    l2psi_.resize(n);
    hpsi_.resize(n);
    acc_.resize(n);
    work_.resize(n);
}

void KetPropagator::cache_unitaries(double lambda1_max) {
    for (double l1 : {lambda1_max, -lambda1_max, 0.0}) {
        if (!find_cached(l1))
            u_cache_.emplace_back(l1, truncated_unitary(hamiltonian(ops_, l1), dt_));
    }
}

const Mat* KetPropagator::find_cached(double lambda1) const {
    for (const auto& [l1, u] : u_cache_)
        if (l1 == lambda1) return &u;
    return nullptr;
}

void KetPropagator::apply_truncated_unitary(Vec& psi, double lambda1) {
    // ψ ← Σ_{k≤4} (−iH·dt)^k/k! ψ without forming the matrix.
    acc_ = psi;
    work_ = psi;
    for (int k = 1; k <= 4; ++k) {
        hpsi_.noalias() = ops_.h0 * work_;
        hpsi_.noalias() += lambda1 * (ops_.x2 * work_);
        work_ = (Complex(0, -dt_) / double(k)) * hpsi_;
        acc_ += work_;
    }
    psi = acc_;
}

KetPropagator::StepStats KetPropagator::measure(const Vec& psi, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    xpsi_.noalias() = ops_.x * psi;
    ppsi_.noalias() = ops_.p * psi;

    StepStats st;
    st.m.x_mean = psi.dot(xpsi_).real();
    st.m.p_mean = psi.dot(ppsi_).real();
    st.m.var_x = xpsi_.squaredNorm() - st.m.x_mean * st.m.x_mean;
    st.m.var_p = ppsi_.squaredNorm() - st.m.p_mean * st.m.p_mean;
    st.m.cov_xp = xpsi_.dot(ppsi_).real() - st.m.x_mean * st.m.p_mean;
    st.exp_l = c * st.m.x_mean + s * st.m.p_mean;
    lpsi_ = c * xpsi_ + s * ppsi_;
    st.exp_l2 = lpsi_.squaredNorm();
    return st;
}

KetPropagator::StepStats KetPropagator::strat_step(Vec& psi, double r, double theta,
                                                   double lambda1) {
    const double c = std::cos(theta), s = std::sin(theta);
    StepStats st = measure(psi, theta);
    st.r = r;

    xlpsi_.noalias() = ops_.x * lpsi_;
    plpsi_.noalias() = ops_.p * lpsi_;
    l2psi_ = c * xlpsi_ + s * plpsi_;

    psi += (r * dt_ / (2 * tau_)) * lpsi_ - (dt_ / (4 * tau_)) * l2psi_;
    if (const Mat* u = find_cached(lambda1)) {
        work_.noalias() = (*u) * psi;
        psi = work_;
    } else {
        apply_truncated_unitary(psi, lambda1);
    }
    psi /= psi.norm();
    return st;
}

KetPropagator::StepStats KetPropagator::ito_step(Vec& psi, double dW, double theta,
                                                 double lambda1) {
    const double c = std::cos(theta), s = std::sin(theta);
    StepStats st = measure(psi, theta);
    const double r = st.exp_l + std::sqrt(tau_) * dW / dt_;
    st.r = r;

    xlpsi_.noalias() = ops_.x * lpsi_;
    plpsi_.noalias() = ops_.p * lpsi_;
    l2psi_ = c * xlpsi_ + s * plpsi_;

    hpsi_.noalias() = ops_.h0 * psi;
    hpsi_.noalias() += lambda1 * (ops_.x2 * psi);

    psi += Complex(0, -dt_) * hpsi_ + (r * dt_ / (2 * tau_)) * lpsi_ -
           (dt_ / (8 * tau_)) * l2psi_;
    psi /= psi.norm();
    return st;
}

}  // namespace cdjp
