#include "cdjp/mlp.hpp"

#include <cmath>
#include <sstream>

namespace cdjp {

ScalarBundle& ScalarBundle::operator+=(const ScalarBundle& o) {
    g10 += o.g10;
    g01 += o.g01;
    k10 += o.k10;
    k01 += o.k01;
    g20 += o.g20;
    g11t += o.g11t;
    g02 += o.g02;
    k20 += o.k20;
    k11 += o.k11;
    k02 += o.k02;
    return *this;
}

ScalarBundle operator*(double s, const ScalarBundle& b) {
    ScalarBundle r = b;
    r.g10 *= s;
    r.g01 *= s;
    r.k10 *= s;
    r.k01 *= s;
    r.g20 *= s;
    r.g11t *= s;
    r.g02 *= s;
    r.k20 *= s;
    r.k11 *= s;
    r.k02 *= s;
    return r;
}

ScalarBundle bundle_from_state(const Mat& rho, const Mat& sigma, const OperatorSet& ops) {
    const Mat omega = 0.5 * (rho * sigma + sigma * rho);
    const Mat lambda = rho * sigma - sigma * rho;
    const Mat xp = ops.x * ops.p;
    const Complex i1(0, 1);

    ScalarBundle b;
    b.g10 = (ops.x * omega).trace().real();
    b.g01 = (ops.p * omega).trace().real();
    b.k10 = (i1 * (ops.x * lambda).trace()).real();
    b.k01 = (i1 * (ops.p * lambda).trace()).real();
    b.g20 = (ops.x2 * omega).trace().real();
    b.g02 = (ops.p2 * omega).trace().real();
    b.g11t = ((xp * omega).trace() - i1 * 0.5).real();
    b.k20 = (i1 * (ops.x2 * lambda).trace()).real();
    b.k02 = (i1 * (ops.p2 * lambda).trace()).real();
    b.k11 = (i1 * (xp * lambda).trace()).real();
    return b;
}

ScalarBundle bundle_sigma_identity(const Mat& rho, const OperatorSet& ops) {
    ScalarBundle b;
    b.g10 = expval(rho, ops.x);
    b.g01 = expval(rho, ops.p);
    b.g20 = expval(rho, ops.x2);
    b.g02 = expval(rho, ops.p2);
    b.g11t = expval(rho, ops.xp_sym);
    return b;
}

double optimal_readout(const ScalarBundle& b, double theta) {
    return std::cos(theta) * b.g10 + std::sin(theta) * b.g01;
}

ScalarBundle bundle_rhs(const ScalarBundle& b, double theta, double lambda1, double tau,
                        double lambda2) {
    if (lambda2 != 0.0)
        throw AnharmonicNotClosed(
            "the ten-variable system is closed only without the cubic potential");
    const double c = std::cos(theta), s = std::sin(theta);
    const double lt = 1.0 + 2.0 * lambda1;  // λ̃₁
    const double r = c * b.g10 + s * b.g01;
    const double wk = c * b.k10 + s * b.k01;  // cosθ·κ(1,0) + sinθ·κ(0,1)

    ScalarBundle d;
    d.g10 = b.g01 - s / (4 * tau) * wk;
    d.g01 = -lt * b.g10 + c / (4 * tau) * wk;
    d.k10 = b.k01;
    d.k01 = -lt * b.k10;

    d.g20 = 2 * b.g11t + s / (2 * tau) * (r * b.k10 - c * b.k20 - s * b.k11);
    d.g11t = -lt * b.g20 + b.g02 +
             (r * (s * b.k01 - c * b.k10) + (c * c * b.k20 - s * s * b.k02)) / (4 * tau);
    d.g02 = -2 * lt * b.g11t + c / (2 * tau) * (-r * b.k01 + (s * b.k02 + c * b.k11));

    d.k20 = 2 * b.k11 + 2 * s / tau * (-r * b.g10 + c * b.g20 + s * b.g11t);
    d.k11 = -lt * b.k20 + b.k02 +
            (r * (c * b.g10 - s * b.g01) + (-c * c * b.g20 + s * s * b.g02)) / tau;
    d.k02 = -2 * lt * b.k11 + 2 * c / tau * (r * b.g01 - (s * b.g02 + c * b.g11t));
    return d;
}

double optimal_lambda1(double k20, double lambda1_max) {
    if (lambda1_max < 0) throw ValidationError("optimal_lambda1: lambda1_max must be >= 0");
    return k20 > 0 ? -lambda1_max : lambda1_max;
}

ThetaStar optimal_theta(const ScalarBundle& b, double prev_theta) {
    ThetaStar t;
    t.a_gamma = 0.5 * (b.g10 * b.g10 - b.g01 * b.g01 - b.g20 + b.g02);
    t.b_gamma = b.g10 * b.g01 - b.g11t;
    t.r_gamma = std::hypot(t.a_gamma, t.b_gamma);
    t.theta = t.r_gamma < 1e-12 ? prev_theta : 0.5 * std::atan2(t.b_gamma, t.a_gamma);
    return t;
}

PontryaginValue pontryagin_value(const ScalarBundle& b, double lambda1_max, double tau) {
    const ThetaStar t = optimal_theta(b, 0.0);
    PontryaginValue v;
    v.K = lambda1_max * std::abs(b.k20) - 0.5 * (b.k20 + b.k02) + t.r_gamma / (2 * tau) +
          (b.g10 * b.g10 + b.g01 * b.g01 - b.g20 - b.g02) / (4 * tau);
    return v;
}

namespace {

inline Mat anticomm(const Mat& a, const Mat& b) { return a * b + b * a; }
inline Mat comm(const Mat& a, const Mat& b) { return a * b - b * a; }

}  // namespace

Mat sme_rhs(const Mat& rho, double r, const Mat& h, const Mat& l, double tau) {
    const Mat v = l * l;
    const double el = (rho * l).trace().real();
    const double ev = (rho * v).trace().real();
    const Mat dl = l - el * Mat::Identity(l.rows(), l.cols());
    const Mat dv = v - ev * Mat::Identity(l.rows(), l.cols());
    Mat out = Complex(0, -1) * comm(h, rho) - anticomm(dv, rho) / (4 * tau) +
              (r / (2 * tau)) * anticomm(dl, rho);
    hermitize(out);
    return out;
}

namespace {

std::pair<Mat, Mat> costate_rhs_core(const Mat& rho, const Mat& sigma, double r, const Mat& h,
                                     const Mat& l, double tau);

}  // namespace

std::pair<Mat, Mat> costate_rhs(const Mat& rho, const Mat& sigma, double r, const Mat& h,
                                const Mat& l, double tau) {
    const double gauge = (sigma * rho).trace().real();
    if (std::abs(gauge - 1.0) > 1e-6)
        throw GaugeViolation("costate_rhs: <sigma> = " + std::to_string(gauge));
    return costate_rhs_core(rho, sigma, r, h, l, tau);
}

namespace {

std::pair<Mat, Mat> costate_rhs_core(const Mat& rho, const Mat& sigma, double r, const Mat& h,
                                     const Mat& l, double tau) {
    const Mat v = l * l;
    const double el = (rho * l).trace().real();
    const double ev = (rho * v).trace().real();
    const Mat dl = l - el * Mat::Identity(l.rows(), l.cols());
    const Mat dv = v - ev * Mat::Identity(l.rows(), l.cols());

    Mat drho = Complex(0, -1) * comm(h, rho) - anticomm(dv, rho) / (4 * tau) +
               (r / (2 * tau)) * anticomm(dl, rho);
    Mat dsig = Complex(0, -1) * comm(h, sigma) + anticomm(dv, sigma) / (4 * tau) -
               (r / (2 * tau)) * anticomm(dl, sigma);
    hermitize(drho);
    hermitize(dsig);
    return {drho, dsig};
}

}  // namespace

std::pair<Mat, Mat> costate_rhs(const Mat& rho, const Mat& sigma, double r, double theta,
                                double lambda1, double lambda2, double tau,
                                const OperatorSet& ops) {
    const auto [l, m] = quadratures(ops, theta);
    (void)m;
    return costate_rhs(rho, sigma, r, hamiltonian(ops, lambda1, lambda2), l, tau);
}

double optimal_readout_trace(const Mat& rho, const Mat& sigma, const Mat& l) {
    return 0.5 * (rho * (l * sigma + sigma * l)).trace().real();
}

double stochastic_hamiltonian(const Mat& rho, const Mat& sigma, double r, const Mat& h,
                              const Mat& l, double tau) {
    const double el = (rho * l).trace().real();
    const double el2 = (rho * l * l).trace().real();
    const double f0 = (r * r - 2 * r * el + el2) / (2 * tau);
    return -f0 + (sigma * sme_rhs(rho, r, h, l, tau)).trace().real();
}

void costate_pair_rk4_step(Mat& rho, Mat& sigma, double theta, double lambda1, double lambda2,
                           double tau, double dt, const OperatorSet& ops) {
    const auto [l, mth] = quadratures(ops, theta);
    (void)mth;
    const Mat h = hamiltonian(ops, lambda1, lambda2);
    const double gauge = (sigma * rho).trace().real();
    if (std::abs(gauge - 1.0) > 1e-6)
        throw GaugeViolation("costate_pair_rk4_step: <sigma> = " + std::to_string(gauge));
    auto rhs = [&](const Mat& rr, const Mat& ss) {
        return costate_rhs_core(rr, ss, optimal_readout_trace(rr, ss, l), h, l, tau);
    };
    const auto [k1r, k1s] = rhs(rho, sigma);
    const auto [k2r, k2s] = rhs(rho + 0.5 * dt * k1r, sigma + 0.5 * dt * k1s);
    const auto [k3r, k3s] = rhs(rho + 0.5 * dt * k2r, sigma + 0.5 * dt * k2s);
    const auto [k4r, k4s] = rhs(rho + dt * k3r, sigma + dt * k3s);
    rho += dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
    sigma += dt / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
    hermitize(rho);
    hermitize(sigma);
    // re-pin the scalar gauge freedom: <sigma> = Tr(sigma rho) = 1 is conserved
    // by the exact flow, so the integrator drift is projected out each step
    const double pairing = (sigma * rho).trace().real();
    sigma += (1.0 - pairing) * Mat::Identity(rho.rows(), rho.cols());
}

UVWZ uvwz_rhs(const UVWZ& s, double phi_dot, double tau) {
    return {phi_dot * s.v, -phi_dot * s.r + s.w / (4 * tau), phi_dot * s.z, -phi_dot * s.w};
}

std::pair<double, double> analytic_uvwz(Complex alpha, double A, double B, double tau,
                                        const std::function<double(double)>& phi, double t,
                                        int quad_points) {
    const Complex i1(0, 1);
    const Complex hcoef = i1 / (8 * tau) * Complex(A, -B);
    // composite Simpson over [0, t]
    int n = quad_points;
    if (n % 2) ++n;
    Complex integral(0, 0);
    if (t > 0) {
        const double hstep = t / n;
        auto hfun = [&](double tp) { return hcoef * std::exp(Complex(0, 2 * phi(tp))); };
        Complex acc = hfun(0.0) + hfun(t);
        for (int j = 1; j < n; ++j) acc += (j % 2 ? 4.0 : 2.0) * hfun(j * hstep);
        integral = acc * hstep / 3.0;
    }
    const Complex zeta =
        std::exp(Complex(0, -phi(t))) * (alpha + i1 * t / (8 * tau) * Complex(A, B) + integral);
    return {zeta.real(), zeta.imag()};
}

Complex mccoy_coefficient(int n, int m, int k) {
    if (n < 0 || m < 0 || k < 0) throw ValidationError("mccoy_coefficient: negative index");
    if (k > n || k > m) return {0, 0};
    // −(−i)^k · n!m!/(k!(n−k)!(m−k)!)
    double coef = 1.0;
    for (int j = 0; j < k; ++j)
        coef *= double(n - j) * double(m - j) / double(j + 1);
    static const Complex minus_i_pow[4] = {{1, 0}, {0, -1}, {-1, 0}, {0, 1}};
    return -coef * minus_i_pow[k % 4];
}

GammaKappaTable::GammaKappaTable(int cap) : order_cap(cap) {
    if (cap < 2) throw ValidationError("GammaKappaTable: order_cap must be >= 2");
    gamma = Eigen::MatrixXcd::Zero(cap + 1, cap + 1);
    kappa = Eigen::MatrixXcd::Zero(cap + 1, cap + 1);
    gamma(0, 0) = 1.0;
}

GammaKappaTable table_from_state(const Mat& rho, const Mat& sigma, const OperatorSet& ops,
                                 int order_cap) {
    GammaKappaTable t(order_cap);
    const Mat omega = 0.5 * (rho * sigma + sigma * rho);
    const Mat lambda = rho * sigma - sigma * rho;
    std::vector<Mat> xpow(order_cap + 1), ppow(order_cap + 1);
    xpow[0] = ppow[0] = Mat::Identity(ops.dim, ops.dim);
    for (int j = 1; j <= order_cap; ++j) {
        xpow[j] = xpow[j - 1] * ops.x;
        ppow[j] = ppow[j - 1] * ops.p;
    }
    for (int n = 0; n <= order_cap; ++n)
        for (int m = 0; n + m <= order_cap; ++m) {
            const Mat xnpm = xpow[n] * ppow[m];
            t.gamma(n, m) = (xnpm * omega).trace();
            t.kappa(n, m) = Complex(0, 1) * (xnpm * lambda).trace();
        }
    return t;
}

GammaKappaTable table_from_bundle(const ScalarBundle& b) {
    GammaKappaTable t(2);
    t.gamma(0, 0) = 1.0;
    t.gamma(1, 0) = b.g10;
    t.gamma(0, 1) = b.g01;
    t.kappa(1, 0) = b.k10;
    t.kappa(0, 1) = b.k01;
    t.gamma(2, 0) = b.g20;
    t.gamma(0, 2) = b.g02;
    t.gamma(1, 1) = Complex(b.g11t, 0.5);
    t.kappa(2, 0) = b.k20;
    t.kappa(0, 2) = b.k02;
    t.kappa(1, 1) = b.k11;
    return t;
}

GammaKappaTable general_bundle_rhs(const GammaKappaTable& t, double theta, double lambda1,
                                   double lambda2, double tau) {
    const int cap = t.order_cap;
    if (lambda2 != 0.0 && cap < 3)
        throw ValidationError("general_bundle_rhs: order_cap >= 3 required when lambda2 != 0");
    GammaKappaTable d(cap);
    d.gamma(0, 0) = 0.0;

    const double c = std::cos(theta), s = std::sin(theta);
    const double lt = 1.0 + 2.0 * lambda1;
    const double r = (c * t.gamma(1, 0) + s * t.gamma(0, 1)).real();
    bool truncated = false;

    auto gam = [&](int n, int m) -> Complex {
        if (n + m > cap) {
            truncated = true;
            return {0, 0};
        }
        return t.gamma(n, m);
    };
    auto kap = [&](int n, int m) -> Complex {
        if (n + m > cap) {
            truncated = true;
            return {0, 0};
        }
        return t.kappa(n, m);
    };

    const Complex i1(0, 1);
    for (int n = 0; n <= cap; ++n) {
        for (int m = 0; n + m <= cap; ++m) {
            Complex dg(0, 0), dk(0, 0);
            const int kmax = std::max({std::min(3, m), std::min(n, 2), 1});
            for (int k = 1; k <= kmax; ++k) {
                // Hamiltonian commutator part
                const Complex c2m = mccoy_coefficient(2, m, k);
                const Complex c3m = mccoy_coefficient(3, m, k);
                const Complex cn2 = mccoy_coefficient(n, 2, k);
                const Complex cn1 = mccoy_coefficient(n, 1, k);
                const Complex c1m = mccoy_coefficient(1, m, k);
                if (c2m != Complex(0, 0)) {
                    dg += 0.5 * lt * c2m * gam(n + 2 - k, m - k);
                    dk += 0.5 * lt * c2m * kap(n + 2 - k, m - k);
                }
                if (lambda2 != 0.0 && c3m != Complex(0, 0)) {
                    dg += lambda2 * c3m * gam(n + 3 - k, m - k);
                    dk += lambda2 * c3m * kap(n + 3 - k, m - k);
                }
                if (cn2 != Complex(0, 0)) {
                    dg -= 0.5 * cn2 * gam(n - k, m + 2 - k);
                    dk -= 0.5 * cn2 * kap(n - k, m + 2 - k);
                }
                // measurement parts
                if (c2m != Complex(0, 0)) {
                    dg -= c * c / (8 * tau) * c2m * kap(n + 2 - k, m - k);
                    dk += c * c / (2 * tau) * c2m * gam(n + 2 - k, m - k);
                }
                if (c1m != cn1) {
                    const Complex diff = c1m - cn1;
                    dg -= 2 * s * c / (8 * tau) * diff * kap(n + 1 - k, m + 1 - k);
                    dk += 2 * s * c / (2 * tau) * diff * gam(n + 1 - k, m + 1 - k);
                }
                if (cn2 != Complex(0, 0)) {
                    dg += s * s / (8 * tau) * cn2 * kap(n - k, m + 2 - k);
                    dk -= s * s / (2 * tau) * cn2 * gam(n - k, m + 2 - k);
                }
                if (c1m != Complex(0, 0)) {
                    dg += r / (4 * tau) * c * c1m * kap(n + 1 - k, m - k);
                    dk -= r / tau * c * c1m * gam(n + 1 - k, m - k);
                }
                if (cn1 != Complex(0, 0)) {
                    dg -= r / (4 * tau) * s * cn1 * kap(n - k, m + 1 - k);
                    dk += r / tau * s * cn1 * gam(n - k, m + 1 - k);
                }
            }
            d.gamma(n, m) = i1 * dg;
            d.kappa(n, m) = i1 * dk;
        }
    }
    d.gamma(0, 0) = 0.0;
    d.kappa(0, 0) = 0.0;
    d.truncated = truncated;
    return d;
}

double cost_functional(const std::vector<double>& r, const std::vector<double>& exp_l,
                       const std::vector<double>& exp_l2, double tau, double dt) {
    if (r.size() != exp_l.size() || r.size() != exp_l2.size())
        throw DimensionMismatch("cost_functional: sample arrays must align");
    if (r.size() < 2) return 0.0;
    double j = 0;
    for (std::size_t k = 0; k < r.size(); ++k) {
        const double f = r[k] * r[k] - 2 * r[k] * exp_l[k] + exp_l2[k];
        const double w = (k == 0 || k + 1 == r.size()) ? 0.5 : 1.0;
        j += w * f;
    }
    return j * dt / (2 * tau);
}

std::string MLPPath::to_csv(const ControlSchedule& schedule) const {
    std::ostringstream os;
    os.precision(12);
    os << "t,theta,lambda1,r,x_mean,p_mean,var_x,cov_xp,var_p\n";
    for (std::size_t k = 0; k < t.size(); ++k) {
        const Moments& m = moments[k];
        const std::size_t ks = std::min(k, schedule.size() - 1);
        os << t[k] << ',' << schedule.theta[ks] << ',' << schedule.lambda1[ks] << ',' << r[k]
           << ',' << m.x_mean << ',' << m.p_mean << ',' << m.var_x << ',' << m.cov_xp << ','
           << m.var_p << '\n';
    }
    return os.str();
}

namespace {

struct ExpL {
    double l = 0, l2 = 0;
};

ExpL exp_l_from_moments(const Moments& m, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    ExpL e;
    e.l = c * m.x_mean + s * m.p_mean;
    e.l2 = c * c * (m.var_x + m.x_mean * m.x_mean) + s * s * (m.var_p + m.p_mean * m.p_mean) +
           2 * s * c * (m.cov_xp + m.x_mean * m.p_mean);
    return e;
}

// RK4 on the closed-loop bundle system; controls recomputed at each stage.
// In fixed mode only the first-order entries are advanced.
struct BundleIntegrator {
    double tau, dt, lambda1_max;
    bool optimal;
    ControlFn controls;  // fixed mode

    struct Controls {
        double theta, lambda1;
    };

    Controls controls_at(const ScalarBundle& b, double t, double& theta_hold) const {
        if (optimal) {
            const ThetaStar th = optimal_theta(b, theta_hold);
            theta_hold = th.theta;
            return {th.theta, optimal_lambda1(b.k20, lambda1_max)};
        }
        auto [th, l1] = controls(t);
        return {th, l1};
    }

    ScalarBundle rhs(const ScalarBundle& b, double t, double& theta_hold) const {
        const Controls c = controls_at(b, t, theta_hold);
        ScalarBundle d = bundle_rhs(b, c.theta, c.lambda1, tau);
        if (!optimal) {  // first-order subsystem only
            d.g20 = d.g11t = d.g02 = d.k20 = d.k11 = d.k02 = 0;
        }
        return d;
    }

    ScalarBundle step(const ScalarBundle& b, double t, double& theta_hold) const {
        double hold = theta_hold;
        const ScalarBundle k1 = rhs(b, t, hold);
        const ScalarBundle k2 = rhs(b + (0.5 * dt) * k1, t + 0.5 * dt, hold);
        const ScalarBundle k3 = rhs(b + (0.5 * dt) * k2, t + 0.5 * dt, hold);
        const ScalarBundle k4 = rhs(b + dt * k3, t + dt, hold);
        theta_hold = hold;
        return b + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
};

struct ShadowPair {
    Mat rho, sigma;
    double theta_hold = 0;
    double max_drift = 0;
};

// One RK4 step of the (ρ,σ) shadow with closed-loop optimal controls derived
// from the shadow's own trace-defined bundle.
void shadow_step(ShadowPair& sh, double tau, double dt, double lambda1_max,
                 const OperatorSet& ops) {
    auto rhs = [&](const Mat& rr, const Mat& ss, double& hold) {
        const ScalarBundle b = bundle_from_state(rr, ss, ops);
        const ThetaStar th = optimal_theta(b, hold);
        hold = th.theta;
        const double l1 = optimal_lambda1(b.k20, lambda1_max);
        const auto [l, mth] = quadratures(ops, th.theta);
        (void)mth;
        return costate_rhs_core(rr, ss, optimal_readout_trace(rr, ss, l),
                                hamiltonian(ops, l1, 0.0), l, tau);
    };
    double hold = sh.theta_hold;
    const auto [k1r, k1s] = rhs(sh.rho, sh.sigma, hold);
    const auto [k2r, k2s] = rhs(sh.rho + 0.5 * dt * k1r, sh.sigma + 0.5 * dt * k1s, hold);
    const auto [k3r, k3s] = rhs(sh.rho + 0.5 * dt * k2r, sh.sigma + 0.5 * dt * k2s, hold);
    const auto [k4r, k4s] = rhs(sh.rho + dt * k3r, sh.sigma + dt * k3s, hold);
    sh.rho += dt / 6.0 * (k1r + 2 * k2r + 2 * k3r + k4r);
    sh.sigma += dt / 6.0 * (k1s + 2 * k2s + 2 * k3s + k4s);
    hermitize(sh.rho);
    hermitize(sh.sigma);
    const double pairing = (sh.sigma * sh.rho).trace().real();
    sh.sigma += (1.0 - pairing) * Mat::Identity(sh.rho.rows(), sh.rho.cols());
    sh.theta_hold = hold;
}

MLPResult mlp_run(const Mat& rho0, const ScalarBundle& b0, double tau, double t_f, double dt,
                  double lambda1_max, const ControlFn& controls, bool optimal,
                  const OperatorSet& ops, const MLPOptions& opts) {
    const long n_steps = std::lround(t_f / dt);
    if (std::abs(n_steps * dt - t_f) > 1e-9 * std::max(1.0, t_f))
        throw ValidationError("mlp_integrate: t_f/dt must be integral");

    BundleIntegrator integ{tau, dt, lambda1_max, optimal, controls};
    MLPResult out;
    out.schedule.dt = dt;
    out.schedule.theta.reserve(n_steps + 1);
    out.schedule.lambda1.reserve(n_steps + 1);
    out.schedule.r.reserve(n_steps + 1);

    Mat rho = rho0;
    ScalarBundle b = b0;
    double theta_hold = 0;

    ShadowPair shadow;
    if (opts.debug_shadow) {
        shadow.rho = rho0;
        shadow.sigma =
            opts.shadow_sigma0.size() ? opts.shadow_sigma0 : Mat::Identity(ops.dim, ops.dim);
    }

    StepParams p;
    p.dt = dt;
    p.tau = tau;

    std::vector<double> rs, els, el2s;
    for (long k = 0; k <= n_steps; ++k) {
        const double tk = k * dt;
        const auto ctl = integ.controls_at(b, tk, theta_hold);
        const double rk = optimal_readout(b, ctl.theta);
        out.schedule.theta.push_back(ctl.theta);
        out.schedule.lambda1.push_back(ctl.lambda1);
        out.schedule.r.push_back(rk);

        const Moments m = moments(rho, ops);
        const ExpL e = exp_l_from_moments(m, ctl.theta);
        rs.push_back(rk);
        els.push_back(e.l);
        el2s.push_back(e.l2);
        if (opts.record_path || k == n_steps) {
            out.path.t.push_back(tk);
            out.path.moments.push_back(m);
            out.path.r.push_back(rk);
            out.path.exp_l.push_back(e.l);
            out.path.exp_l2.push_back(e.l2);
            out.path.pontryagin.push_back(pontryagin_value(b, lambda1_max, tau).K);
        }
        if (opts.debug_shadow) {
            const auto [lq, mq] = quadratures(ops, ctl.theta);
            (void)mq;
            const double r_trace = optimal_readout_trace(shadow.rho, shadow.sigma, lq);
            shadow.max_drift = std::max(shadow.max_drift, std::abs(r_trace - rk));
        }
        if (k == n_steps) break;

        p.theta = ctl.theta;
        p.lambda1 = ctl.lambda1;
        rho = stratonovich_step(rho, rk, p, ops);
        b = integ.step(b, tk, theta_hold);
        if (opts.debug_shadow) shadow_step(shadow, tau, dt, lambda1_max, ops);
    }

    out.path.J = cost_functional(rs, els, el2s, tau, dt);
    out.path.final_state = rho;
    out.path.final_bundle = b;
    if (opts.debug_shadow) out.path.shadow_drift = shadow.max_drift;
    return out;
}

}  // namespace

MLPResult mlp_integrate(const Mat& rho0, const ScalarBundle& b0, double tau, double t_f,
                        double dt, double lambda1_max, const OperatorSet& ops,
                        const MLPOptions& opts) {
    return mlp_run(rho0, b0, tau, t_f, dt, lambda1_max, {}, true, ops, opts);
}

MLPResult mlp_integrate_fixed(const Mat& rho0, const ScalarBundle& b0, double tau, double t_f,
                              double dt, const ControlFn& controls, const OperatorSet& ops,
                              const MLPOptions& opts) {
    return mlp_run(rho0, b0, tau, t_f, dt, 0.0, controls, false, ops, opts);
}

namespace {

ControlSchedule schedule_run(const ScalarBundle& b0, double tau, double t_f, double dt,
                             double lambda1_max, const ControlFn& controls, bool optimal) {
    const long n_steps = std::lround(t_f / dt);
    BundleIntegrator integ{tau, dt, lambda1_max, optimal, controls};
    ControlSchedule s;
    s.dt = dt;
    ScalarBundle b = b0;
    double theta_hold = 0;
    for (long k = 0; k <= n_steps; ++k) {
        const auto ctl = integ.controls_at(b, k * dt, theta_hold);
        s.theta.push_back(ctl.theta);
        s.lambda1.push_back(ctl.lambda1);
        s.r.push_back(optimal_readout(b, ctl.theta));
        if (k < n_steps) b = integ.step(b, k * dt, theta_hold);
    }
    return s;
}

}  // namespace

ControlSchedule schedule_from_bundle(const ScalarBundle& b0, double tau, double t_f, double dt,
                                     double lambda1_max) {
    return schedule_run(b0, tau, t_f, dt, lambda1_max, {}, true);
}

ControlSchedule schedule_from_controls(const ControlFn& controls, const ScalarBundle& b0,
                                       double tau, double t_f, double dt) {
    return schedule_run(b0, tau, t_f, dt, 0.0, controls, false);
}

namespace {

MLPObjective mlp_objective_run(const Vec& psi0, const Vec& psi_target, const ScalarBundle& b0,
                               double t_f, double lambda1_max, const ControlFn& controls,
                               bool optimal, KetPropagator& prop) {
    const double dt = prop.dt();
    const double tau = prop.tau();
    const long n_steps = std::lround(t_f / dt);
    BundleIntegrator integ{tau, dt, lambda1_max, optimal, controls};

    Vec psi = psi0;
    ScalarBundle b = b0;
    double theta_hold = 0;
    double j = 0;

    for (long k = 0; k < n_steps; ++k) {
        const double tk = k * dt;
        const auto ctl = integ.controls_at(b, tk, theta_hold);
        const double rk = optimal_readout(b, ctl.theta);
        const auto st = prop.strat_step(psi, rk, ctl.theta, ctl.lambda1);
        const double w = (k == 0) ? 0.5 : 1.0;
        j += w * (rk * rk - 2 * rk * st.exp_l + st.exp_l2);
        b = integ.step(b, tk, theta_hold);
    }
    if (n_steps > 0) {  // closing trapezoid sample at t_f
        const auto ctl = integ.controls_at(b, t_f, theta_hold);
        const double rk = optimal_readout(b, ctl.theta);
        const auto st = prop.measure(psi, ctl.theta);
        j += 0.5 * (rk * rk - 2 * rk * st.exp_l + st.exp_l2);
    }

    MLPObjective obj;
    obj.J = j * dt / (2 * tau);
    obj.fidelity = fidelity_ket(psi, psi_target);
    return obj;
}

}  // namespace

MLPObjective mlp_objective(const Vec& psi0, const Vec& psi_target, const ScalarBundle& b0,
                           double t_f, double lambda1_max, KetPropagator& prop) {
    return mlp_objective_run(psi0, psi_target, b0, t_f, lambda1_max, {}, true, prop);
}

MLPObjective mlp_objective_fixed(const Vec& psi0, const Vec& psi_target, const ScalarBundle& b0,
                                 double t_f, const ControlFn& controls, KetPropagator& prop) {
    return mlp_objective_run(psi0, psi_target, b0, t_f, 0.0, controls, false, prop);
}

}  // namespace cdjp
