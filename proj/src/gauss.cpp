#include "cdjp/gauss.hpp"

#include <cmath>

namespace cdjp {

SteadyCovariances steady_state_covariances(double tau) {
    if (!(tau > 0)) throw ValidationError("steady_state_covariances: tau must be positive");
    const double root = std::sqrt(1.0 + 4.0 * tau * tau);
    const double s = root - 2.0 * tau;
    SteadyCovariances q;
    q.q3 = std::sqrt(4.0 * tau * s);
    q.q4 = s;
    q.q5 = std::sqrt(s * (1.0 + 4.0 * tau * tau) / tau);
    return q;
}

Complex squeezing_parameter(double q3, double q4, double q5) {
    const double purity = q3 * q5 - q4 * q4;
    if (std::abs(purity - 1.0) > 1e-8)
        throw NonPureInput("squeezing_parameter: q3*q5 - q4^2 = " + std::to_string(purity));
    const double half_diff = 0.5 * (q5 - q3);
    const double sinh2r = std::sqrt(half_diff * half_diff + q4 * q4);
    if (sinh2r < 1e-300) return {0, 0};
    const double cosh2r = 0.5 * (q5 + q3);
    const double r = 0.5 * std::log(sinh2r + cosh2r);
    return (r / sinh2r) * Complex(half_diff, -q4);
}

GaussOptimalPath::GaussOptimalPath(double q1i, double q2i, double q1f, double q2f, double t_f,
                                   double tau)
    : q1i_(q1i), q2i_(q2i), t_f_(t_f), tau_(tau), cov_(steady_state_covariances(tau)) {
    if (!(t_f > 0)) throw ValidationError("GaussOptimalPath: t_f must be positive");
    const double ssum = cov_.q3 * cov_.q3 + cov_.q4 * cov_.q4;
    const double sdiff = cov_.q3 * cov_.q3 - cov_.q4 * cov_.q4;
    const double cross = 2.0 * cov_.q3 * cov_.q4;
    const double ct = std::cos(t_f), st = std::sin(t_f);

    Eigen::Matrix2d a;
    a << ssum * t_f * ct + sdiff * st, (ssum * t_f + cross) * st,
        (-ssum * t_f + cross) * st, ssum * t_f * ct - sdiff * st;
    a /= 8.0 * tau;

    const double det = a.determinant();
    const double scale = a.cwiseAbs().maxCoeff();
    if (std::abs(det) < 1e-300 || scale * scale / std::abs(det) > 1e12)
        throw SingularMatrix("GaussOptimalPath: boundary system conditioning exceeds 1e12");

    Eigen::Vector2d rhs(q1f - q1i * ct - q2i * st, q2f + q1i * st - q2i * ct);
    const Eigen::Vector2d alpha = a.inverse() * rhs;
    consts_.alpha1 = alpha(0);
    consts_.alpha2 = alpha(1);
}

std::pair<double, double> GaussOptimalPath::at(double t) const {
    const double ssum = cov_.q3 * cov_.q3 + cov_.q4 * cov_.q4;
    const double sdiff = cov_.q3 * cov_.q3 - cov_.q4 * cov_.q4;
    const double a1 = consts_.alpha1, a2 = consts_.alpha2;
    const double ct = std::cos(t), st = std::sin(t);
    const double q1 = (a1 * ssum * t / (8 * tau_) + q1i_) * ct +
                      (a2 * ssum * t / (8 * tau_) + q2i_ + a1 * sdiff / (8 * tau_) +
                       cov_.q3 * cov_.q4 * a2 / (4 * tau_)) *
                          st;
    const double q2 = (a2 * ssum * t / (8 * tau_) + q2i_) * ct -
                      (a1 * ssum * t / (8 * tau_) + q1i_ + a2 * sdiff / (8 * tau_) -
                       cov_.q3 * cov_.q4 * a1 / (4 * tau_)) *
                          st;
    return {q1, q2};
}

}  // namespace cdjp
