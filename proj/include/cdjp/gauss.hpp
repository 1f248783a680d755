#pragma once

#include "cdjp/fock.hpp"

namespace cdjp {

// Steady covariance entries under θ=0 position monitoring, in the doubled
// scaling q3 = 2VarX, q4 = 2Cov(X,P), q5 = 2VarP.
struct SteadyCovariances {
    double q3 = 0, q4 = 0, q5 = 0;
};

SteadyCovariances steady_state_covariances(double tau);

// Squeezing parameter ξ = R·e^{iΘ} of the pure Gaussian state with the given
// covariances. Throws NonPureInput when q3·q5 − q4² deviates from 1.
Complex squeezing_parameter(double q3, double q4, double q5);

struct OPConstants {
    double alpha1 = 0, alpha2 = 0;
};

// Closed-form mean-value path between (q1i, q2i) and (q1f, q2f) over [0, t_f]
// assuming steady covariances.
class GaussOptimalPath {
public:
    GaussOptimalPath(double q1i, double q2i, double q1f, double q2f, double t_f, double tau);

    std::pair<double, double> at(double t) const;  // (q1(t), q2(t))
    const OPConstants& constants() const { return consts_; }
    const SteadyCovariances& covariances() const { return cov_; }
    double t_f() const { return t_f_; }
    double tau() const { return tau_; }

private:
    double q1i_, q2i_, t_f_, tau_;
    SteadyCovariances cov_;
    OPConstants consts_;
};

}  // namespace cdjp
