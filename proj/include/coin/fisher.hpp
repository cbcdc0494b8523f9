#pragma once

#include "coin/nn.hpp"

namespace coin {

// Diagonal of the output-Jacobian empirical Fisher:
// values[j] = (1/P) sum_l sum_k (d f_k(x_l) / d theta_j)^2.
struct DiagFisher {
    NetworkSpec spec;
    Vector values;
    Eigen::Index probe_size = 0;

    void validate() const;
};

DiagFisher estimate_diag_fisher(const ParamVec& params, const ProbeSet& probe);

// Largest parameter count full_empirical_fisher accepts.
inline constexpr Eigen::Index kFullFisherMaxDim = 2000;

// (1/P) sum_l J(x_l)^T J(x_l). Test oracle; d x d memory.
Matrix full_empirical_fisher(const ParamVec& params, const ProbeSet& probe);

// (theta - anchor)^T F (theta - anchor), without the 1/2 of the Gaussian KL.
double kl_quadratic(const ParamVec& theta, const ParamVec& anchor, const Matrix& fisher);
double kl_quadratic(const ParamVec& theta, const ParamVec& anchor, const DiagFisher& fisher);

// (1/P) sum_l 0.5 * ||f_theta(x_l) - f_anchor(x_l)||^2, the empirical KL between
// unit-covariance Gaussians centred on the two networks' outputs.
double empirical_output_divergence(const ParamVec& theta, const ParamVec& anchor, const ProbeSet& probe);

}  // namespace coin
