#include "coin/fisher.hpp"

#include "coin/errors.hpp"

namespace coin {

void DiagFisher::validate() const {
    if (values.size() != param_count(spec)) throw DimensionMismatch("Fisher length does not match spec");
    if (probe_size < 1) throw ValidationError("Fisher probe_size must be >= 1");
    if (!values.allFinite() || (values.array() < 0.0).any())
        throw ValidationError("Fisher entries must be finite and nonnegative");
}

namespace {

void check_probe(const ParamVec& params, const ProbeSet& probe) {
    probe.validate();
    if (probe.inputs.cols() != params.spec().input_dim())
        throw DimensionMismatch("probe input dimension does not match network");
}

}  // namespace

DiagFisher estimate_diag_fisher(const ParamVec& params, const ProbeSet& probe) {
    check_probe(params, probe);
    Vector acc = Vector::Zero(params.size());
    for (Eigen::Index l = 0; l < probe.size(); ++l) {
        const Matrix jac = jacobian(params, probe.inputs.row(l).transpose());
        acc += jac.cwiseAbs2().colwise().sum().transpose();
    }
    acc /= static_cast<double>(probe.size());
    return DiagFisher{params.spec(), std::move(acc), probe.size()};
}

Matrix full_empirical_fisher(const ParamVec& params, const ProbeSet& probe) {
    if (params.size() > kFullFisherMaxDim)
        throw ValidationError("full Fisher requested for d = " + std::to_string(params.size()) + " > " +
                              std::to_string(kFullFisherMaxDim));
    check_probe(params, probe);
    Matrix acc = Matrix::Zero(params.size(), params.size());
    for (Eigen::Index l = 0; l < probe.size(); ++l) {
        const Matrix jac = jacobian(params, probe.inputs.row(l).transpose());
        acc.noalias() += jac.transpose() * jac;
    }
    acc /= static_cast<double>(probe.size());
    // Exact symmetry regardless of the GEMM's summation order.
    return 0.5 * (acc + acc.transpose());
}

namespace {

Vector displacement(const ParamVec& theta, const ParamVec& anchor) {
    if (!(theta.spec() == anchor.spec())) throw DimensionMismatch("parameter vectors belong to different specs");
    return theta.values() - anchor.values();
}

}  // namespace

double kl_quadratic(const ParamVec& theta, const ParamVec& anchor, const Matrix& fisher) {
    const Vector delta = displacement(theta, anchor);
    if (fisher.rows() != delta.size() || fisher.cols() != delta.size())
        throw DimensionMismatch("Fisher matrix shape does not match parameters");
    return std::max(0.0, delta.dot(fisher * delta));
}

double kl_quadratic(const ParamVec& theta, const ParamVec& anchor, const DiagFisher& fisher) {
    const Vector delta = displacement(theta, anchor);
    if (fisher.values.size() != delta.size()) throw DimensionMismatch("Fisher length does not match parameters");
    return delta.cwiseAbs2().dot(fisher.values);
}

double empirical_output_divergence(const ParamVec& theta, const ParamVec& anchor, const ProbeSet& probe) {
    if (!(theta.spec() == anchor.spec())) throw DimensionMismatch("parameter vectors belong to different specs");
    check_probe(theta, probe);
    double acc = 0.0;
    for (Eigen::Index l = 0; l < probe.size(); ++l) {
        const Vector x = probe.inputs.row(l).transpose();
        acc += 0.5 * (forward(theta, x) - forward(anchor, x)).squaredNorm();
    }
    return acc / static_cast<double>(probe.size());
}

}  // namespace coin
