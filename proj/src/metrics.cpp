#include "coin/metrics.hpp"

#include <cmath>
#include <numeric>

#include "coin/errors.hpp"
#include "coin/io.hpp"

namespace coin {

CodingWeights::CodingWeights(std::vector<double> betas) : betas_(std::move(betas)) {
    if (betas_.empty()) throw ValidationError("coding weights need at least one entry");
    double sum = 0.0;
    for (double b : betas_) {
        if (!(b > 0.0) || !std::isfinite(b)) throw ValidationError("coding weights must be positive and finite");
        sum += b;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ValidationError("coding weights must sum to 1");
}

CodingWeights CodingWeights::uniform(int n) {
    if (n < 1) throw ValidationError("need at least one model");
    return CodingWeights(std::vector<double>(static_cast<std::size_t>(n), 1.0 / n));
}

double CodingWeights::betabar(int i) const {
    return beta(i) * std::accumulate(betas_.begin(), betas_.end(), 0.0);
}

double CodingWeights::betabar() const {
    double acc = 0.0;
    for (double b : betas_) acc += 1.0 / (b * b);
    return acc / static_cast<double>(betas_.size());
}

Vector decode(int target, const Eigen::Ref<const Vector>& coded_output, std::span<const Vector> outputs,
              const CodingWeights& weights) {
    const int n = weights.size();
    if (target < 0 || target >= n) throw ValidationError("decode target out of range");
    if (static_cast<int>(outputs.size()) != n) throw DimensionMismatch("decode needs one output slot per model");
    Vector acc = coded_output;
    for (int j = 0; j < n; ++j) {
        if (j == target) continue;
        if (outputs[j].size() != coded_output.size()) throw DimensionMismatch("decode: output dimension mismatch");
        acc -= weights.beta(j) * outputs[j];
    }
    return acc / weights.beta(target);
}

Vector decode(const DecodeRequest& req) {
    const int n = req.weights.size();
    if (req.target < 0 || req.target >= n) throw ValidationError("decode target out of range");
    std::vector<Vector> outputs(static_cast<std::size_t>(n));
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (const auto& [j, out] : req.available) {
        if (j < 0 || j >= n || j == req.target || seen[j])
            throw ValidationError("decode: available outputs must be distinct non-target indices");
        seen[j] = true;
        outputs[j] = out;
    }
    if (static_cast<int>(req.available.size()) != n - 1) throw ValidationError("decode: missing expert output");
    return decode(req.target, req.coded_output, outputs, req.weights);
}

Vector combine(std::span<const Vector> outputs, const CodingWeights& weights) {
    if (static_cast<int>(outputs.size()) != weights.size() || outputs.empty())
        throw DimensionMismatch("combine needs one output per weight");
    Vector acc = Vector::Zero(outputs.front().size());
    for (int i = 0; i < weights.size(); ++i) acc += weights.beta(i) * outputs[i];
    return acc;
}

namespace {

void check_models(std::span<const ParamVec> models, const CodingWeights& weights, const NetworkSpec& spec) {
    if (models.empty()) throw ValidationError("need at least one model");
    if (static_cast<int>(models.size()) != weights.size())
        throw DimensionMismatch("number of models does not match number of coding weights");
    for (const auto& m : models)
        if (!(m.spec() == spec)) throw DimensionMismatch("models must share one network spec");
}

// Targets sum_i beta_i f_i(x_l), one row per probe point.
Matrix ensemble_targets(std::span<const ParamVec> models, const CodingWeights& weights, const Matrix& inputs) {
    Matrix acc = Matrix::Zero(inputs.rows(), models.front().spec().output_dim());
    for (int i = 0; i < weights.size(); ++i) acc += weights.beta(i) * forward_batch(models[i], inputs);
    return acc;
}

}  // namespace

double empirical_coding_loss(const Matrix& coded, std::span<const Matrix> expert_outputs,
                             const CodingWeights& weights) {
    if (static_cast<int>(expert_outputs.size()) != weights.size())
        throw DimensionMismatch("one output matrix per expert required");
    if (coded.rows() == 0) throw ValidationError("coding loss over an empty probe set");
    Matrix residual = coded;
    for (int i = 0; i < weights.size(); ++i) {
        if (expert_outputs[i].rows() != coded.rows() || expert_outputs[i].cols() != coded.cols())
            throw DimensionMismatch("expert output shape mismatch");
        residual -= weights.beta(i) * expert_outputs[i];
    }
    return weights.betabar() / (2.0 * static_cast<double>(coded.rows())) * residual.squaredNorm();
}

double empirical_coding_loss(const ParamVec& coded, std::span<const ParamVec> models, const CodingWeights& weights,
                             const ProbeSet& probe) {
    check_models(models, weights, coded.spec());
    probe.validate();
    const Matrix residual = forward_batch(coded, probe.inputs) - ensemble_targets(models, weights, probe.inputs);
    return weights.betabar() / (2.0 * static_cast<double>(probe.size())) * residual.squaredNorm();
}

double mean_squared_residual(const ParamVec& coded, std::span<const ParamVec> models, const CodingWeights& weights,
                             const ProbeSet& probe) {
    check_models(models, weights, coded.spec());
    probe.validate();
    const Matrix residual = forward_batch(coded, probe.inputs) - ensemble_targets(models, weights, probe.inputs);
    return residual.squaredNorm() / static_cast<double>(probe.size());
}

double decode_mismatch_loss(const ParamVec& coded, std::span<const ParamVec> models, const CodingWeights& weights,
                            const ProbeSet& probe) {
    check_models(models, weights, coded.spec());
    probe.validate();
    const int n = weights.size();
    std::vector<Matrix> outs;
    for (const auto& m : models) outs.push_back(forward_batch(m, probe.inputs));
    const Matrix coded_out = forward_batch(coded, probe.inputs);

    double acc = 0.0;
    std::vector<Vector> row_outputs(static_cast<std::size_t>(n));
    for (Eigen::Index l = 0; l < probe.size(); ++l) {
        for (int j = 0; j < n; ++j) row_outputs[j] = outs[j].row(l).transpose();
        for (int i = 0; i < n; ++i) {
            const Vector fhat = decode(i, coded_out.row(l).transpose(), row_outputs, weights);
            acc += (row_outputs[i] - fhat).squaredNorm();
        }
    }
    return acc / (2.0 * n * static_cast<double>(probe.size()));
}

Vector empirical_coding_loss_gradient(const ParamVec& coded, std::span<const ParamVec> models,
                                      const CodingWeights& weights, const ProbeSet& probe) {
    check_models(models, weights, coded.spec());
    probe.validate();
    const Matrix targets = ensemble_targets(models, weights, probe.inputs);
    Vector grad = Vector::Zero(coded.size());
    for (Eigen::Index l = 0; l < probe.size(); ++l) {
        const Vector x = probe.inputs.row(l).transpose();
        grad += vjp(coded, x, forward(coded, x) - targets.row(l).transpose());
    }
    return grad * (weights.betabar() / static_cast<double>(probe.size()));
}

double nda_from_counts(Eigen::Index decoded_correct, Eigen::Index expert_correct) {
    if (expert_correct <= 0) throw ValidationError("NDA undefined: expert has zero accuracy on its test set");
    return 100.0 * static_cast<double>(decoded_correct) / static_cast<double>(expert_correct);
}

NdaResult nda(const ParamVec& coded, std::span<const ParamVec> experts, int target, const LabeledDataset& test,
              const CodingWeights& weights) {
    check_models(experts, weights, coded.spec());
    test.validate();
    if (target < 0 || target >= weights.size()) throw ValidationError("NDA target out of range");
    if (test.size() == 0) throw ValidationError("NDA over an empty test set");

    const int n = weights.size();
    std::vector<Matrix> outs;
    for (const auto& m : experts) outs.push_back(forward_batch(m, test.inputs));
    const Matrix coded_out = forward_batch(coded, test.inputs);

    Eigen::Index decoded_correct = 0, expert_correct = 0;
    std::vector<Vector> row_outputs(static_cast<std::size_t>(n));
    for (Eigen::Index r = 0; r < test.size(); ++r) {
        for (int j = 0; j < n; ++j) row_outputs[j] = outs[j].row(r).transpose();
        const int y = test.labels[static_cast<std::size_t>(r)];
        if (argmax(decode(target, coded_out.row(r).transpose(), row_outputs, weights)) == y) ++decoded_correct;
        if (argmax(row_outputs[target]) == y) ++expert_correct;
    }
    NdaResult res;
    res.nda = nda_from_counts(decoded_correct, expert_correct);
    res.decoded_accuracy = static_cast<double>(decoded_correct) / static_cast<double>(test.size());
    res.expert_accuracy = static_cast<double>(expert_correct) / static_cast<double>(test.size());
    res.test_size = test.size();
    return res;
}

double avg_nda(std::span<const double> per_network) {
    if (per_network.empty()) throw ValidationError("average NDA of no networks");
    return std::accumulate(per_network.begin(), per_network.end(), 0.0) / static_cast<double>(per_network.size());
}

double NdaReport::average() const {
    std::vector<double> v;
    for (const auto& r : per_network) v.push_back(r.nda);
    return avg_nda(v);
}

NdaReport nda_report(const ParamVec& coded, std::span<const ParamVec> experts, std::span<const LabeledDataset> tests,
                     const CodingWeights& weights, std::string method, std::string scenario, std::uint64_t seed,
                     Eigen::Index probe_size) {
    if (tests.size() != experts.size()) throw DimensionMismatch("one test set per expert required");
    NdaReport rep{std::move(method), std::move(scenario), seed, probe_size, {}};
    for (int i = 0; i < static_cast<int>(experts.size()); ++i)
        rep.per_network.push_back(nda(coded, experts, i, tests[i], weights));
    return rep;
}

std::string nda_csv_header() {
    return "config_hash,scenario,method,seed,probe_size,network,nda,decoded_accuracy,expert_accuracy,test_size";
}

std::vector<std::string> nda_csv_rows(const NdaReport& report, const std::string& config_hash) {
    const std::string prefix = config_hash + "," + report.scenario + "," + report.method + "," +
                               std::to_string(report.seed) + "," + std::to_string(report.probe_size) + ",";
    std::vector<std::string> rows;
    for (std::size_t i = 0; i < report.per_network.size(); ++i) {
        const auto& r = report.per_network[i];
        rows.push_back(prefix + std::to_string(i) + "," + format_double(r.nda) + "," +
                       format_double(r.decoded_accuracy) + "," + format_double(r.expert_accuracy) + "," +
                       std::to_string(r.test_size));
    }
    rows.push_back(prefix + "avg," + format_double(report.average()) + ",,,");
    return rows;
}

}  // namespace coin
