#pragma once

// Decoding a missing expert from the coded network, coding losses and
// normalized decoding accuracy (NDA).

#include <span>
#include <string>
#include <vector>

#include "coin/coding_weights.hpp"
#include "coin/nn.hpp"

namespace coin {

struct DecodeRequest {
    int target = 0;
    Vector coded_output;
    // Outputs of every expert except `target`, keyed by expert index.
    std::vector<std::pair<int, Vector>> available;
    CodingWeights weights;
};

// (1/beta_i) (f_c(x) - sum_{j != i} beta_j f_j(x))
Vector decode(const DecodeRequest& req);

// Same, with all N outputs supplied positionally; outputs[target] is ignored.
Vector decode(int target, const Eigen::Ref<const Vector>& coded_output, std::span<const Vector> outputs,
              const CodingWeights& weights);

// sum_i beta_i f_i(x)
Vector combine(std::span<const Vector> outputs, const CodingWeights& weights);

// (betabar / 2P) sum_l ||f_c(x_l) - sum_i beta_i f_i(x_l)||^2
double empirical_coding_loss(const ParamVec& coded, std::span<const ParamVec> models, const CodingWeights& weights,
                             const ProbeSet& probe);

// Same loss from precomputed outputs: coded is P x K, expert_outputs[i] is P x K.
double empirical_coding_loss(const Matrix& coded, std::span<const Matrix> expert_outputs,
                             const CodingWeights& weights);

// (1/P) sum_l ||f_c(x_l) - sum_i beta_i f_i(x_l)||^2, free of the betabar scale.
double mean_squared_residual(const ParamVec& coded, std::span<const ParamVec> models, const CodingWeights& weights,
                             const ProbeSet& probe);

// (1 / 2NP) sum_l sum_i ||f_i(x_l) - fhat_i(x_l)||^2, the per-expert decode
// mismatch form. Algebraically identical to empirical_coding_loss.
double decode_mismatch_loss(const ParamVec& coded, std::span<const ParamVec> models, const CodingWeights& weights,
                            const ProbeSet& probe);

// Gradient of empirical_coding_loss with respect to the coded parameters:
// (betabar / P) sum_l J(x_l)^T (f_c(x_l) - yhat_l).
Vector empirical_coding_loss_gradient(const ParamVec& coded, std::span<const ParamVec> models,
                                      const CodingWeights& weights, const ProbeSet& probe);

struct NdaResult {
    double nda = 0.0;  // percent, may exceed 100
    double decoded_accuracy = 0.0;
    double expert_accuracy = 0.0;
    Eigen::Index test_size = 0;
};

// 100 * acc(argmax fhat_i) / acc(argmax f_i) on `test`. Throws when the expert
// has zero accuracy, since the ratio is undefined.
NdaResult nda(const ParamVec& coded, std::span<const ParamVec> experts, int target, const LabeledDataset& test,
              const CodingWeights& weights);

// Ratio form used when decoded/expert correct counts are already known.
double nda_from_counts(Eigen::Index decoded_correct, Eigen::Index expert_correct);

double avg_nda(std::span<const double> per_network);

struct NdaReport {
    std::string method;
    std::string scenario;
    std::uint64_t seed = 0;
    Eigen::Index probe_size = 0;
    std::vector<NdaResult> per_network;

    double average() const;
};

NdaReport nda_report(const ParamVec& coded, std::span<const ParamVec> experts, std::span<const LabeledDataset> tests,
                     const CodingWeights& weights, std::string method, std::string scenario, std::uint64_t seed,
                     Eigen::Index probe_size);

// CSV header and rows: one row per network plus one average row (network = "avg").
std::string nda_csv_header();
std::vector<std::string> nda_csv_rows(const NdaReport& report, const std::string& config_hash);

}  // namespace coin
