#pragma once

// End-to-end experiment pipeline driven by one JSON config document:
// train experts, code them, evaluate NDA, run ablations and the serving
// simulation, and render a report. Every artifact is a pure function of the
// effective config and is tagged with its hash.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coin/coder.hpp"
#include "coin/datagen.hpp"
#include "coin/metrics.hpp"
#include "coin/serving_sim.hpp"

namespace coin {

struct SimulatorConfig {
    std::vector<double> arrival_rates;  // one per expert
    double horizon = 100000.0;
    double service_rate = 1.0;
    double coded_service_rate = 1.0;
    double straggler_probability = 0.3;
    double straggler_slowdown = 20.0;
    ServiceDistribution distribution = ServiceDistribution::Exponential;
    std::vector<Policy> policies{Policy::Uncoded, Policy::CodedRecovery};
    CodingMethod coded_method = CodingMethod::Coin;
    bool dump_records = true;
};

struct ExperimentConfig {
    std::string name = "experiment";

    // Scenario.
    ScenarioKind scenario = ScenarioKind::LabelSplit;
    int num_classes = 10;
    int input_dim = 8;
    double separation = 4.0;
    double sigma = 1.0;
    int samples_per_class = 200;
    double train_fraction = 0.8;
    std::uint64_t means_seed = 0;

    // Network: input_dim, hidden..., num_classes.
    std::vector<int> hidden{32};
    Activation activation = Activation::Tanh;

    TrainConfig train{1e-2, 30, 32, 0.0, 0, Loss::CrossEntropy};
    // Epochs of shared pretraining on both sides before the experts fork.
    int base_pretrain_epochs = 0;

    std::vector<CodingMethod> methods{CodingMethod::Coin, CodingMethod::Vanilla, CodingMethod::TaskArithmetic,
                                      CodingMethod::Distilled};
    std::vector<double> lambda_grid = default_lambda_grid();
    std::vector<double> alpha_grid = default_alpha_grid();
    // Empty means uniform.
    std::vector<double> coding_weights;
    Eigen::Index probe_size = 200;
    // Tune on labeled probe NDA instead of the probe coding loss.
    bool tune_on_nda = false;

    TrainConfig distill{1e-3, 200, 32, 0.0, 0, Loss::SquaredError};
    std::vector<Eigen::Index> ablate_p{32, 64, 128, 256};
    Eigen::Index distill_curve_p = 32;

    std::vector<std::uint64_t> seeds{0};
    std::optional<SimulatorConfig> simulator;
    std::string output_dir = "out";

    NetworkSpec network() const;
    CodingWeights weights() const;
    int num_experts() const { return 2; }
    void validate() const;
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    // Hash of the canonical JSON form, excluding seeds and output_dir: rows
    // and checkpoints carry their seed explicitly.
    std::string hash() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);

// Scenario for one seed with the given probe size.
Scenario build_scenario(const ExperimentConfig& cfg, std::uint64_t seed, Eigen::Index probe_size);

struct ExpertSet {
    ParamVec base;
    std::vector<ParamVec> experts;
};
// Trains from scratch in memory, no files touched.
ExpertSet train_expert_set(const ExperimentConfig& cfg, const Scenario& sc, std::uint64_t seed);

// Codes the experts with one method on the scenario's probe, tuning per grids.
CodedModel code_experts(const ExperimentConfig& cfg, const Scenario& sc, const ExpertSet& set, CodingMethod method,
                        std::uint64_t seed);
ExpertSet load_expert_set(const ExperimentConfig& cfg, std::uint64_t seed);

// Output layout, relative to the output directory.
namespace paths {
std::filesystem::path expert(const std::filesystem::path& out, std::uint64_t seed, int i);
std::filesystem::path base(const std::filesystem::path& out, std::uint64_t seed);
std::filesystem::path coded(const std::filesystem::path& out, std::uint64_t seed, CodingMethod m);
std::filesystem::path nda_csv(const std::filesystem::path& out);
std::filesystem::path ablate_csv(const std::filesystem::path& out);
std::filesystem::path distill_csv(const std::filesystem::path& out);
std::filesystem::path latency_csv(const std::filesystem::path& out);
std::filesystem::path report_dir(const std::filesystem::path& out);
}  // namespace paths

// Read-modify-rename append; the header is written when the file is new and
// must match otherwise.
void append_csv(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows);

void cmd_train_experts(const ExperimentConfig& cfg);
void cmd_code(const ExperimentConfig& cfg, CodingMethod method);
std::vector<NdaReport> cmd_evaluate(const ExperimentConfig& cfg);
std::vector<NdaReport> cmd_ablate_p(const ExperimentConfig& cfg, std::vector<Eigen::Index> p_list);

struct DistillCurvePoint {
    std::uint64_t seed = 0;
    int epoch = 0;
    double probe_coding_loss = 0.0;
    double train_decode_accuracy = 0.0;  // percent, probe rows with their labels
    double test_nda = 0.0;               // average over experts
};
std::vector<DistillCurvePoint> cmd_distill_curve(const ExperimentConfig& cfg);

struct SimOutcome {
    std::uint64_t seed = 0;
    LatencyReport report;
    std::optional<double> offline_agreement;
};
std::vector<SimOutcome> cmd_simulate(const ExperimentConfig& cfg);

// Renders report/summary.md and SVG plots from the results under the output
// directory. Throws on missing or empty results and on mixed config hashes.
void cmd_report(const ExperimentConfig& cfg);

}  // namespace coin
