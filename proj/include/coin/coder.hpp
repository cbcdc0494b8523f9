#pragma once

// Constructing a coded network whose output approximates sum_i beta_i f_i(x).
//
// COIN merges the experts coordinate-wise, weighting each expert's parameter
// by its diagonal Fisher plus a ridge term lambda:
//
//   theta_c[j] = sum_i bb_i (F_i[j] + lambda) theta_i[j] / sum_i bb_i (F_i[j] + lambda)
//
// with bb_i = beta_i * sum_k beta_k. This is the exact minimizer of
//
//   G(theta) = sum_i bb_i (theta - theta_i)^T F_i (theta - theta_i) + lambda sum_i bb_i ||theta - theta_i||^2.
//
// Vanilla averaging, task arithmetic and ensemble distillation are the
// baselines it is compared against.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coin/coding_weights.hpp"
#include "coin/fisher.hpp"
#include "coin/nn.hpp"

namespace coin {

enum class CodingMethod { Coin, Vanilla, TaskArithmetic, Distilled };

std::string_view to_string(CodingMethod m);
CodingMethod coding_method_from_string(std::string_view name);

struct CodedModel {
    ParamVec params;
    CodingMethod method;
    std::optional<double> lambda;
    std::optional<double> alpha;
    std::optional<TrainConfig> train_config;
    // Content hashes of the source checkpoints, in model order.
    std::vector<std::string> source_ids;
    // Hash of the probe inputs used, empty if none.
    std::string probe_hash;
};

// Coordinate-wise closed form on raw vectors. Throws SingularCoordinate when
// lambda == 0 and some coordinate has zero aggregate Fisher.
Vector coin_merge(std::span<const Vector> thetas, std::span<const Vector> fishers, const CodingWeights& weights,
                  double lambda);

double g_objective(const Vector& theta, std::span<const Vector> thetas, std::span<const Vector> fishers,
                   const CodingWeights& weights, double lambda);

// 2 sum_i bb_i (F_i + lambda) (theta - theta_i)
Vector g_gradient(const Vector& theta, std::span<const Vector> thetas, std::span<const Vector> fishers,
                  const CodingWeights& weights, double lambda);

CodedModel coin_code(std::span<const ParamVec> models, std::span<const DiagFisher> fishers,
                     const CodingWeights& weights, double lambda);

double g_objective(const ParamVec& theta, std::span<const ParamVec> models, std::span<const DiagFisher> fishers,
                   const CodingWeights& weights, double lambda);

// sum_i beta_i theta_i
CodedModel vanilla_average(std::span<const ParamVec> models, const CodingWeights& weights);

// theta_0 + alpha * sum_i (theta_i - theta_0)
CodedModel task_arithmetic(const ParamVec& base, std::span<const ParamVec> models, double alpha);

// Grid search target. With no validation sets the tuner minimizes the
// empirical coding loss on the probe; with one labeled validation set per
// expert it maximizes average NDA on them instead.
struct TuneCriterion {
    std::span<const LabeledDataset> validation;
};

struct TuneResult {
    double value = 0.0;
    CodedModel model;
    // Score per grid point, in grid order (coding loss, or -avg NDA).
    std::vector<double> scores;
};

TuneResult tune_alpha(const ParamVec& base, std::span<const ParamVec> models, const CodingWeights& weights,
                      const ProbeSet& probe, std::span<const double> grid, TuneCriterion criterion = {});

TuneResult tune_lambda(std::span<const ParamVec> models, std::span<const DiagFisher> fishers,
                       const CodingWeights& weights, const ProbeSet& probe, std::span<const double> grid,
                       TuneCriterion criterion = {});

// Squared-loss regression of `init` onto the pseudo-labels sum_i beta_i f_i(x_l).
CodedModel distill(std::span<const ParamVec> models, const CodingWeights& weights, const ProbeSet& probe,
                   const ParamVec& init, TrainConfig cfg, const EpochCallback& on_epoch = {});

// Grids used when a config does not override them.
std::vector<double> default_lambda_grid();  // 1e-5, 1e-4, ..., 1
std::vector<double> default_alpha_grid();   // 0.05, 0.10, ..., 1.0

}  // namespace coin
