#include "coin/coder.hpp"

#include <algorithm>
#include <cmath>

#include "coin/errors.hpp"
#include "coin/io.hpp"
#include "coin/metrics.hpp"

namespace coin {

std::string_view to_string(CodingMethod m) {
    switch (m) {
        case CodingMethod::Coin: return "coin";
        case CodingMethod::Vanilla: return "vanilla";
        case CodingMethod::TaskArithmetic: return "task-arithmetic";
        case CodingMethod::Distilled: return "distill";
    }
    return "unknown";
}

CodingMethod coding_method_from_string(std::string_view name) {
    if (name == "coin") return CodingMethod::Coin;
    if (name == "vanilla") return CodingMethod::Vanilla;
    if (name == "task-arithmetic") return CodingMethod::TaskArithmetic;
    if (name == "distill") return CodingMethod::Distilled;
    throw ValidationError("unknown coding method '" + std::string(name) + "'");
}

namespace {

void check_vectors(std::span<const Vector> thetas, std::span<const Vector> fishers, const CodingWeights& weights,
                   double lambda) {
    if (thetas.empty()) throw ValidationError("need at least one model");
    if (static_cast<int>(thetas.size()) != weights.size() || fishers.size() != thetas.size())
        throw DimensionMismatch("models, Fishers and coding weights must have equal counts");
    const Eigen::Index d = thetas.front().size();
    for (std::size_t i = 0; i < thetas.size(); ++i)
        if (thetas[i].size() != d || fishers[i].size() != d)
            throw DimensionMismatch("all parameter and Fisher vectors must have the same length");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be finite and >= 0");
}

void check_models(std::span<const ParamVec> models) {
    if (models.empty()) throw ValidationError("need at least one model");
    for (const auto& m : models)
        if (!(m.spec() == models.front().spec())) throw DimensionMismatch("models must share one network spec");
}

std::vector<std::string> source_ids(std::span<const ParamVec> models) {
    std::vector<std::string> ids;
    for (const auto& m : models) ids.push_back(content_hash(dump_checkpoint(m)));
    return ids;
}

std::vector<Vector> values_of(std::span<const ParamVec> models) {
    std::vector<Vector> out;
    for (const auto& m : models) out.push_back(m.values());
    return out;
}

std::vector<Vector> values_of(std::span<const DiagFisher> fishers, const NetworkSpec& spec) {
    std::vector<Vector> out;
    for (const auto& f : fishers) {
        f.validate();
        if (!(f.spec == spec)) throw DimensionMismatch("Fisher belongs to a different network spec");
        out.push_back(f.values);
    }
    return out;
}

}  // namespace

Vector coin_merge(std::span<const Vector> thetas, std::span<const Vector> fishers, const CodingWeights& weights,
                  double lambda) {
    check_vectors(thetas, fishers, weights, lambda);
    const Eigen::Index d = thetas.front().size();
    Vector num = Vector::Zero(d);
    Vector den = Vector::Zero(d);
    for (int i = 0; i < weights.size(); ++i) {
        const Vector w = weights.betabar(i) * (fishers[i].array() + lambda).matrix();
        num += w.cwiseProduct(thetas[i]);
        den += w;
    }
    for (Eigen::Index j = 0; j < d; ++j)
        if (!(den[j] > 0.0))
            throw SingularCoordinate("coordinate " + std::to_string(j) +
                                     " has zero aggregate Fisher; use lambda > 0");
    return num.cwiseQuotient(den);
}

double g_objective(const Vector& theta, std::span<const Vector> thetas, std::span<const Vector> fishers,
                   const CodingWeights& weights, double lambda) {
    check_vectors(thetas, fishers, weights, lambda);
    if (theta.size() != thetas.front().size()) throw DimensionMismatch("theta has the wrong length");
    double acc = 0.0;
    for (int i = 0; i < weights.size(); ++i) {
        const Vector sq = (theta - thetas[i]).cwiseAbs2();
        acc += weights.betabar(i) * (sq.dot(fishers[i]) + lambda * sq.sum());
    }
    return acc;
}

Vector g_gradient(const Vector& theta, std::span<const Vector> thetas, std::span<const Vector> fishers,
                  const CodingWeights& weights, double lambda) {
    check_vectors(thetas, fishers, weights, lambda);
    if (theta.size() != thetas.front().size()) throw DimensionMismatch("theta has the wrong length");
    Vector grad = Vector::Zero(theta.size());
    for (int i = 0; i < weights.size(); ++i)
        grad += 2.0 * weights.betabar(i) * (fishers[i].array() + lambda).matrix().cwiseProduct(theta - thetas[i]);
    return grad;
}

CodedModel coin_code(std::span<const ParamVec> models, std::span<const DiagFisher> fishers,
                     const CodingWeights& weights, double lambda) {
    check_models(models);
    const auto thetas = values_of(models);
    const auto fvals = values_of(fishers, models.front().spec());
    CodedModel out{ParamVec(models.front().spec(), coin_merge(thetas, fvals, weights, lambda)),
                   CodingMethod::Coin, lambda, std::nullopt, std::nullopt, source_ids(models), {}};
    return out;
}

double g_objective(const ParamVec& theta, std::span<const ParamVec> models, std::span<const DiagFisher> fishers,
                   const CodingWeights& weights, double lambda) {
    check_models(models);
    if (!(theta.spec() == models.front().spec())) throw DimensionMismatch("theta belongs to a different spec");
    return g_objective(theta.values(), values_of(models), values_of(fishers, theta.spec()), weights, lambda);
}

CodedModel vanilla_average(std::span<const ParamVec> models, const CodingWeights& weights) {
    check_models(models);
    if (static_cast<int>(models.size()) != weights.size())
        throw DimensionMismatch("number of models does not match number of coding weights");
    Vector acc = Vector::Zero(models.front().size());
    for (int i = 0; i < weights.size(); ++i) acc += weights.beta(i) * models[i].values();
    return CodedModel{ParamVec(models.front().spec(), std::move(acc)), CodingMethod::Vanilla, std::nullopt,
                      std::nullopt, std::nullopt, source_ids(models), {}};
}

CodedModel task_arithmetic(const ParamVec& base, std::span<const ParamVec> models, double alpha) {
    check_models(models);
    if (!(base.spec() == models.front().spec())) throw DimensionMismatch("base model has a different spec");
    if (!std::isfinite(alpha)) throw ValidationError("alpha must be finite");
    Vector task_sum = Vector::Zero(base.size());
    for (const auto& m : models) task_sum += m.values() - base.values();
    return CodedModel{ParamVec(base.spec(), base.values() + alpha * task_sum), CodingMethod::TaskArithmetic,
                      std::nullopt, alpha, std::nullopt, source_ids(models), {}};
}

namespace {

template <typename Build>
TuneResult grid_search(std::span<const ParamVec> models, const CodingWeights& weights, const ProbeSet& probe,
                       std::span<const double> grid, TuneCriterion criterion, Build&& build) {
    if (grid.empty()) throw ValidationError("tuning grid is empty");
    probe.validate();
    const bool use_nda = !criterion.validation.empty();
    if (use_nda && criterion.validation.size() != models.size())
        throw DimensionMismatch("NDA tuning needs one validation set per expert");

    std::vector<Matrix> expert_out;
    if (!use_nda)
        for (const auto& m : models) expert_out.push_back(forward_batch(m, probe.inputs));

    std::optional<TuneResult> best;
    std::vector<double> scores;
    for (double value : grid) {
        CodedModel candidate = build(value);
        double score;
        if (use_nda) {
            score = -nda_report(candidate.params, models, criterion.validation, weights, "", "", 0, 0).average();
        } else {
            score = empirical_coding_loss(forward_batch(candidate.params, probe.inputs), expert_out, weights);
        }
        scores.push_back(score);
        // Scores within round-off of each other tie; ties go to the smaller grid value.
        const double incumbent = best ? best->scores.front() : 0.0;
        const double tol = 1e-12 * std::max(std::abs(score), std::abs(incumbent));
        if (!best || score < incumbent - tol || (std::abs(score - incumbent) <= tol && value < best->value)) {
            best = TuneResult{value, std::move(candidate), {score}};
        }
    }
    best->scores = std::move(scores);
    best->model.probe_hash = hash_matrix(probe.inputs);
    return std::move(*best);
}

}  // namespace

TuneResult tune_alpha(const ParamVec& base, std::span<const ParamVec> models, const CodingWeights& weights,
                      const ProbeSet& probe, std::span<const double> grid, TuneCriterion criterion) {
    check_models(models);
    return grid_search(models, weights, probe, grid, criterion,
                       [&](double alpha) { return task_arithmetic(base, models, alpha); });
}

TuneResult tune_lambda(std::span<const ParamVec> models, std::span<const DiagFisher> fishers,
                       const CodingWeights& weights, const ProbeSet& probe, std::span<const double> grid,
                       TuneCriterion criterion) {
    check_models(models);
    return grid_search(models, weights, probe, grid, criterion,
                       [&](double lambda) { return coin_code(models, fishers, weights, lambda); });
}

CodedModel distill(std::span<const ParamVec> models, const CodingWeights& weights, const ProbeSet& probe,
                   const ParamVec& init, TrainConfig cfg, const EpochCallback& on_epoch) {
    check_models(models);
    if (!(init.spec() == models.front().spec())) throw DimensionMismatch("init has a different spec");
    if (static_cast<int>(models.size()) != weights.size())
        throw DimensionMismatch("number of models does not match number of coding weights");
    cfg.loss = Loss::SquaredError;
    cfg.validate();
    if (cfg.epochs > 0) probe.validate();

    CodedModel out{init, CodingMethod::Distilled, std::nullopt, std::nullopt, cfg, source_ids(models), {}};
    if (cfg.epochs == 0) return out;

    Matrix targets = Matrix::Zero(probe.size(), init.spec().output_dim());
    for (int i = 0; i < weights.size(); ++i) targets += weights.beta(i) * forward_batch(models[i], probe.inputs);
    out.params = fit_regression(init, probe.inputs, targets, cfg, on_epoch);
    out.probe_hash = hash_matrix(probe.inputs);
    return out;
}

std::vector<double> default_lambda_grid() { return {1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}; }

std::vector<double> default_alpha_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 20; ++k) g.push_back(k / 20.0);
    return g;
}

}  // namespace coin
