#pragma once

#include <vector>

namespace coin {

// Convex-combination weights beta of the coded output sum_i beta_i f_i(x).
class CodingWeights {
public:
    explicit CodingWeights(std::vector<double> betas);

    static CodingWeights uniform(int n);

    int size() const { return static_cast<int>(betas_.size()); }
    double beta(int i) const { return betas_.at(static_cast<std::size_t>(i)); }
    const std::vector<double>& betas() const { return betas_; }

    // beta_i * sum_j beta_j; the per-model weight of the merging objective.
    double betabar(int i) const;

    // (sum_i 1 / beta_i^2) / N; scale of the empirical coding loss.
    double betabar() const;

private:
    std::vector<double> betas_;
};

}  // namespace coin
