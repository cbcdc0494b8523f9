#pragma once

// Synthetic Gaussian-mixture classification data standing in for image
// datasets, and the two-expert scenarios built from it.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "coin/nn.hpp"

namespace coin {

struct MixtureSpec {
    Matrix means;  // num_classes x input_dim
    double sigma = 1.0;
    int samples_per_class = 100;

    int input_dim() const { return static_cast<int>(means.cols()); }
    int num_classes() const { return static_cast<int>(means.rows()); }
    void validate() const;
};

// K distinct points of the integer lattice {0..m-1}^s (smallest m with m^s >= K),
// scaled by `separation` and centred on the origin. Nearest pairs are exactly
// `separation` apart or further.
Matrix lattice_means(int num_classes, int input_dim, double separation, std::uint64_t seed);

// Each sample is mean_y + sigma * N(0, I); exactly samples_per_class rows per
// class, in shuffled order.
LabeledDataset generate_mixture(const MixtureSpec& spec, std::uint64_t seed);

enum class ScenarioKind { LabelSplit, DistinctDatasets };
std::string_view to_string(ScenarioKind k);
ScenarioKind scenario_kind_from_string(std::string_view name);

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::LabelSplit;
    MixtureSpec first;
    // Second dataset, DistinctDatasets only.
    std::optional<MixtureSpec> second;
    std::uint64_t seed = 0;
    double train_fraction = 0.8;
    // Total probe points, split evenly between the two sides.
    Eigen::Index probe_size = 200;

    void validate() const;
};

struct ExpertData {
    LabeledDataset train;
    LabeledDataset test;
};

struct Scenario {
    std::vector<ExpertData> sides;
    ProbeSet probe;
    // Kept aside for train-set decode accuracy; never used for coding.
    std::vector<int> probe_labels;
    std::vector<int> probe_side;
    int num_classes = 0;
};

Scenario make_scenario(const ScenarioSpec& spec);

}  // namespace coin
