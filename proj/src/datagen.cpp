#include "coin/datagen.hpp"

#include <cmath>
#include <numeric>
#include <set>

#include "coin/errors.hpp"
#include "coin/rng.hpp"

namespace coin {

void MixtureSpec::validate() const {
    if (num_classes() < 2) throw ValidationError("mixture needs at least two classes");
    if (input_dim() < 1) throw ValidationError("mixture needs input_dim >= 1");
    if (!(sigma > 0.0)) throw ValidationError("mixture sigma must be positive");
    if (samples_per_class < 1) throw ValidationError("samples_per_class must be >= 1");
    for (int a = 0; a < num_classes(); ++a)
        for (int b = a + 1; b < num_classes(); ++b)
            if (means.row(a) == means.row(b)) throw ValidationError("mixture class means must be distinct");
}

Matrix lattice_means(int num_classes, int input_dim, double separation, std::uint64_t seed) {
    if (num_classes < 2 || input_dim < 1 || !(separation > 0.0))
        throw ValidationError("lattice_means: need K >= 2, s >= 1, separation > 0");
    int side = 2;
    while (std::pow(static_cast<double>(side), input_dim) < num_classes) ++side;
    const double cells = std::pow(static_cast<double>(side), input_dim);

    Rng rng(mix_seed(seed, 0x6d65616e));
    std::set<std::vector<int>> used;
    Matrix means(num_classes, input_dim);
    int k = 0;
    if (cells <= 4096.0) {
        // Enumerate then pick without replacement.
        std::vector<long> ids(static_cast<std::size_t>(cells));
        std::iota(ids.begin(), ids.end(), 0L);
        rng.shuffle(ids);
        for (; k < num_classes; ++k) {
            long id = ids[static_cast<std::size_t>(k)];
            for (int c = 0; c < input_dim; ++c) {
                means(k, c) = static_cast<double>(id % side);
                id /= side;
            }
        }
    } else {
        while (k < num_classes) {
            std::vector<int> p(static_cast<std::size_t>(input_dim));
            for (auto& v : p) v = static_cast<int>(rng.index(static_cast<std::uint64_t>(side)));
            if (!used.insert(p).second) continue;
            for (int c = 0; c < input_dim; ++c) means(k, c) = p[c];
            ++k;
        }
    }
    means.array() -= 0.5 * (side - 1);
    return means * separation;
}

LabeledDataset generate_mixture(const MixtureSpec& spec, std::uint64_t seed) {
    spec.validate();
    const int k = spec.num_classes(), s = spec.input_dim();
    const Eigen::Index n = static_cast<Eigen::Index>(k) * spec.samples_per_class;
    std::vector<int> labels;
    labels.reserve(static_cast<std::size_t>(n));
    for (int c = 0; c < k; ++c) labels.insert(labels.end(), static_cast<std::size_t>(spec.samples_per_class), c);
    Rng rng(seed);
    rng.shuffle(labels);

    LabeledDataset data;
    data.num_classes = k;
    data.inputs.resize(n, s);
    for (Eigen::Index r = 0; r < n; ++r) {
        const int y = labels[static_cast<std::size_t>(r)];
        for (int c = 0; c < s; ++c) data.inputs(r, c) = spec.means(y, c) + spec.sigma * rng.normal();
    }
    data.labels = std::move(labels);
    return data;
}

std::string_view to_string(ScenarioKind k) {
    return k == ScenarioKind::LabelSplit ? "label-split" : "distinct-datasets";
}

ScenarioKind scenario_kind_from_string(std::string_view name) {
    if (name == "label-split") return ScenarioKind::LabelSplit;
    if (name == "distinct-datasets") return ScenarioKind::DistinctDatasets;
    throw ValidationError("unknown scenario kind '" + std::string(name) + "'");
}

void ScenarioSpec::validate() const {
    first.validate();
    if (kind == ScenarioKind::DistinctDatasets) {
        if (!second) throw ValidationError("distinct-datasets scenario needs a second mixture");
        second->validate();
        if (second->input_dim() != first.input_dim())
            throw ValidationError("both datasets must share the input dimension");
        if (second->num_classes() != first.num_classes())
            throw ValidationError("both datasets must share the output space");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
    if (probe_size < 2 || probe_size % 2 != 0) throw ValidationError("probe_size must be even and >= 2");
}

namespace {

LabeledDataset take_rows(const LabeledDataset& src, const std::vector<Eigen::Index>& rows, Split split) {
    LabeledDataset out;
    out.num_classes = src.num_classes;
    out.split = split;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), src.inputs.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.inputs.row(static_cast<Eigen::Index>(i)) = src.inputs.row(rows[i]);
        out.labels.push_back(src.labels[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

ExpertData split_train_test(const LabeledDataset& pool, double train_fraction, Rng& rng) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(pool.size()));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    rng.shuffle(idx);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(idx.size())));
    if (n_train == 0 || n_train >= idx.size()) throw ValidationError("train/test split leaves a side empty");
    std::vector<Eigen::Index> tr(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Eigen::Index> te(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
    return ExpertData{take_rows(pool, tr, Split::Train), take_rows(pool, te, Split::Test)};
}

}  // namespace

Scenario make_scenario(const ScenarioSpec& spec) {
    spec.validate();
    Scenario sc;
    sc.num_classes = spec.first.num_classes();
    Rng split_rng(mix_seed(spec.seed, 1));

    if (spec.kind == ScenarioKind::LabelSplit) {
        const LabeledDataset all = generate_mixture(spec.first, mix_seed(spec.seed, 0));
        const int cut = (sc.num_classes + 1) / 2;
        std::vector<Eigen::Index> lo, hi;
        for (Eigen::Index r = 0; r < all.size(); ++r)
            (all.labels[static_cast<std::size_t>(r)] < cut ? lo : hi).push_back(r);
        sc.sides.push_back(split_train_test(take_rows(all, lo, Split::Train), spec.train_fraction, split_rng));
        sc.sides.push_back(split_train_test(take_rows(all, hi, Split::Train), spec.train_fraction, split_rng));
    } else {
        sc.sides.push_back(
            split_train_test(generate_mixture(spec.first, mix_seed(spec.seed, 0)), spec.train_fraction, split_rng));
        sc.sides.push_back(split_train_test(generate_mixture(*spec.second, mix_seed(spec.seed, 2)),
                                            spec.train_fraction, split_rng));
    }

    const Eigen::Index per_side = spec.probe_size / 2;
    Rng probe_rng(mix_seed(spec.seed, 3));
    sc.probe.inputs.resize(spec.probe_size, spec.first.input_dim());
    Eigen::Index row = 0;
    for (std::size_t side = 0; side < sc.sides.size(); ++side) {
        const auto& train = sc.sides[side].train;
        if (per_side > train.size())
            throw ValidationError("probe needs " + std::to_string(per_side) + " points per side but side " +
                                  std::to_string(side) + " has only " + std::to_string(train.size()) +
                                  " training samples");
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(train.size()));
        std::iota(idx.begin(), idx.end(), Eigen::Index{0});
        probe_rng.shuffle(idx);
        for (Eigen::Index k = 0; k < per_side; ++k, ++row) {
            const auto src = idx[static_cast<std::size_t>(k)];
            sc.probe.inputs.row(row) = train.inputs.row(src);
            sc.probe_labels.push_back(train.labels[static_cast<std::size_t>(src)]);
            sc.probe_side.push_back(static_cast<int>(side));
        }
    }
    return sc;
}

}  // namespace coin
