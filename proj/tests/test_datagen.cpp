#include "doctest.h"

#include <set>

#include "coin/datagen.hpp"
#include "coin/errors.hpp"

using namespace coin;

namespace {

ScenarioSpec label_split(Eigen::Index probe_size = 200) {
    ScenarioSpec spec;
    spec.kind = ScenarioKind::LabelSplit;
    spec.first.means = lattice_means(10, 6, 4.0, 1);
    spec.first.sigma = 1.0;
    spec.first.samples_per_class = 60;
    spec.seed = 17;
    spec.probe_size = probe_size;
    return spec;
}

std::vector<double> row_of(const Matrix& m, Eigen::Index r) {
    std::vector<double> v;
    for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
}

std::set<std::vector<double>> rows_of(const Matrix& m) {
    std::set<std::vector<double>> out;
    for (Eigen::Index r = 0; r < m.rows(); ++r) out.insert(row_of(m, r));
    return out;
}

}  // namespace

TEST_CASE("lattice means are distinct and separated") {
    for (auto [k, s] : std::vector<std::pair<int, int>>{{10, 6}, {10, 2}, {4, 1}, {10, 20}}) {
        const Matrix m = lattice_means(k, s, 4.0, 3);
        CHECK(m.rows() == k);
        CHECK(m.cols() == s);
        for (int a = 0; a < k; ++a)
            for (int b = a + 1; b < k; ++b) CHECK((m.row(a) - m.row(b)).norm() >= 4.0 - 1e-12);
    }
    CHECK(lattice_means(10, 6, 4.0, 3) == lattice_means(10, 6, 4.0, 3));
}

TEST_CASE("generate_mixture") {
    MixtureSpec spec;
    spec.means = lattice_means(3, 2, 5.0, 1);
    spec.samples_per_class = 25;
    SUBCASE("class counts are exact") {
        const auto d = generate_mixture(spec, 4);
        std::vector<int> hist(3, 0);
        for (int y : d.labels) ++hist[y];
        CHECK(hist == std::vector<int>{25, 25, 25});
        CHECK(d.inputs.rows() == 75);
    }
    SUBCASE("deterministic per seed") {
        const auto a = generate_mixture(spec, 4);
        const auto b = generate_mixture(spec, 4);
        CHECK(a.inputs == b.inputs);
        CHECK(a.labels == b.labels);
        CHECK(a.inputs != generate_mixture(spec, 5).inputs);
    }
    SUBCASE("vanishing noise lands on the class means") {
        spec.sigma = 1e-9;
        const auto d = generate_mixture(spec, 4);
        for (Eigen::Index r = 0; r < d.size(); ++r)
            CHECK((d.inputs.row(r) - spec.means.row(d.labels[static_cast<std::size_t>(r)])).norm() < 1e-6);
    }
    SUBCASE("invalid specs") {
        spec.sigma = 0.0;
        CHECK_THROWS_AS(generate_mixture(spec, 1), ValidationError);
        spec.sigma = 1.0;
        spec.means.row(1) = spec.means.row(0);
        CHECK_THROWS_AS(generate_mixture(spec, 1), ValidationError);
    }
}

TEST_CASE("label-split scenario") {
    const auto sc = make_scenario(label_split());
    REQUIRE(sc.sides.size() == 2);
    std::set<int> seen0, seen1;
    for (int y : sc.sides[0].train.labels) seen0.insert(y);
    for (int y : sc.sides[0].test.labels) seen0.insert(y);
    for (int y : sc.sides[1].train.labels) seen1.insert(y);
    for (int y : sc.sides[1].test.labels) seen1.insert(y);
    CHECK(seen0 == std::set<int>{0, 1, 2, 3, 4});
    CHECK(seen1 == std::set<int>{5, 6, 7, 8, 9});

    CHECK(sc.probe.size() == 200);
    CHECK(sc.probe_labels.size() == 200);
    CHECK(std::count(sc.probe_side.begin(), sc.probe_side.end(), 0) == 100);

    std::set<std::vector<double>> train_rows, test_rows;
    for (const auto& side : sc.sides) {
        const auto tr = rows_of(side.train.inputs), te = rows_of(side.test.inputs);
        for (const auto& r : tr) CHECK(te.count(r) == 0);
        train_rows.insert(tr.begin(), tr.end());
        test_rows.insert(te.begin(), te.end());
        CHECK(side.train.split == Split::Train);
        CHECK(side.test.split == Split::Test);
    }
    for (Eigen::Index r = 0; r < sc.probe.size(); ++r) {
        CHECK(train_rows.count(row_of(sc.probe.inputs, r)) == 1);
        CHECK(test_rows.count(row_of(sc.probe.inputs, r)) == 0);
    }
}

TEST_CASE("scenarios are deterministic and probes nest across sizes") {
    const auto a = make_scenario(label_split(64));
    const auto b = make_scenario(label_split(64));
    CHECK(a.probe.inputs == b.probe.inputs);
    CHECK(a.sides[1].test.inputs == b.sides[1].test.inputs);
    const auto big = make_scenario(label_split(128));
    CHECK(big.sides[0].train.inputs == a.sides[0].train.inputs);
    CHECK(big.probe.inputs.topRows(32) == a.probe.inputs.topRows(32));
}

TEST_CASE("distinct-datasets scenario") {
    auto spec = label_split();
    spec.kind = ScenarioKind::DistinctDatasets;
    CHECK_THROWS_AS(make_scenario(spec), ValidationError);
    MixtureSpec second = spec.first;
    second.means = lattice_means(10, 6, 4.0, 99);
    spec.second = second;
    const auto sc = make_scenario(spec);
    std::set<int> l0(sc.sides[0].train.labels.begin(), sc.sides[0].train.labels.end());
    std::set<int> l1(sc.sides[1].train.labels.begin(), sc.sides[1].train.labels.end());
    CHECK(l0.size() == 10);
    CHECK(l1.size() == 10);
    CHECK(sc.probe.size() == 200);
}

TEST_CASE("probe size validation") {
    CHECK_THROWS_AS(make_scenario(label_split(201)), ValidationError);
    CHECK_THROWS_AS(make_scenario(label_split(10000)), ValidationError);
}
