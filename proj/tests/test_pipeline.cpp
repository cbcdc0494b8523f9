#include "doctest.h"

#include <filesystem>

#include "coin/errors.hpp"
#include "coin/io.hpp"
#include "coin/pipeline.hpp"

using namespace coin;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny(const std::string& dir) {
    ExperimentConfig c;
    c.name = "tiny";
    c.num_classes = 4;
    c.input_dim = 3;
    c.samples_per_class = 30;
    c.hidden = {6};
    c.train.epochs = 3;
    c.probe_size = 16;
    c.lambda_grid = {1e-3, 1.0};
    c.alpha_grid = {0.25, 0.5};
    c.distill.epochs = 4;
    c.ablate_p = {8, 16};
    c.distill_curve_p = 8;
    c.seeds = {0, 1};
    c.simulator = SimulatorConfig{{0.05, 0.05}, 2000.0};
    c.output_dir = (fs::temp_directory_path() / dir).string();
    fs::remove_all(c.output_dir);
    return c;
}

void code_all(const ExperimentConfig& c) {
    for (auto m : c.methods) cmd_code(c, m);
}

}  // namespace

TEST_CASE("config json round-trip and validation") {
    const auto c = tiny("coin_pipe_cfg");
    const auto back = ExperimentConfig::from_json(c.to_json());
    CHECK(back.to_json() == c.to_json());
    CHECK(back.hash() == c.hash());

    auto other = c;
    other.seeds = {7};
    other.output_dir = "elsewhere";
    CHECK(other.hash() == c.hash());
    other.probe_size = 32;
    CHECK(other.hash() != c.hash());

    auto j = c.to_json();
    j["methods"] = nlohmann::json::array();
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ValidationError);
    j = c.to_json();
    j["seeds"] = nlohmann::json::array();
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ValidationError);
    j = c.to_json();
    j["lambda_grid"] = nlohmann::json::array();
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ValidationError);
    j = c.to_json();
    j["bogus"] = 1;
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ValidationError);
    j = c.to_json();
    j["methods"] = {"coin", "regmean"};
    CHECK_THROWS_AS(ExperimentConfig::from_json(j), ValidationError);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), MissingArtifact);
}

TEST_CASE("pipeline end to end") {
    const auto c = tiny("coin_pipe_e2e");
    const fs::path out = c.output_dir;

    CHECK_THROWS_AS(cmd_code(c, CodingMethod::Coin), MissingArtifact);
    cmd_train_experts(c);
    const std::string expert_bytes = read_file(paths::expert(out, 0, 1));
    cmd_train_experts(c);
    CHECK(read_file(paths::expert(out, 0, 1)) == expert_bytes);
    CHECK(load_checkpoint_meta(paths::expert(out, 0, 1)).contains("test_accuracy"));

    CHECK_THROWS_AS(cmd_evaluate(c), MissingArtifact);
    code_all(c);
    const std::string coin_bytes = read_file(paths::coded(out, 1, CodingMethod::Coin));
    cmd_code(c, CodingMethod::Coin);
    CHECK(read_file(paths::coded(out, 1, CodingMethod::Coin)) == coin_bytes);
    const auto meta = load_checkpoint_meta(paths::coded(out, 1, CodingMethod::Coin));
    CHECK(meta.contains("lambda"));
    CHECK(meta["config_hash"] == c.hash());
    CHECK(load_checkpoint_meta(paths::coded(out, 1, CodingMethod::TaskArithmetic)).contains("alpha"));

    const auto reports = cmd_evaluate(c);
    CHECK(reports.size() == c.methods.size() * c.seeds.size());
    const std::string once = read_file(paths::nda_csv(out));
    cmd_evaluate(c);
    const std::string twice = read_file(paths::nda_csv(out));
    const auto body = once.substr(once.find('\n') + 1);
    CHECK(twice == once + body);
    // methods x seeds x (N + 1) rows plus the header.
    CHECK(std::count(once.begin(), once.end(), '\n') == 1 + 4 * 2 * 3);

    SUBCASE("ablation") {
        const auto ab = cmd_ablate_p(c, {});
        CHECK(ab.size() == 4 * 2 * 2);
        CHECK(ab.front().probe_size == 8);
        CHECK_THROWS_AS(cmd_ablate_p(c, {100000}), ValidationError);
        // A single P equal to the config P reproduces evaluate.
        const auto one = cmd_ablate_p(c, {c.probe_size});
        for (std::size_t k = 0; k < one.size(); ++k) CHECK(one[k].average() == reports[k].average());
    }
    SUBCASE("distill curve starts at the vanilla init") {
        const auto pts = cmd_distill_curve(c);
        CHECK(pts.size() == c.seeds.size() * static_cast<std::size_t>(c.distill.epochs + 1));
        CHECK(pts.front().epoch == 0);
        auto noc = c;
        noc.methods = {CodingMethod::Coin};
        CHECK_THROWS_AS(cmd_distill_curve(noc), ValidationError);
    }
    SUBCASE("simulate and report") {
        const auto sims = cmd_simulate(c);
        REQUIRE(sims.size() == 4);
        CHECK(sims[1].report.policy == Policy::CodedRecovery);
        CHECK(sims[1].offline_agreement.has_value());
        cmd_report(c);
        const std::string summary = read_file(paths::report_dir(out) / "summary.md");
        CHECK(summary.find("| Method | Expert 1 | Expert 2 | Avg. |") != std::string::npos);
        CHECK(fs::exists(paths::report_dir(out) / "latency_cdf.svg"));
        CHECK(fs::exists(paths::report_dir(out) / "nda_label-split.svg"));
        const std::string svg = read_file(paths::report_dir(out) / "nda_label-split.svg");
        cmd_report(c);
        CHECK(read_file(paths::report_dir(out) / "summary.md") == summary);
        CHECK(read_file(paths::report_dir(out) / "nda_label-split.svg") == svg);

        auto nosim = c;
        nosim.simulator.reset();
        CHECK_THROWS_AS(cmd_simulate(nosim), ValidationError);
    }
    SUBCASE("report rejects mixed configs") {
        append_csv(paths::nda_csv(out), nda_csv_header(), {"ffffffffffffffff,label-split,coin,0,16,avg,100,,,"});
        CHECK_THROWS_AS(cmd_report(c), ValidationError);
    }
    SUBCASE("artifacts from another config are rejected") {
        auto other = c;
        other.train.epochs = 4;
        CHECK_THROWS_AS(cmd_code(other, CodingMethod::Vanilla), ValidationError);
    }
    fs::remove_all(out);
}

TEST_CASE("uncoded simulation needs no coded checkpoint") {
    auto c = tiny("coin_pipe_sim");
    c.methods = {CodingMethod::Vanilla};
    cmd_train_experts(c);
    CHECK_THROWS_AS(cmd_simulate(c), MissingArtifact);

    auto u = tiny("coin_pipe_sim_uncoded");
    u.methods = {CodingMethod::Vanilla};
    u.simulator->policies = {Policy::Uncoded};
    cmd_train_experts(u);
    const auto sims = cmd_simulate(u);
    CHECK(sims.size() == 2);
    CHECK_FALSE(sims[0].offline_agreement.has_value());
    const auto again = cmd_simulate(u);
    CHECK(again[1].report.p99_latency == sims[1].report.p99_latency);
    CHECK(again[1].report.total_arrivals == sims[1].report.total_arrivals);
    fs::remove_all(c.output_dir);
    fs::remove_all(u.output_dir);
}

TEST_CASE("report with no results") {
    const auto c = tiny("coin_pipe_empty");
    CHECK_THROWS_AS(cmd_report(c), MissingArtifact);
    append_csv(paths::nda_csv(c.output_dir), nda_csv_header(), {});
    CHECK_THROWS_AS(cmd_report(c), ValidationError);
    fs::remove_all(c.output_dir);
}

TEST_CASE("vanilla coding of untrained experts returns the shared init") {
    auto c = tiny("coin_pipe_ident");
    c.train.epochs = 0;
    c.methods = {CodingMethod::Vanilla};
    cmd_train_experts(c);
    cmd_code(c, CodingMethod::Vanilla);
    CHECK(load_checkpoint(paths::coded(c.output_dir, 0, CodingMethod::Vanilla)).values() ==
          load_checkpoint(paths::expert(c.output_dir, 0, 0)).values());
    fs::remove_all(c.output_dir);
}

TEST_CASE("linear experts decode perfectly through the pipeline") {
    auto c = tiny("coin_pipe_linear");
    c.hidden = {};
    c.train.epochs = 100;
    c.methods = {CodingMethod::Coin, CodingMethod::Vanilla};
    c.lambda_grid = {0.0};
    c.seeds = {3};
    cmd_train_experts(c);
    code_all(c);
    for (const auto& r : cmd_evaluate(c))
        for (const auto& n : r.per_network) CHECK(n.nda == 100.0);
    fs::remove_all(c.output_dir);
}
