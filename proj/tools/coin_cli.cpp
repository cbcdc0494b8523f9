// coin: command-line driver for the experiment pipeline.
//
// Exit codes: 0 success, 1 validation error, 2 missing artifact.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "coin/errors.hpp"
#include "coin/pipeline.hpp"

namespace {

struct Common {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", c.out, "output directory, overrides the config");
    cmd->add_option("--seed", c.seed, "run a single seed, overrides the config seed list");
}

coin::ExperimentConfig resolve(const Common& c) {
    coin::ExperimentConfig cfg = coin::load_config(c.config);
    if (!c.out.empty()) cfg.output_dir = c.out;
    if (c.seed) cfg.seeds = {*c.seed};
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Erasure-coded neural network experiments"};
    app.require_subcommand(1);

    Common train_c, code_c, eval_c, ablate_c, curve_c, sim_c, report_c;
    std::string method;
    std::vector<long> p_list;

    auto* train = app.add_subcommand("train-experts", "train the expert networks");
    add_common(train, train_c);
    auto* code = app.add_subcommand("code", "build a coded network from the experts");
    add_common(code, code_c);
    code->add_option("--method", method, "coding method")
        ->required()
        ->check(CLI::IsMember({"coin", "vanilla", "task-arithmetic", "distill"}));
    auto* eval = app.add_subcommand("evaluate", "append NDA rows for every configured method");
    add_common(eval, eval_c);
    auto* ablate = app.add_subcommand("ablate-p", "NDA as a function of probe size");
    add_common(ablate, ablate_c);
    ablate->add_option("--p-list", p_list, "probe sizes, overrides the config");
    auto* curve = app.add_subcommand("distill-curve", "per-epoch train and test decoding of distillation");
    add_common(curve, curve_c);
    auto* sim = app.add_subcommand("simulate", "serving simulation with and without the coded server");
    add_common(sim, sim_c);
    auto* report = app.add_subcommand("report", "render tables and plots from results");
    add_common(report, report_c);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (*train) {
            coin::cmd_train_experts(resolve(train_c));
        } else if (*code) {
            coin::cmd_code(resolve(code_c), coin::coding_method_from_string(method));
        } else if (*eval) {
            for (const auto& r : coin::cmd_evaluate(resolve(eval_c)))
                std::printf("%-16s seed %-4llu avg NDA %.2f\n", r.method.c_str(),
                            static_cast<unsigned long long>(r.seed), r.average());
        } else if (*ablate) {
            std::vector<Eigen::Index> ps(p_list.begin(), p_list.end());
            for (const auto& r : coin::cmd_ablate_p(resolve(ablate_c), ps))
                std::printf("%-16s seed %-4llu P %-5ld avg NDA %.2f\n", r.method.c_str(),
                            static_cast<unsigned long long>(r.seed), static_cast<long>(r.probe_size), r.average());
        } else if (*curve) {
            const auto pts = coin::cmd_distill_curve(resolve(curve_c));
            for (const auto& p : pts)
                if (p.epoch == 0 || &p == &pts.back() || (&p + 1)->seed != p.seed)
                    std::printf("seed %-4llu epoch %-5d train decode %.2f  test NDA %.2f\n",
                                static_cast<unsigned long long>(p.seed), p.epoch, p.train_decode_accuracy, p.test_nda);
        } else if (*sim) {
            for (const auto& o : coin::cmd_simulate(resolve(sim_c)))
                std::printf("seed %-4llu %-15s completed %zu/%zu  p50 %.3f  p99 %.3f\n",
                            static_cast<unsigned long long>(o.seed), std::string(coin::to_string(o.report.policy)).c_str(),
                            o.report.completed, o.report.total_arrivals, o.report.p50_latency, o.report.p99_latency);
        } else if (*report) {
            const auto cfg = resolve(report_c);
            coin::cmd_report(cfg);
            std::printf("wrote %s\n", coin::paths::report_dir(cfg.output_dir).string().c_str());
        }
    } catch (const coin::MissingArtifact& e) {
        std::fprintf(stderr, "missing artifact: %s\n", e.what());
        return 2;
    } catch (const coin::ValidationError& e) {
        std::fprintf(stderr, "invalid: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
