// Acceptance suite: one PASS/FAIL line per criterion, with the measured
// quantity, the pinned tolerance and the runtime against its budget.
//
//   coin_acceptance [--config <label_split.json>] [--work <dir>]

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include "coin/coder.hpp"
#include "coin/errors.hpp"
#include "coin/fisher.hpp"
#include "coin/io.hpp"
#include "coin/metrics.hpp"
#include "coin/pipeline.hpp"
#include "oracles.hpp"

using namespace coin;
using coin::testing::fd_gradient;
using coin::testing::fd_jacobian;
using coin::testing::max_rel_error;
using coin::testing::random_matrix;
using coin::testing::random_params;
using coin::testing::random_vector;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int id, const std::string& name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_budget = secs < budget_s;
    const bool pass = o.pass && in_budget;
    if (!pass) ++failures;
    std::printf("%s  criterion %2d  %s: %s%s  [%.2f s / %.0f s]\n", pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), in_budget ? "" : " (over runtime budget)", secs, budget_s);
    std::fflush(stdout);
}

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

CodingWeights random_weights(Rng& rng, int n) {
    std::vector<double> b;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) sum += b.emplace_back(0.05 + rng.uniform());
    double head = 0.0;
    for (int i = 0; i + 1 < n; ++i) head += (b[static_cast<std::size_t>(i)] /= sum);
    b.back() = 1.0 - head;
    return CodingWeights(b);
}

Outcome linear_exactness() {
    // Two linear classifiers on a label split; gradients depend only on x, so
    // both diagonal Fishers coincide and COIN reduces to the exact average.
    ExperimentConfig cfg;
    cfg.hidden = {};
    cfg.samples_per_class = 100;
    cfg.train.epochs = 40;
    const Scenario sc = build_scenario(cfg, 11, cfg.probe_size);
    const ExpertSet set = train_expert_set(cfg, sc, 11);
    const std::vector<DiagFisher> f{estimate_diag_fisher(set.experts[0], sc.probe),
                                    estimate_diag_fisher(set.experts[1], sc.probe)};
    const auto w = cfg.weights();
    const ParamVec coded = coin_code(set.experts, f, w, 0.0).params;
    double worst = 0.0;
    std::vector<double> ndas;
    for (std::size_t s = 0; s < sc.sides.size(); ++s) {
        const auto& test = sc.sides[s].test;
        const Matrix fc = forward_batch(coded, test.inputs);
        const Matrix comb = 0.5 * forward_batch(set.experts[0], test.inputs) + 0.5 * forward_batch(set.experts[1], test.inputs);
        worst = std::max(worst, (fc - comb).cwiseAbs().maxCoeff());
        ndas.push_back(nda(coded, set.experts, static_cast<int>(s), test, w).nda);
    }
    return {worst < 1e-9 && ndas[0] == 100.0 && ndas[1] == 100.0,
            "max |f_c - sum beta f_i| = " + sci(worst) + " (< 1e-9), NDA = " + sci(ndas[0]) + ", " + sci(ndas[1]) +
                " (== 100)"};
}

Outcome closed_form_minimizer() {
    Rng rng(2024);
    double worst_grad = 0.0, worst_gap = 0.0;
    int instances = 0;
    for (int n = 2; n <= 4; ++n) {
        for (double lambda : {0.0, 1e-3, 1.0}) {
            for (int rep = 0; rep < 2; ++rep, ++instances) {
                const Eigen::Index d = 20 + static_cast<Eigen::Index>(rng.index(281));
                std::vector<Vector> thetas, fishers;
                for (int i = 0; i < n; ++i) {
                    thetas.push_back(random_vector(rng, d));
                    Vector fi(d);
                    for (Eigen::Index j = 0; j < d; ++j) fi[j] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
                    fishers.push_back(fi);
                }
                if (lambda == 0.0)
                    for (Eigen::Index j = 0; j < d; ++j) fishers[0][j] = std::max(fishers[0][j], 0.05);
                const auto w = random_weights(rng, n);
                const Vector closed = coin_merge(thetas, fishers, w, lambda);
                worst_grad = std::max(worst_grad, g_gradient(closed, thetas, fishers, w, lambda).lpNorm<Eigen::Infinity>());

                Vector curvature = Vector::Zero(d);
                for (int i = 0; i < n; ++i) curvature += 2.0 * w.betabar(i) * (fishers[static_cast<std::size_t>(i)].array() + lambda).matrix();
                const double step = 1.0 / curvature.maxCoeff();
                Vector theta = Vector::Zero(d);
                for (int it = 0; it < 2'000'000; ++it) {
                    const Vector g = g_gradient(theta, thetas, fishers, w, lambda);
                    if (g.lpNorm<Eigen::Infinity>() < 1e-12) break;
                    theta -= step * g;
                }
                worst_gap = std::max(worst_gap, (theta - closed).lpNorm<Eigen::Infinity>());
            }
        }
    }
    return {worst_grad < 1e-8 && worst_gap < 1e-6, std::to_string(instances) + " instances, max |grad G| = " +
                                                       sci(worst_grad) + " (< 1e-8), max |theta_gd - theta_c| = " +
                                                       sci(worst_gap) + " (< 1e-6)"};
}

Outcome lambda_collapse() {
    Rng rng(7);
    const NetworkSpec spec{{6, 12, 4}, Activation::Tanh};
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 2 + static_cast<int>(rng.index(3));
        std::vector<ParamVec> m;
        std::vector<DiagFisher> f;
        for (int i = 0; i < n; ++i) {
            m.push_back(random_params(spec, rng));
            f.push_back(DiagFisher{spec, random_vector(rng, param_count(spec)).cwiseAbs2(), 1});
        }
        const auto w = random_weights(rng, n);
        const Vector van = vanilla_average(m, w).params.values();
        const Vector big = coin_code(m, f, w, 1e9).params.values();
        worst = std::max(worst, (big - van).lpNorm<Eigen::Infinity>() / van.lpNorm<Eigen::Infinity>());
    }
    return {worst < 1e-6, "20 instances, max relative distance to vanilla = " + sci(worst) + " (< 1e-6)"};
}

Outcome fisher_correctness() {
    Rng rng(4);
    const NetworkSpec spec{{4, 8, 3}, Activation::Tanh};
    const auto p = random_params(spec, rng);
    const ProbeSet probe{random_matrix(rng, 10, 4)};
    const DiagFisher diag = estimate_diag_fisher(p, probe);
    const double full_err = (full_empirical_fisher(p, probe).diagonal() - diag.values).cwiseAbs().maxCoeff();

    Vector fd_diag = Vector::Zero(p.size());
    double jac_err = 0.0;
    for (Eigen::Index r = 0; r < probe.size(); ++r) {
        const Vector x = probe.inputs.row(r).transpose();
        const Matrix fd = fd_jacobian(p, x);
        jac_err = std::max(jac_err, max_rel_error(jacobian(p, x), fd));
        fd_diag += fd.colwise().squaredNorm().transpose();
    }
    fd_diag /= static_cast<double>(probe.size());
    const double fd_err = max_rel_error(diag.values, fd_diag);
    return {full_err < 1e-12 && fd_err < 1e-5 && jac_err < 1e-5,
            "|diag - diag(full)| = " + sci(full_err) + " (< 1e-12), rel. error vs finite differences: Fisher " +
                sci(fd_err) + ", Jacobian " + sci(jac_err) + " (< 1e-5)"};
}

Outcome kl_taylor() {
    const NetworkSpec spec{{4, 10, 3}, Activation::Tanh};
    Rng rng(5);
    const auto anchor = random_params(spec, rng);
    const ProbeSet probe{random_matrix(rng, 20, 4)};
    const Matrix full = full_empirical_fisher(anchor, probe);
    std::string detail = "d = " + std::to_string(anchor.size());
    bool ok = anchor.size() <= 200;
    for (double eps : {1e-2, 1e-3}) {
        double ratio = 0.0;
        for (int t = 0; t < 10; ++t) {
            Vector v = random_vector(rng, anchor.size());
            v.normalize();
            const ParamVec theta(spec, anchor.values() + eps * v);
            ratio += empirical_output_divergence(theta, anchor, probe) / (0.5 * kl_quadratic(theta, anchor, full));
        }
        ratio /= 10.0;
        const double tol = eps == 1e-2 ? 0.10 : 0.01;
        ok = ok && std::abs(ratio - 1.0) < tol;
        detail += ", ratio at eps " + sci(eps) + " = 1 " + (ratio >= 1.0 ? "+ " : "- ") + sci(std::abs(ratio - 1.0)) + " (within " + sci(100 * tol) + "%)";
    }
    return {ok, detail};
}

Outcome decode_round_trip() {
    Rng rng(6);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + static_cast<int>(rng.index(5));
        const auto w = random_weights(rng, n);
        std::vector<Vector> outs;
        for (int i = 0; i < n; ++i) outs.push_back(random_vector(rng, 10, 5.0));
        const Vector coded = combine(outs, w);
        for (int i = 0; i < n; ++i) {
            const Vector& orig = outs[static_cast<std::size_t>(i)];
            worst = std::max(worst, (decode(i, coded, outs, w) - orig).lpNorm<Eigen::Infinity>() /
                                        orig.lpNorm<Eigen::Infinity>());
        }
    }
    return {worst < 1e-12, "1000 tuples, max relative error = " + sci(worst) + " (< 1e-12)"};
}

Outcome distill_gradient() {
    Rng rng(8);
    const NetworkSpec spec{{5, 7, 3}, Activation::Tanh};
    const std::vector<ParamVec> m{random_params(spec, rng), random_params(spec, rng), random_params(spec, rng)};
    const auto w = random_weights(rng, 3);
    const ProbeSet probe{random_matrix(rng, 12, 5)};
    const auto at = random_params(spec, rng);
    const Vector analytic = empirical_coding_loss_gradient(at, m, w, probe);
    const Vector fd = fd_gradient(
        [&](const Vector& v) { return empirical_coding_loss(ParamVec(spec, v), m, w, probe); }, at.values());
    const double err = max_rel_error(analytic, fd);
    return {err < 1e-5, "relative error vs central differences = " + sci(err) + " (< 1e-5)"};
}

double mean_avg(const std::vector<NdaReport>& reps, const std::string& method, Eigen::Index p = -1) {
    double s = 0.0;
    int n = 0;
    for (const auto& r : reps)
        if (r.method == method && (p < 0 || r.probe_size == p)) {
            s += r.average();
            ++n;
        }
    if (n == 0) throw ValidationError("no results for method " + method);
    return s / n;
}

}  // namespace

int main(int argc, char** argv) {
    fs::path config = fs::path(COIN_SOURCE_DIR) / "configs" / "label_split.json";
    fs::path work = fs::temp_directory_path() / "coin_acceptance";
    for (int i = 1; i + 1 < argc; i += 2) {
        const std::string a = argv[i];
        if (a == "--config") config = argv[i + 1];
        else if (a == "--work") work = argv[i + 1];
    }

    run(1, "linear exactness", 5, linear_exactness);
    run(2, "closed-form minimizer", 10, closed_form_minimizer);
    run(3, "lambda -> infinity collapse", 2, lambda_collapse);
    run(4, "Fisher correctness", 2, fisher_correctness);
    run(5, "KL Taylor fidelity", 10, kl_taylor);
    run(6, "decode round-trip", 1, decode_round_trip);
    run(7, "distillation loss gradient", 2, distill_gradient);

    ExperimentConfig cfg;
    try {
        cfg = load_config(config);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cannot load %s: %s\n", config.string().c_str(), e.what());
        return 1;
    }
    cfg.output_dir = (work / "label_split").string();
    fs::remove_all(cfg.output_dir);
    std::vector<NdaReport> main_reports;

    run(8, "label-split NDA trend", 300, [&]() -> Outcome {
        cmd_train_experts(cfg);
        double min_acc = 1.0;
        for (auto seed : cfg.seeds)
            for (int i = 0; i < cfg.num_experts(); ++i)
                min_acc = std::min(min_acc, load_checkpoint_meta(paths::expert(cfg.output_dir, seed, i))["test_accuracy"]
                                                .get<double>());
        for (auto m : cfg.methods) cmd_code(cfg, m);
        main_reports = cmd_evaluate(cfg);
        const double c = mean_avg(main_reports, "coin"), v = mean_avg(main_reports, "vanilla");
        return {c >= v && c >= 90.0 && min_acc >= 0.95,
                std::to_string(cfg.seeds.size()) + " seeds, P = " + std::to_string(cfg.probe_size) +
                    ", min expert test accuracy " + sci(100 * min_acc) + "% (>= 95), COIN " + sci(c) + " >= vanilla " +
                    sci(v) + ", COIN >= 90"};
    });

    run(9, "distillation overfitting and P ablation", 600, [&]() -> Outcome {
        const auto pts = cmd_distill_curve(cfg);
        double train_final = 0.0, test_final = 0.0;
        int n = 0;
        for (std::size_t k = 0; k < pts.size(); ++k)
            if (k + 1 == pts.size() || pts[k + 1].seed != pts[k].seed) {
                train_final += pts[k].train_decode_accuracy;
                test_final += pts[k].test_nda;
                ++n;
            }
        train_final /= n;
        test_final /= n;
        const std::vector<Eigen::Index> ps{32, 64, 128, 256};
        const auto ab = cmd_ablate_p(cfg, ps);
        double lo = 1e300, hi = -1e300;
        std::string per_p;
        for (auto p : ps) {
            const double v = mean_avg(ab, "coin", p);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            per_p += (per_p.empty() ? "" : "/") + sci(v);
        }
        return {train_final > test_final && hi - lo <= 5.0,
                "(a) P = " + std::to_string(cfg.distill_curve_p) + " final train decode " + sci(train_final) +
                    " > test NDA " + sci(test_final) + "; (b) COIN avg NDA at P = 32/64/128/256: " + per_p +
                    ", range " + sci(hi - lo) + " (<= 5)"};
    });

    run(10, "coded serving under stragglers", 60, [&]() -> Outcome {
        if (!cfg.simulator) throw ValidationError("config has no simulator section");
        auto sim_cfg = cfg;
        sim_cfg.seeds = {cfg.seeds.front()};
        const auto outs = cmd_simulate(sim_cfg);
        const SimOutcome* unc = nullptr;
        const SimOutcome* cod = nullptr;
        for (const auto& o : outs) (o.report.policy == Policy::Uncoded ? unc : cod) = &o;
        if (!unc || !cod || !cod->report.agreement_rate || !cod->offline_agreement)
            throw ValidationError("simulation did not produce both policies");
        const double gap = 100.0 * std::abs(*cod->report.agreement_rate - *cod->offline_agreement);
        const bool ok = cod->report.p99_latency < unc->report.p99_latency && gap <= 2.0 &&
                        cod->report.agreement_samples >= 5000;
        return {ok, "p_s = " + sci(cfg.simulator->straggler_probability) + ", m = " +
                        sci(cfg.simulator->straggler_slowdown) + ": p99 coded " + sci(cod->report.p99_latency) +
                        " < uncoded " + sci(unc->report.p99_latency) + "; agreement " +
                        sci(100 * *cod->report.agreement_rate) + "% vs offline " + sci(100 * *cod->offline_agreement) +
                        "% (gap " + sci(gap) + " <= 2 points) over " + std::to_string(cod->report.agreement_samples) +
                        " queries (>= 5000)"};
    });

    try {
        cmd_report(cfg);
        std::printf("\n%s", read_file(paths::report_dir(cfg.output_dir) / "summary.md").c_str());
    } catch (const std::exception& e) {
        std::printf("\nreport failed: %s\n", e.what());
        ++failures;
    }
    std::printf("\n%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
