#include "coin/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "coin/errors.hpp"
#include "coin/fisher.hpp"
#include "coin/io.hpp"
#include "coin/metrics.hpp"
#include "coin/rng.hpp"

namespace coin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view to_string(ServiceDistribution d) {
    return d == ServiceDistribution::Exponential ? "exponential" : "deterministic";
}

ServiceDistribution distribution_from_string(std::string_view s) {
    if (s == "exponential") return ServiceDistribution::Exponential;
    if (s == "deterministic") return ServiceDistribution::Deterministic;
    throw ValidationError("unknown service distribution '" + std::string(s) + "'");
}

// Reads a key if present, rejecting type mismatches as validation errors.
template <typename T>
void read(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->template get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("config field '") + key + "': " + e.what());
    }
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    if (!j.is_object()) throw ValidationError(where + " must be an object");
    for (const auto& [k, v] : j.items()) {
        if (std::none_of(known.begin(), known.end(), [&](const char* n) { return k == n; }))
            throw ValidationError("unknown config field '" + where + "." + k + "'");
    }
}

json train_to_json(const TrainConfig& t) {
    return {{"learning_rate", t.learning_rate},
            {"epochs", t.epochs},
            {"batch_size", t.batch_size},
            {"weight_decay", t.weight_decay}};
}

void train_from_json(const json& j, TrainConfig& t, const std::string& where, int* pretrain = nullptr) {
    if (pretrain)
        reject_unknown(j, {"learning_rate", "epochs", "batch_size", "weight_decay", "base_pretrain_epochs"}, where);
    else
        reject_unknown(j, {"learning_rate", "epochs", "batch_size", "weight_decay"}, where);
    read(j, "learning_rate", t.learning_rate);
    read(j, "epochs", t.epochs);
    read(j, "batch_size", t.batch_size);
    read(j, "weight_decay", t.weight_decay);
    if (pretrain) read(j, "base_pretrain_epochs", *pretrain);
}

bool has_method(const ExperimentConfig& cfg, CodingMethod m) {
    return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end();
}

std::string str(const fs::path& p) { return p.string(); }

}  // namespace

NetworkSpec ExperimentConfig::network() const {
    NetworkSpec spec;
    spec.layer_dims.push_back(input_dim);
    spec.layer_dims.insert(spec.layer_dims.end(), hidden.begin(), hidden.end());
    spec.layer_dims.push_back(num_classes);
    spec.hidden_activation = activation;
    return spec;
}

CodingWeights ExperimentConfig::weights() const {
    return coding_weights.empty() ? CodingWeights::uniform(num_experts()) : CodingWeights(coding_weights);
}

void ExperimentConfig::validate() const {
    if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
    if (input_dim < 1) throw ValidationError("input_dim must be >= 1");
    if (!(separation > 0.0) || !(sigma > 0.0)) throw ValidationError("separation and sigma must be positive");
    if (samples_per_class < 2) throw ValidationError("samples_per_class must be >= 2");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ValidationError("train_fraction must be in (0, 1)");
    network().validate();
    train.validate();
    if (base_pretrain_epochs < 0) throw ValidationError("base_pretrain_epochs must be >= 0");
    if (methods.empty()) throw ValidationError("method list is empty");
    if (has_method(*this, CodingMethod::Coin) && lambda_grid.empty())
        throw ValidationError("lambda grid is empty but coin is selected");
    if (has_method(*this, CodingMethod::TaskArithmetic) && alpha_grid.empty())
        throw ValidationError("alpha grid is empty but task-arithmetic is selected");
    for (double l : lambda_grid)
        if (!(l >= 0.0) || !std::isfinite(l)) throw ValidationError("lambda grid values must be finite and >= 0");
    for (double a : alpha_grid)
        if (!std::isfinite(a)) throw ValidationError("alpha grid values must be finite");
    if (!coding_weights.empty() && static_cast<int>(coding_weights.size()) != num_experts())
        throw ValidationError("coding_weights needs one entry per expert");
    (void)weights();
    if (probe_size < 2 || probe_size % 2 != 0) throw ValidationError("probe_size must be even and >= 2");
    distill.validate();
    for (auto p : ablate_p)
        if (p < 2 || p % 2 != 0) throw ValidationError("ablate_p values must be even and >= 2");
    if (distill_curve_p < 2 || distill_curve_p % 2 != 0) throw ValidationError("distill_curve_p must be even and >= 2");
    if (seeds.empty()) throw ValidationError("seed list is empty");
    if (simulator) {
        const auto& s = *simulator;
        if (static_cast<int>(s.arrival_rates.size()) != num_experts())
            throw ValidationError("simulator needs one arrival rate per expert");
        for (double r : s.arrival_rates)
            if (!(r >= 0.0)) throw ValidationError("arrival rates must be >= 0");
        if (!(s.horizon > 0.0)) throw ValidationError("simulator horizon must be positive");
        ServerSpec{0, s.service_rate, s.straggler_probability, s.straggler_slowdown, s.distribution}.validate();
        ServerSpec{kCodedServer, s.coded_service_rate, s.straggler_probability, s.straggler_slowdown, s.distribution}
            .validate();
        if (s.policies.empty()) throw ValidationError("simulator policy list is empty");
    }
}

json ExperimentConfig::to_json() const {
    json methods_j = json::array();
    for (auto m : methods) methods_j.push_back(std::string(coin::to_string(m)));
    json train_j = train_to_json(train);
    train_j["base_pretrain_epochs"] = base_pretrain_epochs;
    json j = {
        {"name", name},
        {"scenario",
         {{"kind", std::string(coin::to_string(scenario))},
          {"num_classes", num_classes},
          {"input_dim", input_dim},
          {"separation", separation},
          {"sigma", sigma},
          {"samples_per_class", samples_per_class},
          {"train_fraction", train_fraction},
          {"means_seed", means_seed}}},
        {"network", {{"hidden", hidden}, {"activation", std::string(coin::to_string(activation))}}},
        {"train", train_j},
        {"methods", methods_j},
        {"lambda_grid", lambda_grid},
        {"alpha_grid", alpha_grid},
        {"coding_weights", coding_weights},
        {"probe_size", probe_size},
        {"tune_on", tune_on_nda ? "nda" : "coding-loss"},
        {"distill", train_to_json(distill)},
        {"ablate_p", ablate_p},
        {"distill_curve_p", distill_curve_p},
        {"seeds", seeds},
        {"output_dir", output_dir},
    };
    if (simulator) {
        const auto& s = *simulator;
        json pol = json::array();
        for (auto p : s.policies) pol.push_back(std::string(coin::to_string(p)));
        j["simulator"] = {{"arrival_rates", s.arrival_rates},
                          {"horizon", s.horizon},
                          {"service_rate", s.service_rate},
                          {"coded_service_rate", s.coded_service_rate},
                          {"straggler_probability", s.straggler_probability},
                          {"straggler_slowdown", s.straggler_slowdown},
                          {"distribution", std::string(to_string(s.distribution))},
                          {"policies", pol},
                          {"coded_method", std::string(coin::to_string(s.coded_method))},
                          {"dump_records", s.dump_records}};
    }
    return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
    ExperimentConfig c;
    reject_unknown(j,
                   {"name", "scenario", "network", "train", "methods", "lambda_grid", "alpha_grid", "coding_weights",
                    "probe_size", "tune_on", "distill", "ablate_p", "distill_curve_p", "seeds", "simulator",
                    "output_dir"},
                   "config");
    read(j, "name", c.name);
    if (j.contains("scenario")) {
        const json& s = j["scenario"];
        reject_unknown(s,
                       {"kind", "num_classes", "input_dim", "separation", "sigma", "samples_per_class",
                        "train_fraction", "means_seed"},
                       "scenario");
        std::string kind(coin::to_string(c.scenario));
        read(s, "kind", kind);
        c.scenario = scenario_kind_from_string(kind);
        read(s, "num_classes", c.num_classes);
        read(s, "input_dim", c.input_dim);
        read(s, "separation", c.separation);
        read(s, "sigma", c.sigma);
        read(s, "samples_per_class", c.samples_per_class);
        read(s, "train_fraction", c.train_fraction);
        read(s, "means_seed", c.means_seed);
    }
    if (j.contains("network")) {
        const json& n = j["network"];
        reject_unknown(n, {"hidden", "activation"}, "network");
        read(n, "hidden", c.hidden);
        std::string act(coin::to_string(c.activation));
        read(n, "activation", act);
        c.activation = activation_from_string(act);
    }
    if (j.contains("train")) train_from_json(j["train"], c.train, "train", &c.base_pretrain_epochs);
    if (j.contains("methods")) {
        std::vector<std::string> names;
        read(j, "methods", names);
        c.methods.clear();
        for (const auto& n : names) c.methods.push_back(coding_method_from_string(n));
    }
    read(j, "lambda_grid", c.lambda_grid);
    read(j, "alpha_grid", c.alpha_grid);
    read(j, "coding_weights", c.coding_weights);
    read(j, "probe_size", c.probe_size);
    std::string tune = c.tune_on_nda ? "nda" : "coding-loss";
    read(j, "tune_on", tune);
    if (tune != "nda" && tune != "coding-loss") throw ValidationError("tune_on must be 'coding-loss' or 'nda'");
    c.tune_on_nda = tune == "nda";
    if (j.contains("distill")) train_from_json(j["distill"], c.distill, "distill");
    read(j, "ablate_p", c.ablate_p);
    read(j, "distill_curve_p", c.distill_curve_p);
    read(j, "seeds", c.seeds);
    read(j, "output_dir", c.output_dir);
    if (j.contains("simulator")) {
        const json& s = j["simulator"];
        reject_unknown(s,
                       {"arrival_rates", "horizon", "service_rate", "coded_service_rate", "straggler_probability",
                        "straggler_slowdown", "distribution", "policies", "coded_method", "dump_records"},
                       "simulator");
        SimulatorConfig sim;
        read(s, "arrival_rates", sim.arrival_rates);
        read(s, "horizon", sim.horizon);
        read(s, "service_rate", sim.service_rate);
        sim.coded_service_rate = sim.service_rate;
        read(s, "coded_service_rate", sim.coded_service_rate);
        read(s, "straggler_probability", sim.straggler_probability);
        read(s, "straggler_slowdown", sim.straggler_slowdown);
        std::string dist(to_string(sim.distribution));
        read(s, "distribution", dist);
        sim.distribution = distribution_from_string(dist);
        if (s.contains("policies")) {
            std::vector<std::string> names;
            read(s, "policies", names);
            sim.policies.clear();
            for (const auto& n : names) sim.policies.push_back(policy_from_string(n));
        }
        std::string cm(coin::to_string(sim.coded_method));
        read(s, "coded_method", cm);
        sim.coded_method = coding_method_from_string(cm);
        read(s, "dump_records", sim.dump_records);
        c.simulator = sim;
    }
    c.validate();
    return c;
}

std::string ExperimentConfig::hash() const {
    json j = to_json();
    j.erase("seeds");
    j.erase("output_dir");
    return content_hash(j.dump());
}

ExperimentConfig load_config(const fs::path& path) {
    const std::string text = read_file(path);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return ExperimentConfig::from_json(j);
}

Scenario build_scenario(const ExperimentConfig& cfg, std::uint64_t seed, Eigen::Index probe_size) {
    ScenarioSpec spec;
    spec.kind = cfg.scenario;
    spec.first.means = lattice_means(cfg.num_classes, cfg.input_dim, cfg.separation, cfg.means_seed);
    spec.first.sigma = cfg.sigma;
    spec.first.samples_per_class = cfg.samples_per_class;
    if (cfg.scenario == ScenarioKind::DistinctDatasets) {
        MixtureSpec second = spec.first;
        second.means = lattice_means(cfg.num_classes, cfg.input_dim, cfg.separation, mix_seed(cfg.means_seed, 1));
        spec.second = second;
    }
    spec.seed = mix_seed(seed, 1);
    spec.train_fraction = cfg.train_fraction;
    spec.probe_size = probe_size;
    return make_scenario(spec);
}

ExpertSet train_expert_set(const ExperimentConfig& cfg, const Scenario& sc, std::uint64_t seed) {
    const NetworkSpec spec = cfg.network();
    ExpertSet set{init_params(spec, mix_seed(seed, 2)), {}};
    if (cfg.base_pretrain_epochs > 0) {
        LabeledDataset all;
        all.num_classes = sc.num_classes;
        Eigen::Index rows = 0;
        for (const auto& s : sc.sides) rows += s.train.size();
        all.inputs.resize(rows, spec.input_dim());
        Eigen::Index r = 0;
        for (const auto& s : sc.sides) {
            all.inputs.middleRows(r, s.train.size()) = s.train.inputs;
            r += s.train.size();
            all.labels.insert(all.labels.end(), s.train.labels.begin(), s.train.labels.end());
        }
        TrainConfig t = cfg.train;
        t.epochs = cfg.base_pretrain_epochs;
        t.rng_seed = mix_seed(seed, 3);
        set.base = train(set.base, all, t);
    }
    for (std::size_t i = 0; i < sc.sides.size(); ++i) {
        TrainConfig t = cfg.train;
        t.rng_seed = mix_seed(seed, 10 + i);
        set.experts.push_back(train(set.base, sc.sides[i].train, t));
    }
    return set;
}

namespace {

// Per-side labeled views of the probe, for NDA-mode tuning.
std::vector<LabeledDataset> probe_validation_sets(const Scenario& sc) {
    std::vector<LabeledDataset> out(sc.sides.size());
    for (std::size_t s = 0; s < sc.sides.size(); ++s) {
        out[s].num_classes = sc.num_classes;
        out[s].split = Split::Train;
        std::vector<Eigen::Index> rows;
        for (Eigen::Index r = 0; r < sc.probe.size(); ++r)
            if (sc.probe_side[static_cast<std::size_t>(r)] == static_cast<int>(s)) rows.push_back(r);
        out[s].inputs.resize(static_cast<Eigen::Index>(rows.size()), sc.probe.inputs.cols());
        for (std::size_t k = 0; k < rows.size(); ++k) {
            out[s].inputs.row(static_cast<Eigen::Index>(k)) = sc.probe.inputs.row(rows[k]);
            out[s].labels.push_back(sc.probe_labels[static_cast<std::size_t>(rows[k])]);
        }
    }
    return out;
}

TrainConfig distill_config(const ExperimentConfig& cfg, std::uint64_t seed) {
    TrainConfig t = cfg.distill;
    t.loss = Loss::SquaredError;
    t.rng_seed = mix_seed(seed, 20);
    return t;
}

std::vector<LabeledDataset> test_sets(const Scenario& sc) {
    std::vector<LabeledDataset> out;
    for (const auto& s : sc.sides) out.push_back(s.test);
    return out;
}

}  // namespace

CodedModel code_experts(const ExperimentConfig& cfg, const Scenario& sc, const ExpertSet& set, CodingMethod method,
                        std::uint64_t seed) {
    const CodingWeights w = cfg.weights();
    std::vector<LabeledDataset> validation;
    if (cfg.tune_on_nda) validation = probe_validation_sets(sc);
    const TuneCriterion criterion{validation};
    switch (method) {
        case CodingMethod::Coin: {
            std::vector<DiagFisher> fishers;
            for (const auto& e : set.experts) fishers.push_back(estimate_diag_fisher(e, sc.probe));
            return tune_lambda(set.experts, fishers, w, sc.probe, cfg.lambda_grid, criterion).model;
        }
        case CodingMethod::Vanilla: {
            CodedModel m = vanilla_average(set.experts, w);
            m.probe_hash = hash_matrix(sc.probe.inputs);
            return m;
        }
        case CodingMethod::TaskArithmetic:
            return tune_alpha(set.base, set.experts, w, sc.probe, cfg.alpha_grid, criterion).model;
        case CodingMethod::Distilled: {
            const ParamVec init = vanilla_average(set.experts, w).params;
            return distill(set.experts, w, sc.probe, init, distill_config(cfg, seed));
        }
    }
    throw ValidationError("unknown coding method");
}

namespace paths {
fs::path expert(const fs::path& out, std::uint64_t seed, int i) {
    return out / "experts" / ("seed_" + std::to_string(seed)) / ("expert_" + std::to_string(i) + ".json");
}
fs::path base(const fs::path& out, std::uint64_t seed) {
    return out / "experts" / ("seed_" + std::to_string(seed)) / "base.json";
}
fs::path coded(const fs::path& out, std::uint64_t seed, CodingMethod m) {
    return out / "coded" / ("seed_" + std::to_string(seed)) / (std::string(to_string(m)) + ".json");
}
fs::path nda_csv(const fs::path& out) { return out / "results" / "nda.csv"; }
fs::path ablate_csv(const fs::path& out) { return out / "results" / "ablate_p.csv"; }
fs::path distill_csv(const fs::path& out) { return out / "results" / "distill_curve.csv"; }
fs::path latency_csv(const fs::path& out) { return out / "sim" / "latency.csv"; }
fs::path report_dir(const fs::path& out) { return out / "report"; }
}  // namespace paths

void append_csv(const fs::path& path, const std::string& header, const std::vector<std::string>& rows) {
    std::string text;
    if (fs::exists(path)) {
        text = read_file(path);
        const auto nl = text.find('\n');
        if (text.substr(0, nl) != header) throw ValidationError(path.string() + " has a different header");
        if (!text.empty() && text.back() != '\n') text += '\n';
    } else {
        text = header + "\n";
    }
    for (const auto& r : rows) text += r + "\n";
    write_atomic(path, text);
}

namespace {

void check_hash(const json& meta, const ExperimentConfig& cfg, const fs::path& path) {
    if (!meta.contains("config_hash") || meta["config_hash"] != cfg.hash())
        throw ValidationError(path.string() + " was produced by a different config");
}

ParamVec load_tagged(const ExperimentConfig& cfg, const fs::path& path) {
    ParamVec p = load_checkpoint(path);
    check_hash(load_checkpoint_meta(path), cfg, path);
    if (!(p.spec() == cfg.network())) throw DimensionMismatch(path.string() + " does not match the config network");
    return p;
}

fs::path out_dir(const ExperimentConfig& cfg) { return fs::path(cfg.output_dir); }

}  // namespace

ExpertSet load_expert_set(const ExperimentConfig& cfg, std::uint64_t seed) {
    const fs::path out = out_dir(cfg);
    ExpertSet set{load_tagged(cfg, paths::base(out, seed)), {}};
    for (int i = 0; i < cfg.num_experts(); ++i) set.experts.push_back(load_tagged(cfg, paths::expert(out, seed, i)));
    return set;
}

void cmd_train_experts(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path out = out_dir(cfg);
    const std::string h = cfg.hash();
    for (auto seed : cfg.seeds) {
        const Scenario sc = build_scenario(cfg, seed, cfg.probe_size);
        const ExpertSet set = train_expert_set(cfg, sc, seed);
        save_checkpoint(paths::base(out, seed), set.base, {{"config_hash", h}, {"seed", seed}, {"role", "base"}});
        json summary = {{"config_hash", h}, {"seed", seed}, {"experts", json::array()}};
        for (int i = 0; i < cfg.num_experts(); ++i) {
            const auto& side = sc.sides[static_cast<std::size_t>(i)];
            const double train_acc = accuracy(set.experts[static_cast<std::size_t>(i)], side.train);
            const double test_acc = accuracy(set.experts[static_cast<std::size_t>(i)], side.test);
            const json meta = {{"config_hash", h},       {"seed", seed},         {"role", "expert"},
                               {"index", i},             {"train_accuracy", train_acc}, {"test_accuracy", test_acc}};
            save_checkpoint(paths::expert(out, seed, i), set.experts[static_cast<std::size_t>(i)], meta);
            summary["experts"].push_back({{"index", i}, {"train_accuracy", train_acc}, {"test_accuracy", test_acc}});
            const fs::path data = out / "data" / ("seed_" + std::to_string(seed));
            write_atomic(data / ("side_" + std::to_string(i) + "_train.csv"), dataset_to_csv(side.train));
            write_atomic(data / ("side_" + std::to_string(i) + "_test.csv"), dataset_to_csv(side.test));
        }
        write_atomic(out / "data" / ("seed_" + std::to_string(seed)) / "probe.csv",
                     probe_to_csv(sc.probe, sc.num_classes));
        write_atomic(out / "experts" / ("seed_" + std::to_string(seed)) / "summary.json", summary.dump(2) + "\n");
    }
}

void cmd_code(const ExperimentConfig& cfg, CodingMethod method) {
    cfg.validate();
    const fs::path out = out_dir(cfg);
    const std::string h = cfg.hash();
    for (auto seed : cfg.seeds) {
        const ExpertSet set = load_expert_set(cfg, seed);
        const Scenario sc = build_scenario(cfg, seed, cfg.probe_size);
        const CodedModel m = code_experts(cfg, sc, set, method, seed);
        json meta = {{"config_hash", h},
                     {"seed", seed},
                     {"method", std::string(to_string(method))},
                     {"source_ids", m.source_ids},
                     {"probe_hash", m.probe_hash},
                     {"probe_size", sc.probe.size()},
                     {"coding_weights", cfg.weights().betas()}};
        if (m.lambda) meta["lambda"] = *m.lambda;
        if (m.alpha) meta["alpha"] = *m.alpha;
        if (m.train_config) meta["train_config"] = train_to_json(*m.train_config);
        save_checkpoint(paths::coded(out, seed, method), m.params, meta);
    }
}

std::vector<NdaReport> cmd_evaluate(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path out = out_dir(cfg);
    const std::string h = cfg.hash();
    std::vector<NdaReport> reports;
    std::vector<std::string> rows;
    for (auto seed : cfg.seeds) {
        const ExpertSet set = load_expert_set(cfg, seed);
        const Scenario sc = build_scenario(cfg, seed, cfg.probe_size);
        const auto tests = test_sets(sc);
        for (auto method : cfg.methods) {
            const ParamVec coded = load_tagged(cfg, paths::coded(out, seed, method));
            auto rep = nda_report(coded, set.experts, tests, cfg.weights(), std::string(to_string(method)),
                                  std::string(to_string(cfg.scenario)), seed, cfg.probe_size);
            for (auto& r : nda_csv_rows(rep, h)) rows.push_back(std::move(r));
            reports.push_back(std::move(rep));
        }
    }
    append_csv(paths::nda_csv(out), nda_csv_header(), rows);
    return reports;
}

std::vector<NdaReport> cmd_ablate_p(const ExperimentConfig& cfg, std::vector<Eigen::Index> p_list) {
    cfg.validate();
    if (p_list.empty()) p_list = cfg.ablate_p;
    if (p_list.empty()) throw ValidationError("P list is empty");
    const fs::path out = out_dir(cfg);
    const std::string h = cfg.hash();
    std::vector<NdaReport> reports;
    std::vector<std::string> rows;
    for (auto seed : cfg.seeds) {
        const ExpertSet set = load_expert_set(cfg, seed);
        for (auto p : p_list) {
            const Scenario sc = build_scenario(cfg, seed, p);
            const auto tests = test_sets(sc);
            for (auto method : cfg.methods) {
                const CodedModel m = code_experts(cfg, sc, set, method, seed);
                auto rep = nda_report(m.params, set.experts, tests, cfg.weights(), std::string(to_string(method)),
                                      std::string(to_string(cfg.scenario)), seed, p);
                for (auto& r : nda_csv_rows(rep, h)) rows.push_back(std::move(r));
                reports.push_back(std::move(rep));
            }
        }
    }
    append_csv(paths::ablate_csv(out), nda_csv_header(), rows);
    return reports;
}

std::vector<DistillCurvePoint> cmd_distill_curve(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!has_method(cfg, CodingMethod::Distilled)) throw ValidationError("distill-curve needs the distill method");
    const fs::path out = out_dir(cfg);
    const std::string h = cfg.hash();
    const CodingWeights w = cfg.weights();
    std::vector<DistillCurvePoint> points;
    std::vector<std::string> rows;
    for (auto seed : cfg.seeds) {
        const ExpertSet set = load_expert_set(cfg, seed);
        const Scenario sc = build_scenario(cfg, seed, cfg.distill_curve_p);
        const auto tests = test_sets(sc);
        std::vector<Matrix> probe_out;
        for (const auto& e : set.experts) probe_out.push_back(forward_batch(e, sc.probe.inputs));

        auto measure = [&](int epoch, const ParamVec& coded) {
            DistillCurvePoint pt{seed, epoch, 0.0, 0.0, 0.0};
            const Matrix coded_out = forward_batch(coded, sc.probe.inputs);
            pt.probe_coding_loss = empirical_coding_loss(coded_out, probe_out, w);
            Eigen::Index correct = 0;
            for (Eigen::Index r = 0; r < sc.probe.size(); ++r) {
                std::vector<Vector> outs;
                for (const auto& m : probe_out) outs.push_back(m.row(r).transpose());
                const int side = sc.probe_side[static_cast<std::size_t>(r)];
                const Vector dec = decode(side, coded_out.row(r).transpose(), outs, w);
                if (argmax(dec) == sc.probe_labels[static_cast<std::size_t>(r)]) ++correct;
            }
            pt.train_decode_accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(sc.probe.size());
            pt.test_nda = nda_report(coded, set.experts, tests, w, "distill", "", seed, sc.probe.size()).average();
            points.push_back(pt);
            rows.push_back(h + "," + std::to_string(seed) + "," + std::to_string(sc.probe.size()) + "," +
                           std::to_string(epoch) + "," + format_double(pt.probe_coding_loss) + "," +
                           format_double(pt.train_decode_accuracy) + "," + format_double(pt.test_nda));
        };
        const ParamVec init = vanilla_average(set.experts, w).params;
        measure(0, init);
        distill(set.experts, w, sc.probe, init, distill_config(cfg, seed), measure);
    }
    append_csv(paths::distill_csv(out), "config_hash,seed,probe_size,epoch,probe_coding_loss,train_decode_accuracy,test_nda",
               rows);
    return points;
}

std::vector<SimOutcome> cmd_simulate(const ExperimentConfig& cfg) {
    cfg.validate();
    if (!cfg.simulator) throw ValidationError("config has no simulator section");
    const SimulatorConfig& sim = *cfg.simulator;
    const fs::path out = out_dir(cfg);
    const std::string h = cfg.hash();
    const bool needs_coded =
        std::find(sim.policies.begin(), sim.policies.end(), Policy::CodedRecovery) != sim.policies.end();
    const CodingWeights w = cfg.weights();

    std::vector<SimOutcome> outcomes;
    std::vector<std::string> rows;
    for (auto seed : cfg.seeds) {
        const ExpertSet set = load_expert_set(cfg, seed);
        std::optional<ParamVec> coded;
        if (needs_coded) coded = load_tagged(cfg, paths::coded(out, seed, sim.coded_method));
        const Scenario sc = build_scenario(cfg, seed, cfg.probe_size);
        Eigen::Index rows_total = 0;
        for (const auto& s : sc.sides) rows_total += s.test.size();
        Matrix pool(rows_total, cfg.input_dim);
        Eigen::Index r = 0;
        for (const auto& s : sc.sides) {
            pool.middleRows(r, s.test.size()) = s.test.inputs;
            r += s.test.size();
        }

        std::vector<ServerSpec> servers;
        for (int i = 0; i < cfg.num_experts(); ++i)
            servers.push_back({i, sim.service_rate, sim.straggler_probability, sim.straggler_slowdown, sim.distribution});
        if (coded)
            servers.push_back({kCodedServer, sim.coded_service_rate, sim.straggler_probability, sim.straggler_slowdown,
                               sim.distribution});
        const TrafficSpec traffic{sim.arrival_rates, sim.horizon, {}};
        const SimModels models{set.experts, coded ? &*coded : nullptr, &w, &pool};
        std::optional<double> offline;
        if (coded) offline = offline_decode_agreement(models, sim.arrival_rates);

        for (auto policy : sim.policies) {
            const SimResult res = run_sim(servers, traffic, policy, models, mix_seed(seed, 30));
            const auto& rep = res.report;
            std::string row = h + "," + std::to_string(seed) + "," + std::string(to_string(policy)) + "," +
                              std::to_string(rep.total_arrivals) + "," + std::to_string(rep.completed) + ",";
            if (rep.completed > 0)
                row += format_double(rep.mean_latency) + "," + format_double(rep.p50_latency) + "," +
                       format_double(rep.p99_latency) + "," + format_double(rep.decoded_fraction) + ",";
            else
                row += ",,,,";
            row += (rep.agreement_rate ? format_double(*rep.agreement_rate) : std::string()) + "," +
                   std::to_string(rep.agreement_samples) + "," +
                   (offline && policy == Policy::CodedRecovery ? format_double(*offline) : std::string());
            rows.push_back(row);
            if (sim.dump_records) {
                std::istringstream in(records_csv(res.records));
                std::string line, text;
                bool first = true;
                while (std::getline(in, line)) {
                    text += (first ? "config_hash," : h + ",") + line + "\n";
                    first = false;
                }
                write_atomic(out / "sim" /
                                 ("records_seed_" + std::to_string(seed) + "_" + std::string(to_string(policy)) + ".csv"),
                             text);
            }
            outcomes.push_back({seed, rep, policy == Policy::CodedRecovery ? offline : std::nullopt});
        }
    }
    append_csv(paths::latency_csv(out),
               "config_hash,seed,policy,total_arrivals,completed,mean_latency,p50_latency,p99_latency,"
               "decoded_fraction,agreement_rate,agreement_samples,offline_agreement",
               rows);
    return outcomes;
}

// ---------------------------------------------------------------------------
// Report rendering.

namespace {

using Row = std::vector<std::string>;

struct Table {
    Row header;
    std::vector<Row> rows;

    std::size_t col(const std::string& name) const {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw ValidationError("results table lacks column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    }
};

Row split_csv(const std::string& line) {
    Row out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

// Reads a results table, dropping exact duplicate rows from reruns and
// rejecting rows from another config.
std::optional<Table> read_table(const fs::path& path, const std::string& hash) {
    if (!fs::exists(path)) return std::nullopt;
    std::istringstream in(read_file(path));
    Table t;
    std::string line;
    if (!std::getline(in, line)) return std::nullopt;
    t.header = split_csv(line);
    const std::size_t hc = t.col("config_hash");
    std::set<std::string> seen;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Row r = split_csv(line);
        if (r.size() != t.header.size()) throw ValidationError(path.string() + " has a malformed row");
        if (r[hc] != hash)
            throw ValidationError(path.string() + " mixes results from config " + r[hc] + " with config " + hash);
        if (seen.insert(line).second) t.rows.push_back(std::move(r));
    }
    return t;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::string fixed(double v, int digits = 2) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int method_rank(const std::string& m) {
    static const std::vector<std::string> order{"coin", "vanilla", "task-arithmetic", "distill"};
    auto it = std::find(order.begin(), order.end(), m);
    return static_cast<int>(it - order.begin());
}

std::vector<std::string> sorted_methods(std::set<std::string> ms) {
    std::vector<std::string> v(ms.begin(), ms.end());
    std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return method_rank(a) < method_rank(b); });
    return v;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

struct Series {
    std::string name;
    std::vector<double> x, y;
};

class Svg {
public:
    Svg(const std::string& title, const std::string& hash) {
        s_ << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
           << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        s_ << "<!-- config_hash " << hash << " -->\n";
        s_ << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        text(W / 2.0, 20, title, "middle", 14);
    }

    void axes(double x0, double x1, double y0, double y1, const std::string& xl, const std::string& yl, bool log_x,
              const std::vector<std::pair<double, std::string>>& xticks = {}) {
        x0_ = x0, x1_ = x1, y0_ = y0, y1_ = y1, log_x_ = log_x;
        line(L, B, R, B);
        line(L, B, L, T);
        for (int k = 0; k <= 4; ++k) {
            const double v = y0 + (y1 - y0) * k / 4.0;
            const double py = py_of(v);
            line(L - 4, py, L, py);
            text(L - 6, py + 4, fixed(v, std::abs(y1 - y0) < 2 ? 3 : 1), "end");
        }
        if (xticks.empty()) {
            for (int k = 0; k <= 4; ++k) {
                const double v = x0 + (x1 - x0) * k / 4.0;
                line(px_of(v), B, px_of(v), B + 4);
                text(px_of(v), B + 16, fixed(v, 1), "middle");
            }
        } else {
            for (const auto& [v, label] : xticks) {
                line(px_of(v), B, px_of(v), B + 4);
                text(px_of(v), B + 16, label, "middle");
            }
        }
        text((L + R) / 2.0, H - 8, xl, "middle");
        s_ << "<text x=\"14\" y=\"" << fixed((T + B) / 2.0) << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
           << fixed((T + B) / 2.0) << ")\">" << yl << "</text>\n";
    }

    void polyline(const Series& s, int color, bool step = false) {
        s_ << "<polyline fill=\"none\" stroke=\"" << kPalette[color % 6] << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (step && i > 0) s_ << fixed(px_of(s.x[i])) << "," << fixed(py_of(s.y[i - 1])) << " ";
            s_ << fixed(px_of(s.x[i])) << "," << fixed(py_of(s.y[i])) << " ";
        }
        s_ << "\"/>\n";
        if (!step)
            for (std::size_t i = 0; i < s.x.size(); ++i)
                s_ << "<circle cx=\"" << fixed(px_of(s.x[i])) << "\" cy=\"" << fixed(py_of(s.y[i])) << "\" r=\"3\" fill=\""
                   << kPalette[color % 6] << "\"/>\n";
    }

    void bar(double x_left, double width_px, double value, int color) {
        const double top = py_of(value), base = py_of(std::max(y0_, 0.0));
        s_ << "<rect x=\"" << fixed(x_left) << "\" y=\"" << fixed(std::min(top, base)) << "\" width=\"" << fixed(width_px)
           << "\" height=\"" << fixed(std::abs(base - top)) << "\" fill=\"" << kPalette[color % 6] << "\"/>\n";
    }

    void legend(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i) {
            const double y = T + 14.0 * static_cast<double>(i);
            s_ << "<rect x=\"" << fixed(R + 10) << "\" y=\"" << fixed(y - 9) << "\" width=\"10\" height=\"10\" fill=\""
               << kPalette[i % 6] << "\"/>\n";
            text(R + 24, y, names[i], "start");
        }
    }

    void text(double x, double y, const std::string& t, const char* anchor, int size = 12) {
        s_ << "<text x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" text-anchor=\"" << anchor << "\" font-size=\""
           << size << "\">" << t << "</text>\n";
    }

    double px_of(double x) const {
        const double a = log_x_ ? std::log(x) : x, lo = log_x_ ? std::log(x0_) : x0_, hi = log_x_ ? std::log(x1_) : x1_;
        return L + (hi > lo ? (a - lo) / (hi - lo) : 0.5) * (R - L);
    }
    double py_of(double y) const { return B - (y1_ > y0_ ? (y - y0_) / (y1_ - y0_) : 0.5) * (B - T); }

    std::string finish() {
        s_ << "</svg>\n";
        return s_.str();
    }

    static constexpr double W = 640, H = 400, L = 60, R = 500, T = 40, B = 350;

private:
    void line(double xa, double ya, double xb, double yb) {
        s_ << "<line x1=\"" << fixed(xa) << "\" y1=\"" << fixed(ya) << "\" x2=\"" << fixed(xb) << "\" y2=\"" << fixed(yb)
           << "\" stroke=\"black\"/>\n";
    }

    std::ostringstream s_;
    double x0_ = 0, x1_ = 1, y0_ = 0, y1_ = 1;
    bool log_x_ = false;
};

std::pair<double, double> padded_range(const std::vector<double>& v, double lo_floor) {
    double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
    const double pad = std::max(1e-9, 0.05 * (hi - lo));
    return {std::max(lo_floor, lo - pad), hi + pad};
}

std::string network_label(const std::string& n) {
    return n == "avg" ? "Avg." : "Expert " + std::to_string(std::stoi(n) + 1);
}

}  // namespace

void cmd_report(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path out = out_dir(cfg);
    const fs::path dir = paths::report_dir(out);
    const std::string h = cfg.hash();

    const auto nda = read_table(paths::nda_csv(out), h);
    if (!nda) throw MissingArtifact("no NDA results at " + str(paths::nda_csv(out)) + "; run evaluate first");
    if (nda->rows.empty()) throw ValidationError("NDA results are empty: no methods were evaluated");

    std::ostringstream md;
    md << "# " << cfg.name << "\n\nconfig hash: `" << h << "`\n\n";

    // NDA table per scenario: one column per network plus the average.
    const auto c_sc = nda->col("scenario"), c_m = nda->col("method"), c_seed = nda->col("seed"),
               c_net = nda->col("network"), c_nda = nda->col("nda"), c_p = nda->col("probe_size");
    std::set<std::string> scenarios;
    for (const auto& r : nda->rows) scenarios.insert(r[c_sc]);
    for (const auto& scen : scenarios) {
        // (method, network) -> per-seed NDA, keeping the last row per seed.
        std::map<std::pair<std::string, std::string>, std::map<std::string, double>> vals;
        std::set<std::string> methods, nets;
        for (const auto& r : nda->rows) {
            if (r[c_sc] != scen) continue;
            vals[{r[c_m], r[c_net]}][r[c_seed] + "/" + r[c_p]] = parse_double(r[c_nda]);
            methods.insert(r[c_m]);
            nets.insert(r[c_net]);
        }
        std::vector<std::string> net_order;
        for (const auto& n : nets)
            if (n != "avg") net_order.push_back(n);
        std::sort(net_order.begin(), net_order.end(), [](auto& a, auto& b) { return std::stoi(a) < std::stoi(b); });
        net_order.push_back("avg");
        const auto mlist = sorted_methods(methods);

        md << "## Normalized decoding accuracy, " << scen << "\n\n| Method |";
        for (const auto& n : net_order) md << " " << network_label(n) << " |";
        md << "\n|---|";
        for (std::size_t k = 0; k < net_order.size(); ++k) md << "---:|";
        md << "\n";
        Svg svg("NDA by method, " + scen, h);
        std::vector<double> all;
        for (const auto& [k, v] : vals)
            for (const auto& [s, x] : v) all.push_back(x);
        const auto [lo, hi] = padded_range(all, 0.0);
        std::vector<std::pair<double, std::string>> ticks;
        for (std::size_t g = 0; g < net_order.size(); ++g)
            ticks.push_back({static_cast<double>(g) + 0.5, network_label(net_order[g])});
        svg.axes(0.0, static_cast<double>(net_order.size()), std::min(lo, 0.0), std::max(hi, 100.0), "", "NDA (%)",
                 false, ticks);
        const double group_px = (Svg::R - Svg::L) / static_cast<double>(net_order.size());
        const double bar_px = 0.8 * group_px / static_cast<double>(mlist.size());
        for (std::size_t mi = 0; mi < mlist.size(); ++mi) {
            md << "| " << mlist[mi] << " |";
            for (std::size_t g = 0; g < net_order.size(); ++g) {
                std::vector<double> xs;
                for (const auto& [s, x] : vals[{mlist[mi], net_order[g]}]) xs.push_back(x);
                if (xs.empty()) {
                    md << " - |";
                    continue;
                }
                md << " " << fixed(mean_of(xs));
                if (xs.size() > 1) md << " ± " << fixed(std_of(xs));
                md << " |";
                svg.bar(Svg::L + group_px * static_cast<double>(g) + 0.1 * group_px + bar_px * static_cast<double>(mi),
                        bar_px, mean_of(xs), static_cast<int>(mi));
            }
            md << "\n";
        }
        svg.legend(mlist);
        write_atomic(dir / ("nda_" + scen + ".svg"), svg.finish());
        md << "\n";
    }

    // P ablation: average NDA vs P.
    if (const auto ab = read_table(paths::ablate_csv(out), h); ab && !ab->rows.empty()) {
        const auto a_m = ab->col("method"), a_p = ab->col("probe_size"), a_net = ab->col("network"),
                   a_nda = ab->col("nda"), a_seed = ab->col("seed");
        std::map<std::string, std::map<long, std::map<std::string, double>>> v;
        std::set<std::string> methods;
        std::set<long> ps;
        for (const auto& r : ab->rows) {
            if (r[a_net] != "avg") continue;
            v[r[a_m]][std::stol(r[a_p])][r[a_seed]] = parse_double(r[a_nda]);
            methods.insert(r[a_m]);
            ps.insert(std::stol(r[a_p]));
        }
        const auto mlist = sorted_methods(methods);
        md << "## Average NDA versus probe size P\n\n| Method |";
        for (long p : ps) md << " P=" << p << " |";
        md << " Range |\n|---|";
        for (std::size_t k = 0; k <= ps.size(); ++k) md << "---:|";
        md << "\n";
        Svg svg("Average NDA versus P", h);
        std::vector<double> all;
        std::vector<Series> series;
        for (const auto& m : mlist) {
            Series s{m, {}, {}};
            md << "| " << m << " |";
            for (long p : ps) {
                std::vector<double> xs;
                for (const auto& [seed, x] : v[m][p]) xs.push_back(x);
                if (xs.empty()) {
                    md << " - |";
                    continue;
                }
                s.x.push_back(static_cast<double>(p));
                s.y.push_back(mean_of(xs));
                all.push_back(s.y.back());
                md << " " << fixed(s.y.back()) << " |";
            }
            md << " " << (s.y.empty() ? "-" : fixed(*std::max_element(s.y.begin(), s.y.end()) -
                                                   *std::min_element(s.y.begin(), s.y.end())))
               << " |\n";
            series.push_back(std::move(s));
        }
        md << "\n";
        const auto [lo, hi] = padded_range(all, -1e300);
        std::vector<std::pair<double, std::string>> ticks;
        for (long p : ps) ticks.push_back({static_cast<double>(p), std::to_string(p)});
        const double pmin = static_cast<double>(*ps.begin()), pmax = static_cast<double>(*ps.rbegin());
        svg.axes(pmin * (ps.size() > 1 ? 0.9 : 0.5), pmax * (ps.size() > 1 ? 1.1 : 2.0), lo, hi, "probe size P",
                 "average NDA (%)", true, ticks);
        for (std::size_t i = 0; i < series.size(); ++i) svg.polyline(series[i], static_cast<int>(i));
        svg.legend(mlist);
        write_atomic(dir / "ablate_p.svg", svg.finish());
    }

    // Distillation curve: mean over seeds per epoch.
    if (const auto dc = read_table(paths::distill_csv(out), h); dc && !dc->rows.empty()) {
        const auto d_e = dc->col("epoch"), d_tr = dc->col("train_decode_accuracy"), d_te = dc->col("test_nda"),
                   d_s = dc->col("seed"), d_p = dc->col("probe_size");
        std::map<int, std::map<std::string, std::pair<double, double>>> by_epoch;
        for (const auto& r : dc->rows)
            by_epoch[std::stoi(r[d_e])][r[d_s] + "/" + r[d_p]] = {parse_double(r[d_tr]), parse_double(r[d_te])};
        Series tr{"train decode accuracy", {}, {}}, te{"test NDA", {}, {}};
        for (const auto& [e, m] : by_epoch) {
            std::vector<double> a, b;
            for (const auto& [k, v] : m) {
                a.push_back(v.first);
                b.push_back(v.second);
            }
            tr.x.push_back(e);
            tr.y.push_back(mean_of(a));
            te.x.push_back(e);
            te.y.push_back(mean_of(b));
        }
        md << "## Distillation on the probe set\n\n| Epoch | Train decode accuracy | Test NDA |\n|---:|---:|---:|\n";
        md << "| " << tr.x.front() << " | " << fixed(tr.y.front()) << " | " << fixed(te.y.front()) << " |\n";
        md << "| " << tr.x.back() << " | " << fixed(tr.y.back()) << " | " << fixed(te.y.back()) << " |\n\n";
        std::vector<double> all = tr.y;
        all.insert(all.end(), te.y.begin(), te.y.end());
        const auto [lo, hi] = padded_range(all, -1e300);
        Svg svg("Distillation: train vs test decoding", h);
        svg.axes(tr.x.front(), std::max(tr.x.back(), tr.x.front() + 1), lo, hi, "epoch", "percent", false);
        svg.polyline(tr, 0, true);
        svg.polyline(te, 1, true);
        svg.legend({tr.name, te.name});
        write_atomic(dir / "distill_curve.svg", svg.finish());
    }

    // Latency summary and CDF of the first seed's records.
    if (const auto lat = read_table(paths::latency_csv(out), h); lat && !lat->rows.empty()) {
        const auto l_pol = lat->col("policy"), l_seed = lat->col("seed");
        const std::vector<std::string> cols{"mean_latency", "p50_latency", "p99_latency", "decoded_fraction",
                                            "agreement_rate", "offline_agreement"};
        std::map<std::string, std::map<std::string, Row>> by_policy;
        for (const auto& r : lat->rows) by_policy[r[l_pol]][r[l_seed]] = r;
        md << "## Serving latency\n\n| Policy | Mean | p50 | p99 | Decoded fraction | Agreement | Offline agreement "
              "|\n|---|---:|---:|---:|---:|---:|---:|\n";
        std::vector<std::string> policies;
        for (const auto& [p, m] : by_policy) policies.push_back(p);
        std::sort(policies.begin(), policies.end(), [](auto& a, auto& b) { return a == "uncoded" && b != "uncoded"; });
        for (const auto& p : policies) {
            md << "| " << p << " |";
            for (const auto& c : cols) {
                std::vector<double> xs;
                for (const auto& [s, r] : by_policy[p])
                    if (!r[lat->col(c)].empty()) xs.push_back(parse_double(r[lat->col(c)]));
                md << " " << (xs.empty() ? "-" : fixed(mean_of(xs), c.find("latency") != std::string::npos ? 2 : 4))
                   << " |";
            }
            md << "\n";
        }
        md << "\n";

        std::vector<Series> cdfs;
        std::vector<std::string> names;
        std::vector<double> xs_all;
        const std::string seed0 = std::to_string(cfg.seeds.front());
        for (const auto& p : policies) {
            const fs::path rec = out / "sim" / ("records_seed_" + seed0 + "_" + p + ".csv");
            const auto t = read_table(rec, h);
            if (!t) continue;
            std::vector<double> lats;
            const auto c_done = t->col("completed"), c_arr = t->col("arrival"), c_comp = t->col("completion");
            for (const auto& r : t->rows)
                if (r[c_done] == "1") lats.push_back(parse_double(r[c_comp]) - parse_double(r[c_arr]));
            if (lats.empty()) continue;
            std::sort(lats.begin(), lats.end());
            Series s{p, {}, {}};
            // Thin to at most ~400 points, keeping the tail exact.
            const std::size_t stride = std::max<std::size_t>(1, lats.size() / 400);
            for (std::size_t i = 0; i < lats.size(); i += stride) {
                s.x.push_back(lats[i]);
                s.y.push_back(static_cast<double>(i + 1) / static_cast<double>(lats.size()));
            }
            s.x.push_back(lats.back());
            s.y.push_back(1.0);
            xs_all.insert(xs_all.end(), s.x.begin(), s.x.end());
            cdfs.push_back(std::move(s));
            names.push_back(p);
        }
        if (!cdfs.empty()) {
            Svg svg("Latency CDF (seed " + seed0 + ")", h);
            const double lo = std::max(1e-3, *std::min_element(xs_all.begin(), xs_all.end()));
            const double hi = *std::max_element(xs_all.begin(), xs_all.end());
            std::vector<std::pair<double, std::string>> ticks;
            for (double t = std::pow(10.0, std::floor(std::log10(lo))); t <= hi * 1.0001; t *= 10.0)
                if (t >= lo) ticks.push_back({t, fixed(t, t < 1 ? 3 : 0)});
            svg.axes(lo, hi, 0.0, 1.0, "latency (log scale)", "fraction of queries", true, ticks);
            for (auto& s : cdfs)
                for (auto& x : s.x) x = std::max(x, lo);
            for (std::size_t i = 0; i < cdfs.size(); ++i) svg.polyline(cdfs[i], static_cast<int>(i), true);
            svg.legend(names);
            write_atomic(dir / "latency_cdf.svg", svg.finish());
        }
    }

    write_atomic(dir / "summary.md", md.str());
}

}  // namespace coin
