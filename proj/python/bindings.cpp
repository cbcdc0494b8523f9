// Python bindings for the coin core: networks, Fishers, coding, decoding,
// metrics and the experiment pipeline.

#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coin/coder.hpp"
#include "coin/errors.hpp"
#include "coin/fisher.hpp"
#include "coin/io.hpp"
#include "coin/metrics.hpp"
#include "coin/pipeline.hpp"
#include "coin/serving_sim.hpp"

namespace py = pybind11;
using namespace coin;

namespace {

LabeledDataset make_dataset(const Matrix& inputs, std::vector<int> labels, int num_classes) {
    LabeledDataset d;
    d.inputs = inputs;
    d.labels = std::move(labels);
    d.num_classes = num_classes;
    d.validate();
    return d;
}

py::dict nda_dict(const NdaResult& r) {
    py::dict d;
    d["nda"] = r.nda;
    d["decoded_accuracy"] = r.decoded_accuracy;
    d["expert_accuracy"] = r.expert_accuracy;
    d["test_size"] = r.test_size;
    return d;
}

py::dict report_dict(const NdaReport& r) {
    py::dict d;
    d["method"] = r.method;
    d["scenario"] = r.scenario;
    d["seed"] = r.seed;
    d["probe_size"] = r.probe_size;
    py::list per;
    for (const auto& n : r.per_network) per.append(nda_dict(n));
    d["per_network"] = per;
    d["average"] = r.average();
    return d;
}

py::dict latency_dict(const LatencyReport& r) {
    py::dict d;
    d["policy"] = std::string(to_string(r.policy));
    d["total_arrivals"] = r.total_arrivals;
    d["completed"] = r.completed;
    d["mean_latency"] = r.mean_latency;
    d["p50_latency"] = r.p50_latency;
    d["p99_latency"] = r.p99_latency;
    d["decoded_fraction"] = r.decoded_fraction;
    d["agreement_rate"] = r.agreement_rate ? py::object(py::float_(*r.agreement_rate)) : py::none();
    d["agreement_samples"] = r.agreement_samples;
    return d;
}

ExperimentConfig config_from(const std::string& json_text, const std::string& output_dir) {
    ExperimentConfig c;
    try {
        c = ExperimentConfig::from_json(nlohmann::json::parse(json_text));
    } catch (const nlohmann::json::parse_error& e) {
        throw ValidationError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!output_dir.empty()) c.output_dir = output_dir;
    return c;
}

}  // namespace

PYBIND11_MODULE(_coin, m) {
    m.doc() = "Erasure coding over neural networks (native core)";

    auto validation = py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<MissingArtifact>(m, "MissingArtifact", PyExc_FileNotFoundError);
    (void)validation;

    py::enum_<Activation>(m, "Activation").value("Tanh", Activation::Tanh).value("ReLU", Activation::ReLU);

    py::class_<NetworkSpec>(m, "NetworkSpec")
        .def(py::init([](std::vector<int> dims, Activation a) {
                 NetworkSpec s{std::move(dims), a};
                 s.validate();
                 return s;
             }),
             py::arg("layer_dims"), py::arg("activation") = Activation::Tanh)
        .def_readonly("layer_dims", &NetworkSpec::layer_dims)
        .def_readonly("activation", &NetworkSpec::hidden_activation)
        .def_property_readonly("param_count", [](const NetworkSpec& s) { return param_count(s); })
        .def("__eq__", [](const NetworkSpec& a, const NetworkSpec& b) { return a == b; })
        .def("__repr__", [](const NetworkSpec& s) { return "NetworkSpec(" + describe(s) + ")"; });

    py::class_<ParamVec>(m, "ParamVec")
        .def(py::init<NetworkSpec, Vector>(), py::arg("spec"), py::arg("values"))
        .def_property_readonly("spec", &ParamVec::spec)
        .def_property_readonly("values", [](const ParamVec& p) { return Vector(p.values()); })
        .def("__len__", [](const ParamVec& p) { return p.size(); })
        .def("__eq__", [](const ParamVec& a, const ParamVec& b) { return a == b; });

    py::class_<DiagFisher>(m, "DiagFisher")
        .def(py::init([](NetworkSpec spec, Vector values, Eigen::Index probe_size) {
                 DiagFisher f{std::move(spec), std::move(values), probe_size};
                 f.validate();
                 return f;
             }),
             py::arg("spec"), py::arg("values"), py::arg("probe_size"))
        .def_readonly("spec", &DiagFisher::spec)
        .def_readonly("values", &DiagFisher::values)
        .def_readonly("probe_size", &DiagFisher::probe_size);

    py::class_<CodingWeights>(m, "CodingWeights")
        .def(py::init<std::vector<double>>(), py::arg("betas"))
        .def_static("uniform", &CodingWeights::uniform, py::arg("n"))
        .def_property_readonly("betas", &CodingWeights::betas)
        .def("beta", &CodingWeights::beta)
        .def("betabar_i", py::overload_cast<int>(&CodingWeights::betabar, py::const_), py::arg("i"))
        .def_property_readonly("betabar", py::overload_cast<>(&CodingWeights::betabar, py::const_))
        .def("__len__", &CodingWeights::size);

    py::class_<CodedModel>(m, "CodedModel")
        .def_readonly("params", &CodedModel::params)
        .def_property_readonly("method", [](const CodedModel& c) { return std::string(to_string(c.method)); })
        .def_readonly("lambda_", &CodedModel::lambda)
        .def_readonly("alpha", &CodedModel::alpha)
        .def_readonly("source_ids", &CodedModel::source_ids)
        .def_readonly("probe_hash", &CodedModel::probe_hash);

    // nn-core
    m.def("param_count", &param_count, py::arg("spec"));
    m.def("init_params", &init_params, py::arg("spec"), py::arg("seed"));
    m.def(
        "forward", [](const ParamVec& p, const Vector& x) { return forward(p, x); }, py::arg("params"), py::arg("x"));
    m.def("forward_batch", &forward_batch, py::arg("params"), py::arg("inputs"));
    m.def(
        "jacobian", [](const ParamVec& p, const Vector& x) { return jacobian(p, x); }, py::arg("params"), py::arg("x"));
    m.def(
        "train",
        [](const ParamVec& init, const Matrix& inputs, std::vector<int> labels, int num_classes, double learning_rate,
           int epochs, int batch_size, double weight_decay, std::uint64_t seed) {
            TrainConfig cfg{learning_rate, epochs, batch_size, weight_decay, seed, Loss::CrossEntropy};
            py::gil_scoped_release release;
            return train(init, make_dataset(inputs, std::move(labels), num_classes), cfg);
        },
        py::arg("init"), py::arg("inputs"), py::arg("labels"), py::arg("num_classes"), py::arg("learning_rate") = 1e-3,
        py::arg("epochs") = 1, py::arg("batch_size") = 32, py::arg("weight_decay") = 0.0, py::arg("seed") = 0);
    m.def(
        "accuracy",
        [](const ParamVec& p, const Matrix& inputs, std::vector<int> labels, int num_classes) {
            return accuracy(p, make_dataset(inputs, std::move(labels), num_classes));
        },
        py::arg("params"), py::arg("inputs"), py::arg("labels"), py::arg("num_classes"));

    // fisher
    m.def(
        "estimate_diag_fisher", [](const ParamVec& p, const Matrix& probe) { return estimate_diag_fisher(p, ProbeSet{probe}); },
        py::arg("params"), py::arg("probe"));
    m.def(
        "full_empirical_fisher",
        [](const ParamVec& p, const Matrix& probe) { return full_empirical_fisher(p, ProbeSet{probe}); },
        py::arg("params"), py::arg("probe"));
    m.def("kl_quadratic", py::overload_cast<const ParamVec&, const ParamVec&, const DiagFisher&>(&kl_quadratic),
          py::arg("theta"), py::arg("anchor"), py::arg("fisher"));
    m.def(
        "empirical_output_divergence",
        [](const ParamVec& a, const ParamVec& b, const Matrix& probe) {
            return empirical_output_divergence(a, b, ProbeSet{probe});
        },
        py::arg("theta"), py::arg("anchor"), py::arg("probe"));

    // coder
    m.def(
        "coin_merge",
        [](const std::vector<Vector>& thetas, const std::vector<Vector>& fishers, const CodingWeights& w, double lambda) {
            return coin_merge(thetas, fishers, w, lambda);
        },
        py::arg("thetas"), py::arg("fishers"), py::arg("weights"), py::arg("lambda_"));
    m.def(
        "coin_code",
        [](const std::vector<ParamVec>& models, const std::vector<DiagFisher>& fishers, const CodingWeights& w,
           double lambda) { return coin_code(models, fishers, w, lambda); },
        py::arg("models"), py::arg("fishers"), py::arg("weights"), py::arg("lambda_"));
    m.def(
        "vanilla_average",
        [](const std::vector<ParamVec>& models, const CodingWeights& w) { return vanilla_average(models, w); },
        py::arg("models"), py::arg("weights"));
    m.def(
        "task_arithmetic",
        [](const ParamVec& base, const std::vector<ParamVec>& models, double alpha) {
            return task_arithmetic(base, models, alpha);
        },
        py::arg("base"), py::arg("models"), py::arg("alpha"));
    m.def(
        "distill",
        [](const std::vector<ParamVec>& models, const CodingWeights& w, const Matrix& probe, const ParamVec& init,
           double learning_rate, int epochs, int batch_size, std::uint64_t seed) {
            TrainConfig cfg{learning_rate, epochs, batch_size, 0.0, seed, Loss::SquaredError};
            py::gil_scoped_release release;
            return distill(models, w, ProbeSet{probe}, init, cfg);
        },
        py::arg("models"), py::arg("weights"), py::arg("probe"), py::arg("init"), py::arg("learning_rate") = 1e-3,
        py::arg("epochs") = 1, py::arg("batch_size") = 32, py::arg("seed") = 0);
    m.def(
        "tune_lambda",
        [](const std::vector<ParamVec>& models, const std::vector<DiagFisher>& fishers, const CodingWeights& w,
           const Matrix& probe, std::vector<double> grid) {
            if (grid.empty()) grid = default_lambda_grid();
            const auto r = tune_lambda(models, fishers, w, ProbeSet{probe}, grid);
            return py::make_tuple(r.value, r.model, r.scores);
        },
        py::arg("models"), py::arg("fishers"), py::arg("weights"), py::arg("probe"),
        py::arg("grid") = std::vector<double>{});
    m.def(
        "tune_alpha",
        [](const ParamVec& base, const std::vector<ParamVec>& models, const CodingWeights& w, const Matrix& probe,
           std::vector<double> grid) {
            if (grid.empty()) grid = default_alpha_grid();
            const auto r = tune_alpha(base, models, w, ProbeSet{probe}, grid);
            return py::make_tuple(r.value, r.model, r.scores);
        },
        py::arg("base"), py::arg("models"), py::arg("weights"), py::arg("probe"),
        py::arg("grid") = std::vector<double>{});
    m.def("default_lambda_grid", &default_lambda_grid);
    m.def("default_alpha_grid", &default_alpha_grid);

    // decoder-metrics
    m.def(
        "combine", [](const std::vector<Vector>& outputs, const CodingWeights& w) { return combine(outputs, w); },
        py::arg("outputs"), py::arg("weights"));
    m.def(
        "decode",
        [](int target, const Vector& coded, const std::vector<Vector>& outputs, const CodingWeights& w) {
            return decode(target, coded, std::span<const Vector>(outputs), w);
        },
        py::arg("target"), py::arg("coded_output"), py::arg("outputs"), py::arg("weights"));
    m.def(
        "empirical_coding_loss",
        [](const ParamVec& coded, const std::vector<ParamVec>& models, const CodingWeights& w, const Matrix& probe) {
            return empirical_coding_loss(coded, models, w, ProbeSet{probe});
        },
        py::arg("coded"), py::arg("models"), py::arg("weights"), py::arg("probe"));
    m.def(
        "nda",
        [](const ParamVec& coded, const std::vector<ParamVec>& experts, int target, const Matrix& inputs,
           std::vector<int> labels, int num_classes, const CodingWeights& w) {
            return nda_dict(nda(coded, experts, target, make_dataset(inputs, std::move(labels), num_classes), w));
        },
        py::arg("coded"), py::arg("experts"), py::arg("target"), py::arg("inputs"), py::arg("labels"),
        py::arg("num_classes"), py::arg("weights"));

    // io
    m.def(
        "save_checkpoint", [](const std::filesystem::path& path, const ParamVec& p) { save_checkpoint(path, p); },
        py::arg("path"), py::arg("params"));
    m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

    // pipeline, driven by a JSON config string
    m.def(
        "config_hash", [](const std::string& cfg) { return config_from(cfg, "").hash(); }, py::arg("config_json"));
    m.def(
        "train_experts",
        [](const std::string& cfg, const std::string& out) {
            const auto c = config_from(cfg, out);
            py::gil_scoped_release release;
            cmd_train_experts(c);
        },
        py::arg("config_json"), py::arg("output_dir") = "");
    m.def(
        "code",
        [](const std::string& cfg, const std::string& method, const std::string& out) {
            const auto c = config_from(cfg, out);
            const auto mth = coding_method_from_string(method);
            py::gil_scoped_release release;
            cmd_code(c, mth);
        },
        py::arg("config_json"), py::arg("method"), py::arg("output_dir") = "");
    m.def(
        "evaluate",
        [](const std::string& cfg, const std::string& out) {
            std::vector<NdaReport> reps;
            {
                const auto c = config_from(cfg, out);
                py::gil_scoped_release release;
                reps = cmd_evaluate(c);
            }
            py::list l;
            for (const auto& r : reps) l.append(report_dict(r));
            return l;
        },
        py::arg("config_json"), py::arg("output_dir") = "");
    m.def(
        "simulate",
        [](const std::string& cfg, const std::string& out) {
            std::vector<SimOutcome> outs;
            {
                const auto c = config_from(cfg, out);
                py::gil_scoped_release release;
                outs = cmd_simulate(c);
            }
            py::list l;
            for (const auto& o : outs) {
                py::dict d = latency_dict(o.report);
                d["seed"] = o.seed;
                d["offline_agreement"] = o.offline_agreement ? py::object(py::float_(*o.offline_agreement)) : py::none();
                l.append(d);
            }
            return l;
        },
        py::arg("config_json"), py::arg("output_dir") = "");
    m.def(
        "report",
        [](const std::string& cfg, const std::string& out) {
            const auto c = config_from(cfg, out);
            cmd_report(c);
        },
        py::arg("config_json"), py::arg("output_dir") = "");
}
