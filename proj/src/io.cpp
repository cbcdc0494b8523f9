#include "coin/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "coin/errors.hpp"

namespace coin {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {
constexpr std::string_view kCheckpointFormat = "coin-checkpoint-v1";
constexpr std::string_view kFisherFormat = "coin-diag-fisher-v1";
}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ValidationError("not a number: '" + std::string(s) + "'");
    return v;
}

std::string content_hash(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string hash_matrix(const Matrix& m) {
    std::string text = std::to_string(m.rows()) + "x" + std::to_string(m.cols());
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) text += "," + format_double(m(r, c));
    return content_hash(text);
}

void write_atomic(const fs::path& path, std::string_view contents) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json spec_to_json(const NetworkSpec& spec) {
    return json{{"layer_dims", spec.layer_dims}, {"activation", std::string(to_string(spec.hidden_activation))}};
}

NetworkSpec spec_from_json(const json& j) {
    NetworkSpec spec;
    try {
        spec.layer_dims = j.at("layer_dims").get<std::vector<int>>();
        spec.hidden_activation = activation_from_string(j.value("activation", std::string("tanh")));
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad network spec: ") + e.what());
    }
    spec.validate();
    return spec;
}

json checkpoint_to_json(const ParamVec& params, const json& meta) {
    json j = spec_to_json(params.spec());
    j["format"] = kCheckpointFormat;
    j["params"] = std::vector<double>(params.values().data(), params.values().data() + params.size());
    if (!meta.is_null()) j["meta"] = meta;
    return j;
}

ParamVec checkpoint_from_json(const json& j) {
    if (j.value("format", std::string()) != kCheckpointFormat) throw ValidationError("not a checkpoint document");
    const NetworkSpec spec = spec_from_json(j);
    std::vector<double> values;
    try {
        values = j.at("params").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad checkpoint params: ") + e.what());
    }
    return ParamVec(spec, Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size())));
}

std::string dump_checkpoint(const ParamVec& params, const json& meta) {
    return checkpoint_to_json(params, meta).dump(1) + "\n";
}

ParamVec parse_checkpoint(std::string_view text) {
    try {
        return checkpoint_from_json(json::parse(text));
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
}

void save_checkpoint(const fs::path& path, const ParamVec& params, const json& meta) {
    write_atomic(path, dump_checkpoint(params, meta));
}

ParamVec load_checkpoint(const fs::path& path) { return parse_checkpoint(read_file(path)); }

json load_checkpoint_meta(const fs::path& path) {
    const json j = json::parse(read_file(path));
    return j.value("meta", json::object());
}

json fisher_to_json(const DiagFisher& f) {
    json j = spec_to_json(f.spec);
    j["format"] = kFisherFormat;
    j["probe_size"] = f.probe_size;
    j["values"] = std::vector<double>(f.values.data(), f.values.data() + f.values.size());
    return j;
}

DiagFisher fisher_from_json(const json& j) {
    if (j.value("format", std::string()) != kFisherFormat) throw ValidationError("not a Fisher document");
    DiagFisher f;
    f.spec = spec_from_json(j);
    f.probe_size = j.at("probe_size").get<Eigen::Index>();
    const auto values = j.at("values").get<std::vector<double>>();
    f.values = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    f.validate();
    return f;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    for (auto line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!line.empty()) out.push_back(line);
    }
    return out;
}

struct CsvHeader {
    int dim = 0;
    int classes = 0;
    std::string split;
};

CsvHeader parse_header(std::string_view line) {
    CsvHeader h;
    for (auto field : split(line, ',')) {
        const auto eq = field.find('=');
        if (eq == std::string_view::npos) throw ValidationError("bad dataset header field");
        const auto key = field.substr(0, eq);
        const auto val = field.substr(eq + 1);
        if (key == "s")
            h.dim = static_cast<int>(parse_double(val));
        else if (key == "K")
            h.classes = static_cast<int>(parse_double(val));
        else if (key == "split")
            h.split = std::string(val);
    }
    if (h.dim < 1 || h.classes < 1 || h.split.empty()) throw ValidationError("incomplete dataset header");
    return h;
}

std::string header_line(Eigen::Index dim, int classes, std::string_view split_tag) {
    return "s=" + std::to_string(dim) + ",K=" + std::to_string(classes) + ",split=" + std::string(split_tag) + "\n";
}

}  // namespace

std::string dataset_to_csv(const LabeledDataset& data) {
    data.validate();
    std::string out = header_line(data.inputs.cols(), data.num_classes, to_string(data.split));
    for (Eigen::Index r = 0; r < data.size(); ++r) {
        for (Eigen::Index c = 0; c < data.inputs.cols(); ++c) out += format_double(data.inputs(r, c)) + ",";
        out += std::to_string(data.labels[static_cast<std::size_t>(r)]) + "\n";
    }
    return out;
}

LabeledDataset dataset_from_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ValidationError("empty dataset file");
    const CsvHeader h = parse_header(lines.front());
    LabeledDataset data;
    data.num_classes = h.classes;
    if (h.split == "train")
        data.split = Split::Train;
    else if (h.split == "test")
        data.split = Split::Test;
    else
        throw ValidationError("dataset split must be train or test");
    data.inputs.resize(static_cast<Eigen::Index>(lines.size() - 1), h.dim);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r], ',');
        if (fields.size() != static_cast<std::size_t>(h.dim) + 1) throw ValidationError("dataset row has wrong width");
        for (int c = 0; c < h.dim; ++c) data.inputs(static_cast<Eigen::Index>(r - 1), c) = parse_double(fields[c]);
        data.labels.push_back(static_cast<int>(parse_double(fields.back())));
    }
    data.validate();
    return data;
}

std::string probe_to_csv(const ProbeSet& probe, int num_classes) {
    probe.validate();
    std::string out = header_line(probe.inputs.cols(), num_classes, "probe");
    for (Eigen::Index r = 0; r < probe.size(); ++r) {
        for (Eigen::Index c = 0; c < probe.inputs.cols(); ++c)
            out += (c ? "," : "") + format_double(probe.inputs(r, c));
        out += "\n";
    }
    return out;
}

ProbeSet probe_from_csv(std::string_view text) {
    const auto lines = lines_of(text);
    if (lines.empty()) throw ValidationError("empty probe file");
    const CsvHeader h = parse_header(lines.front());
    if (h.split != "probe") throw ValidationError("probe file must have split=probe");
    ProbeSet probe;
    probe.inputs.resize(static_cast<Eigen::Index>(lines.size() - 1), h.dim);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = split(lines[r], ',');
        if (fields.size() != static_cast<std::size_t>(h.dim)) throw ValidationError("probe row has wrong width");
        for (int c = 0; c < h.dim; ++c) probe.inputs(static_cast<Eigen::Index>(r - 1), c) = parse_double(fields[c]);
    }
    probe.validate();
    return probe;
}

}  // namespace coin
