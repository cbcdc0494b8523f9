#pragma once

// Text file formats: checkpoints, Fisher diagonals, datasets and probe sets.
// Doubles are written in shortest round-trip form, so read(write(x)) == x.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "coin/fisher.hpp"
#include "coin/nn.hpp"

namespace coin {

std::string format_double(double v);
double parse_double(std::string_view s);

// FNV-1a 64, rendered as 16 lowercase hex digits.
std::string content_hash(std::string_view bytes);
std::string hash_matrix(const Matrix& m);

// Write to a sibling temp file then rename over `path`.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
// Read whole file; throws MissingArtifact if absent.
std::string read_file(const std::filesystem::path& path);

nlohmann::json spec_to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

// Checkpoint: {"format", "layer_dims", "activation", "params", ["meta"]}.
nlohmann::json checkpoint_to_json(const ParamVec& params, const nlohmann::json& meta = nullptr);
ParamVec checkpoint_from_json(const nlohmann::json& j);
std::string dump_checkpoint(const ParamVec& params, const nlohmann::json& meta = nullptr);
ParamVec parse_checkpoint(std::string_view text);
void save_checkpoint(const std::filesystem::path& path, const ParamVec& params,
                     const nlohmann::json& meta = nullptr);
ParamVec load_checkpoint(const std::filesystem::path& path);
nlohmann::json load_checkpoint_meta(const std::filesystem::path& path);

nlohmann::json fisher_to_json(const DiagFisher& f);
DiagFisher fisher_from_json(const nlohmann::json& j);

// Datasets: header "s=<dim>,K=<classes>,split=<train|test>" then one row per
// sample: x_1,...,x_s,label. Probe sets use split=probe and omit the label.
std::string dataset_to_csv(const LabeledDataset& data);
LabeledDataset dataset_from_csv(std::string_view text);
std::string probe_to_csv(const ProbeSet& probe, int num_classes);
ProbeSet probe_from_csv(std::string_view text);

}  // namespace coin
