#pragma once

// Discrete-event simulation of a multi-model inference cluster: one FIFO
// server per expert and optionally one server hosting the coded network.
//
// Under CodedRecovery a query for expert i is also sent to the coded server
// and to every other expert at arrival; it is answered at the earlier of the
// direct completion and the completion of the last decode input.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "coin/coding_weights.hpp"
#include "coin/nn.hpp"

namespace coin {

enum class ServiceDistribution { Exponential, Deterministic };

struct ServerSpec {
    // Expert index, or -1 for the coded server.
    int hosted_model = 0;
    double service_rate = 1.0;
    double straggler_probability = 0.0;
    double straggler_slowdown = 1.0;
    ServiceDistribution distribution = ServiceDistribution::Exponential;

    void validate() const;
};

inline constexpr int kCodedServer = -1;

// Rates for all experts from `start` until the next phase begins.
struct RatePhase {
    double start = 0.0;
    std::vector<double> rates;
};

struct TrafficSpec {
    // Poisson arrival rate of queries for each expert.
    std::vector<double> arrival_rates;
    double horizon = 1000.0;
    // Optional piecewise-constant override of arrival_rates; phases sorted by start.
    std::vector<RatePhase> schedule;

    void validate(int num_experts) const;
};

enum class Policy { Uncoded, CodedRecovery };
std::string_view to_string(Policy p);
Policy policy_from_string(std::string_view name);

enum class AnswerPath { Direct, Decoded };

struct QueryRecord {
    std::uint64_t id = 0;
    int expert = 0;
    double arrival = 0.0;
    double completion = 0.0;  // answer time; only meaningful if completed
    bool completed = false;
    AnswerPath path = AnswerPath::Direct;
    // Decoded argmax matches the direct expert argmax; CodedRecovery only.
    std::optional<bool> agrees;
};

struct LatencyReport {
    Policy policy = Policy::Uncoded;
    std::size_t total_arrivals = 0;
    std::size_t completed = 0;
    double mean_latency = 0.0;
    double p50_latency = 0.0;
    double p99_latency = 0.0;
    // Completed queries answered through the decode path.
    double decoded_fraction = 0.0;
    // Fraction of completed queries whose decoded argmax equals the expert's
    // own argmax; computed over all queries whose decode inputs finished.
    std::optional<double> agreement_rate;
    std::size_t agreement_samples = 0;
};

// Nearest-rank percentile of unsorted values, p in (0, 100].
double nearest_rank_percentile(std::vector<double> values, double p);

// Throws ValidationError if no record completed.
LatencyReport summarize(std::span<const QueryRecord> records, Policy policy);

struct SimModels {
    std::span<const ParamVec> experts;
    const ParamVec* coded = nullptr;
    const CodingWeights* weights = nullptr;
    // Pool the query inputs are drawn from, rows are inputs.
    const Matrix* query_inputs = nullptr;
};

struct SimResult {
    LatencyReport report;
    std::vector<QueryRecord> records;
};

// Servers: one per expert (hosted_model = i), plus a kCodedServer entry when
// the coded model is available. Deterministic for a fixed seed.
SimResult run_sim(std::span<const ServerSpec> servers, const TrafficSpec& traffic, Policy policy,
                  const SimModels& models, std::uint64_t seed);

// Offline fraction of inputs on which argmax(decode_i) == argmax(f_i), with
// the expert index drawn in proportion to the arrival rates.
double offline_decode_agreement(const SimModels& models, std::span<const double> arrival_rates);

std::string records_csv(std::span<const QueryRecord> records);

}  // namespace coin
