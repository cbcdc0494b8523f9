#include "coin/serving_sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <queue>

#include "coin/errors.hpp"
#include "coin/io.hpp"
#include "coin/metrics.hpp"
#include "coin/rng.hpp"

namespace coin {

void ServerSpec::validate() const {
    if (!(service_rate > 0.0)) throw ValidationError("server service rate must be positive");
    if (!(straggler_probability >= 0.0 && straggler_probability <= 1.0))
        throw ValidationError("straggler probability must be in [0, 1]");
    if (!(straggler_slowdown >= 1.0)) throw ValidationError("straggler slowdown must be >= 1");
}

void TrafficSpec::validate(int num_experts) const {
    if (static_cast<int>(arrival_rates.size()) != num_experts)
        throw ValidationError("need one arrival rate per expert");
    for (double r : arrival_rates)
        if (!(r >= 0.0)) throw ValidationError("arrival rates must be >= 0");
    if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");
    double prev = -1.0;
    for (const auto& ph : schedule) {
        if (!(ph.start > prev) || ph.start < 0.0) throw ValidationError("rate phases must have increasing starts");
        prev = ph.start;
        if (static_cast<int>(ph.rates.size()) != num_experts) throw ValidationError("rate phase needs one rate per expert");
        for (double r : ph.rates)
            if (!(r >= 0.0)) throw ValidationError("arrival rates must be >= 0");
    }
}

std::string_view to_string(Policy p) { return p == Policy::Uncoded ? "uncoded" : "coded-recovery"; }

Policy policy_from_string(std::string_view name) {
    if (name == "uncoded") return Policy::Uncoded;
    if (name == "coded-recovery") return Policy::CodedRecovery;
    throw ValidationError("unknown policy '" + std::string(name) + "'");
}

double nearest_rank_percentile(std::vector<double> values, double p) {
    if (values.empty()) throw ValidationError("percentile of an empty sample");
    if (!(p > 0.0 && p <= 100.0)) throw ValidationError("percentile must be in (0, 100]");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
    rank = std::clamp<std::size_t>(rank, 1, values.size());
    return values[rank - 1];
}

LatencyReport summarize(std::span<const QueryRecord> records, Policy policy) {
    LatencyReport rep;
    rep.policy = policy;
    rep.total_arrivals = records.size();
    std::vector<double> lat;
    std::size_t decoded = 0, agree = 0, agree_n = 0;
    for (const auto& r : records) {
        if (r.agrees) {
            ++agree_n;
            if (*r.agrees) ++agree;
        }
        if (!r.completed) continue;
        lat.push_back(r.completion - r.arrival);
        if (r.path == AnswerPath::Decoded) ++decoded;
    }
    if (lat.empty()) throw ValidationError("no completed queries to summarize");
    rep.completed = lat.size();
    double sum = 0.0;
    for (double v : lat) sum += v;
    rep.mean_latency = sum / static_cast<double>(lat.size());
    rep.p50_latency = nearest_rank_percentile(lat, 50.0);
    rep.p99_latency = nearest_rank_percentile(lat, 99.0);
    rep.decoded_fraction = static_cast<double>(decoded) / static_cast<double>(lat.size());
    if (agree_n > 0) rep.agreement_rate = static_cast<double>(agree) / static_cast<double>(agree_n);
    rep.agreement_samples = agree_n;
    return rep;
}

namespace {

struct Arrival {
    double time;
    int expert;
};

std::vector<Arrival> generate_arrivals(const TrafficSpec& traffic, std::uint64_t seed) {
    std::vector<RatePhase> phases = traffic.schedule;
    if (phases.empty() || phases.front().start > 0.0) phases.insert(phases.begin(), RatePhase{0.0, traffic.arrival_rates});

    std::vector<Arrival> out;
    for (std::size_t e = 0; e < traffic.arrival_rates.size(); ++e) {
        Rng rng(mix_seed(seed, 100 + e));
        for (std::size_t p = 0; p < phases.size(); ++p) {
            const double begin = phases[p].start;
            const double end = p + 1 < phases.size() ? std::min(phases[p + 1].start, traffic.horizon) : traffic.horizon;
            const double rate = phases[p].rates[e];
            if (rate <= 0.0 || begin >= end) continue;
            for (double t = begin + rng.exponential(rate); t < end; t += rng.exponential(rate))
                out.push_back({t, static_cast<int>(e)});
        }
    }
    std::sort(out.begin(), out.end(), [](const Arrival& a, const Arrival& b) {
        return a.time != b.time ? a.time < b.time : a.expert < b.expert;
    });
    return out;
}

struct Job {
    std::size_t query;
    bool direct;  // true for the target expert's own job
};

struct Event {
    double time;
    std::uint64_t seq;
    int server;  // -1 for arrivals
    std::size_t query;
    bool operator>(const Event& o) const { return time != o.time ? time > o.time : seq > o.seq; }
};

struct QueryState {
    std::size_t pool_row = 0;
    int pending_decode = 0;
    bool answered = false;
};

// Memoized per-(input row, expert) agreement between decode and direct argmax.
class AgreementOracle {
public:
    explicit AgreementOracle(const SimModels& m) : m_(m) {}

    bool agrees(std::size_t row, int expert) {
        auto it = cache_.find(row);
        if (it == cache_.end()) it = cache_.emplace(row, compute(row)).first;
        return it->second[static_cast<std::size_t>(expert)];
    }

private:
    std::vector<bool> compute(std::size_t row) {
        const Vector x = m_.query_inputs->row(static_cast<Eigen::Index>(row)).transpose();
        std::vector<Vector> outs;
        for (const auto& e : m_.experts) outs.push_back(forward(e, x));
        const Vector coded = forward(*m_.coded, x);
        std::vector<bool> res;
        for (int i = 0; i < static_cast<int>(outs.size()); ++i)
            res.push_back(argmax(decode(i, coded, outs, *m_.weights)) == argmax(outs[static_cast<std::size_t>(i)]));
        return res;
    }

    const SimModels& m_;
    std::map<std::size_t, std::vector<bool>> cache_;
};

}  // namespace

SimResult run_sim(std::span<const ServerSpec> servers, const TrafficSpec& traffic, Policy policy,
                  const SimModels& models, std::uint64_t seed) {
    const int n = static_cast<int>(models.experts.size());
    if (n < 1) throw ValidationError("simulation needs at least one expert");
    traffic.validate(n);

    std::vector<int> expert_server(static_cast<std::size_t>(n), -1);
    int coded_server = -1;
    for (std::size_t s = 0; s < servers.size(); ++s) {
        servers[s].validate();
        const int h = servers[s].hosted_model;
        if (h == kCodedServer) {
            if (coded_server >= 0) throw ValidationError("only one coded server is supported");
            coded_server = static_cast<int>(s);
        } else if (h >= 0 && h < n && expert_server[static_cast<std::size_t>(h)] < 0) {
            expert_server[static_cast<std::size_t>(h)] = static_cast<int>(s);
        } else {
            throw ValidationError("each expert needs exactly one server");
        }
    }
    for (int s : expert_server)
        if (s < 0) throw ValidationError("each expert needs exactly one server");
    if (!models.query_inputs || models.query_inputs->rows() == 0)
        throw ValidationError("simulation needs a nonempty query input pool");
    if (policy == Policy::CodedRecovery) {
        if (coded_server < 0 || !models.coded || !models.weights)
            throw ValidationError("coded recovery requires a coded server and coded model");
        if (models.weights->size() != n) throw DimensionMismatch("coding weights do not match expert count");
    }

    const auto arrivals = generate_arrivals(traffic, seed);
    SimResult result;
    result.records.resize(arrivals.size());
    std::vector<QueryState> state(arrivals.size());
    Rng input_rng(mix_seed(seed, 200));

    std::vector<Rng> server_rng;
    for (const auto& s : servers) server_rng.emplace_back(mix_seed(seed, 1000 + static_cast<std::uint64_t>(s.hosted_model + 1)));
    std::vector<std::deque<Job>> queue(servers.size());
    std::vector<std::optional<Job>> busy(servers.size());

    std::priority_queue<Event, std::vector<Event>, std::greater<>> events;
    std::uint64_t seq = 0;
    for (std::size_t q = 0; q < arrivals.size(); ++q) events.push({arrivals[q].time, seq++, -1, q});

    AgreementOracle oracle(models);

    auto start_next = [&](std::size_t s, double now) {
        if (busy[s] || queue[s].empty()) return;
        busy[s] = queue[s].front();
        queue[s].pop_front();
        const auto& spec = servers[s];
        auto& rng = server_rng[s];
        const bool straggle = rng.bernoulli(spec.straggler_probability);
        double service = spec.distribution == ServiceDistribution::Exponential ? rng.exponential(spec.service_rate)
                                                                               : 1.0 / spec.service_rate;
        if (straggle) service *= spec.straggler_slowdown;
        events.push({now + service, seq++, static_cast<int>(s), busy[s]->query});
    };

    auto answer = [&](std::size_t q, double now, AnswerPath path) {
        auto& st = state[q];
        if (st.answered) return;
        st.answered = true;
        result.records[q].completed = true;
        result.records[q].completion = now;
        result.records[q].path = path;
    };

    while (!events.empty() && events.top().time <= traffic.horizon) {
        const Event ev = events.top();
        events.pop();
        if (ev.server < 0) {
            const std::size_t q = ev.query;
            auto& rec = result.records[q];
            rec.id = q;
            rec.expert = arrivals[q].expert;
            rec.arrival = ev.time;
            state[q].pool_row = static_cast<std::size_t>(input_rng.index(static_cast<std::uint64_t>(models.query_inputs->rows())));
            const auto direct = static_cast<std::size_t>(expert_server[static_cast<std::size_t>(rec.expert)]);
            queue[direct].push_back({q, true});
            start_next(direct, ev.time);
            if (policy == Policy::CodedRecovery) {
                std::vector<std::size_t> helpers{static_cast<std::size_t>(coded_server)};
                for (int j = 0; j < n; ++j)
                    if (j != rec.expert) helpers.push_back(static_cast<std::size_t>(expert_server[static_cast<std::size_t>(j)]));
                state[q].pending_decode = static_cast<int>(helpers.size());
                for (auto s : helpers) {
                    queue[s].push_back({q, false});
                    start_next(s, ev.time);
                }
            }
            continue;
        }

        const auto s = static_cast<std::size_t>(ev.server);
        const Job job = *busy[s];
        busy[s].reset();
        if (job.direct) {
            answer(job.query, ev.time, AnswerPath::Direct);
        } else if (--state[job.query].pending_decode == 0) {
            auto& rec = result.records[job.query];
            rec.agrees = oracle.agrees(state[job.query].pool_row, rec.expert);
            answer(job.query, ev.time, AnswerPath::Decoded);
        }
        start_next(s, ev.time);
    }

    // Every arrival precedes the horizon, so all records were initialized above.
    const bool any_done = std::any_of(result.records.begin(), result.records.end(),
                                      [](const QueryRecord& r) { return r.completed; });
    if (!any_done) {
        result.report.policy = policy;
        result.report.total_arrivals = result.records.size();
    } else {
        result.report = summarize(result.records, policy);
    }
    return result;
}

double offline_decode_agreement(const SimModels& models, std::span<const double> arrival_rates) {
    const int n = static_cast<int>(models.experts.size());
    if (!models.coded || !models.weights || !models.query_inputs)
        throw ValidationError("offline agreement needs coded model, weights and inputs");
    if (static_cast<int>(arrival_rates.size()) != n) throw ValidationError("need one arrival rate per expert");
    double total_rate = 0.0;
    for (double r : arrival_rates) total_rate += r;
    if (!(total_rate > 0.0)) throw ValidationError("offline agreement needs a positive total arrival rate");

    AgreementOracle oracle(models);
    double acc = 0.0;
    const auto rows = static_cast<std::size_t>(models.query_inputs->rows());
    for (int i = 0; i < n; ++i) {
        std::size_t hits = 0;
        for (std::size_t r = 0; r < rows; ++r) hits += oracle.agrees(r, i) ? 1 : 0;
        acc += arrival_rates[static_cast<std::size_t>(i)] / total_rate * static_cast<double>(hits) / static_cast<double>(rows);
    }
    return acc;
}

std::string records_csv(std::span<const QueryRecord> records) {
    std::string out = "id,expert,arrival,completion,completed,path,agrees\n";
    for (const auto& r : records) {
        out += std::to_string(r.id) + "," + std::to_string(r.expert) + "," + format_double(r.arrival) + ",";
        out += (r.completed ? format_double(r.completion) : std::string()) + ",";
        out += std::string(r.completed ? "1" : "0") + ",";
        out += std::string(r.path == AnswerPath::Decoded ? "decoded" : "direct") + ",";
        out += r.agrees ? (*r.agrees ? "1" : "0") : "";
        out += "\n";
    }
    return out;
}

}  // namespace coin
