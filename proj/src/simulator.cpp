#include "idlelab/simulator.hpp"

#include "idlelab/errors.hpp"
#include "idlelab/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace idlelab {

namespace {

constexpr Nanos kNever = std::numeric_limits<Nanos>::max();

// Stream ids: fixed so core-count changes never perturb other streams.
constexpr std::uint64_t kAggregateArrivalStream = 0;
constexpr std::uint64_t kDispatchStream = 1;
std::uint64_t arrival_stream(int core) {
    return 2 + 2 * static_cast<std::uint64_t>(core);
}
std::uint64_t service_stream(int core) {
    return 3 + 2 * static_cast<std::uint64_t>(core);
}

// Durations are sampled in seconds and live as integer nanoseconds from
// then on; zero-length events are bumped to 1 ns.
Nanos draw_ns(SplitStream& stream, double rate) {
    auto ns = static_cast<Nanos>(std::llround(stream.next_exponential(rate) * 1e9));
    return ns < 1 ? 1 : ns;
}

struct ServerRun {
    std::vector<Interval> job_spans; // service episodes, sorted, maybe adjacent
    Nanos warmup_done = 0;           // completion of the last warmup job
    Nanos end = 0;                   // completion of the last simulated job
};

ServerRun run_single_queue(const SimConfig& config, int core) {
    ServerRun run;
    SplitStream arrivals(config.seed, arrival_stream(core));
    SplitStream services(config.seed, service_stream(core));
    double service_rate = 1.0 / config.params.service_mean;
    std::uint64_t total = config.warmup_arrivals + config.arrivals;
    run.job_spans.reserve(total);
    Nanos arrival = 0;
    Nanos busy_until = 0;
    for (std::uint64_t j = 1; j <= total; ++j) {
        arrival += draw_ns(arrivals, config.params.lambda_per_core);
        Nanos start = std::max(arrival, busy_until);
        Nanos end = start + draw_ns(services, service_rate);
        run.job_spans.push_back({start, end});
        busy_until = end;
        if (j == config.warmup_arrivals)
            run.warmup_done = end;
    }
    run.end = busy_until;
    return run;
}

int pick_idle_server(DispatchPolicy policy, const std::vector<Nanos>& completion,
                     const std::vector<Nanos>& idle_since, SplitStream& dispatch) {
    int cores = static_cast<int>(completion.size());
    switch (policy) {
    case DispatchPolicy::LowestIndex:
        for (int k = 0; k < cores; ++k)
            if (completion[static_cast<std::size_t>(k)] == kNever)
                return k;
        return -1;
    case DispatchPolicy::RandomIdle: {
        std::vector<int> idle;
        for (int k = 0; k < cores; ++k)
            if (completion[static_cast<std::size_t>(k)] == kNever)
                idle.push_back(k);
        if (idle.empty())
            return -1;
        return idle[dispatch.next_below(static_cast<std::uint32_t>(idle.size()))];
    }
    case DispatchPolicy::LongestIdleFirst: {
        int best = -1;
        for (int k = 0; k < cores; ++k) {
            auto ks = static_cast<std::size_t>(k);
            if (completion[ks] != kNever)
                continue;
            if (best < 0 ||
                idle_since[ks] < idle_since[static_cast<std::size_t>(best)])
                best = k;
        }
        return best;
    }
    }
    return -1;
}

// One shared FIFO feeding c servers. Ties at identical nanosecond stamps:
// completions before arrivals, lowest server index first.
std::vector<ServerRun> run_shared_queue(const SimConfig& config, Nanos& window_start,
                                        Nanos& window_end) {
    int cores = config.params.cores;
    SplitStream arrivals(config.seed, kAggregateArrivalStream);
    SplitStream dispatch(config.seed, kDispatchStream);
    std::vector<SplitStream> services;
    services.reserve(static_cast<std::size_t>(cores));
    for (int k = 0; k < cores; ++k)
        services.emplace_back(config.seed, service_stream(k));

    double aggregate_rate = config.params.lambda_per_core * cores;
    double service_rate = 1.0 / config.params.service_mean;
    std::uint64_t target = config.warmup_arrivals + config.arrivals;

    std::vector<ServerRun> runs(static_cast<std::size_t>(cores));
    std::vector<Nanos> completion(static_cast<std::size_t>(cores), kNever);
    std::vector<Nanos> idle_since(static_cast<std::size_t>(cores), 0);
    Nanos next_arrival = draw_ns(arrivals, aggregate_rate);
    std::uint64_t queued = 0;
    std::uint64_t serviced = 0;
    window_start = 0;
    window_end = 0;

    auto start_service = [&](int server, Nanos now) {
        auto ks = static_cast<std::size_t>(server);
        Nanos end = now + draw_ns(services[ks], service_rate);
        runs[ks].job_spans.push_back({now, end});
        completion[ks] = end;
    };

    while (true) {
        int finishing = -1;
        for (int k = 0; k < cores; ++k) {
            auto ks = static_cast<std::size_t>(k);
            if (completion[ks] == kNever)
                continue;
            if (finishing < 0 ||
                completion[ks] < completion[static_cast<std::size_t>(finishing)])
                finishing = k;
        }
        Nanos next_completion =
            finishing >= 0 ? completion[static_cast<std::size_t>(finishing)] : kNever;
        if (next_completion <= next_arrival) {
            auto ks = static_cast<std::size_t>(finishing);
            Nanos now = next_completion;
            ++serviced;
            if (serviced == config.warmup_arrivals)
                window_start = now;
            if (serviced == target) {
                window_end = now;
                break;
            }
            if (queued > 0) {
                --queued;
                start_service(finishing, now);
            } else {
                completion[ks] = kNever;
                idle_since[ks] = now;
            }
        } else {
            Nanos now = next_arrival;
            next_arrival = now + draw_ns(arrivals, aggregate_rate);
            int server = pick_idle_server(config.dispatch, completion, idle_since,
                                          dispatch);
            if (server >= 0)
                start_service(server, now);
            else
                ++queued;
        }
    }
    return runs;
}

} // namespace

std::string to_string(DispatchPolicy policy) {
    switch (policy) {
    case DispatchPolicy::LowestIndex:
        return "lowest-index";
    case DispatchPolicy::RandomIdle:
        return "random-idle";
    case DispatchPolicy::LongestIdleFirst:
        return "longest-idle-first";
    }
    return "?";
}

DispatchPolicy dispatch_from_string(const std::string& name) {
    if (name == "lowest-index")
        return DispatchPolicy::LowestIndex;
    if (name == "random-idle")
        return DispatchPolicy::RandomIdle;
    if (name == "longest-idle-first")
        return DispatchPolicy::LongestIdleFirst;
    throw ValidationError("unknown dispatch policy '" + name +
                          "' (expected lowest-index, random-idle, "
                          "longest-idle-first)");
}

void SimConfig::validate() const {
    params.validate();
    if (arrivals < 1)
        throw ValidationError("simulation needs at least one arrival");
    if (params.kind != QueueKind::MMc && dispatch != DispatchPolicy::LowestIndex)
        throw ValidationError("dispatch policy applies only to the shared "
                              "queue; per-core queues have no dispatcher");
}

void SimResult::validate() const {
    if (horizon <= 0)
        throw ValidationError("simulation horizon must be positive");
    if (core_idle.size() != busy_fraction.size() ||
        core_idle.size() != busy_ns.size())
        throw ValidationError("per-core vectors disagree on core count");
    for (std::size_t core = 0; core < core_idle.size(); ++core) {
        if (!is_sorted_disjoint(core_idle[core]))
            throw ValidationError("core idle intervals not sorted/disjoint");
        if (!core_idle[core].empty() &&
            (core_idle[core].front().begin < 0 || core_idle[core].back().end > horizon))
            throw ValidationError("core idle intervals outside [0, horizon]");
        if (busy_ns[core] + total_length(core_idle[core]) != horizon)
            throw ValidationError("busy + idle time does not cover the horizon");
    }
    if (!is_sorted_disjoint(package_idle))
        throw ValidationError("package idle intervals not sorted/disjoint");
}

SimResult simulate(const SimConfig& config) {
    config.validate();
    int cores = config.params.cores;

    std::vector<ServerRun> runs;
    Nanos window_start = 0;
    Nanos window_end = 0;
    if (config.params.kind == QueueKind::MMc) {
        runs = run_shared_queue(config, window_start, window_end);
    } else {
        runs.reserve(static_cast<std::size_t>(cores));
        for (int core = 0; core < cores; ++core)
            runs.push_back(run_single_queue(config, core));
        window_end = kNever;
        for (const auto& run : runs) {
            window_start = std::max(window_start, run.warmup_done);
            window_end = std::min(window_end, run.end);
        }
    }
    if (window_start >= window_end)
        throw ValidationError("warmup consumed the whole simulated window; "
                              "increase arrivals or reduce warmup");

    SimResult result;
    result.params = config.params;
    result.horizon = window_end - window_start;
    for (auto& run : runs) {
        Nanos busy = 0;
        std::uint64_t jobs = 0;
        for (const auto& span : run.job_spans) {
            Nanos b = std::max(span.begin, window_start);
            Nanos e = std::min(span.end, window_end);
            if (b < e)
                busy += e - b;
            if (span.end > window_start && span.end <= window_end)
                ++jobs;
        }
        auto idle = complement(run.job_spans, window_start, window_end);
        for (auto& iv : idle) {
            iv.begin -= window_start;
            iv.end -= window_start;
        }
        result.busy_ns.push_back(busy);
        result.busy_fraction.push_back(static_cast<double>(busy) /
                                       static_cast<double>(result.horizon));
        result.core_idle.push_back(std::move(idle));
        result.jobs += jobs;
        run.job_spans.clear();
        run.job_spans.shrink_to_fit();
    }
    result.package_idle = intersect_all(result.core_idle);
    result.validate();
    return result;
}

BandedFractions empirical_idle_distribution(const SimResult& result, SimLevel level,
                                            const std::vector<double>& band_edges) {
    if (band_edges.size() < 2)
        throw DomainError("need at least two band edges");
    if (band_edges.front() != 0.0)
        throw DomainError("band edges must start at 0");
    for (std::size_t i = 1; i < band_edges.size(); ++i)
        if (!(band_edges[i] > band_edges[i - 1]))
            throw DomainError("band edges must be strictly increasing");

    const std::vector<Interval>* intervals = nullptr;
    if (level.kind == SimLevel::Kind::Package) {
        intervals = &result.package_idle;
    } else {
        if (level.core < 0 ||
            level.core >= static_cast<int>(result.core_idle.size()))
            throw ValidationError("core index out of range");
        intervals = &result.core_idle[static_cast<std::size_t>(level.core)];
    }

    std::vector<Nanos> edges_ns;
    edges_ns.reserve(band_edges.size());
    for (double edge : band_edges)
        edges_ns.push_back(std::isinf(edge) ? kNever : s_to_ns(edge));

    BandedFractions out;
    out.fractions.assign(band_edges.size() - 1, 0.0);
    if (intervals->empty()) {
        out.degenerate = true;
        return out;
    }
    std::vector<Nanos> band_time(out.fractions.size(), 0);
    for (const auto& iv : *intervals) {
        Nanos d = iv.length();
        auto it = std::upper_bound(edges_ns.begin(), edges_ns.end(), d);
        std::size_t band = static_cast<std::size_t>(it - edges_ns.begin());
        if (band == 0 || band > band_time.size())
            continue; // below first edge (impossible at 0) or past last edge
        band_time[band - 1] += d;
    }
    for (std::size_t i = 0; i < band_time.size(); ++i)
        out.fractions[i] = static_cast<double>(band_time[i]) /
                           static_cast<double>(result.horizon);
    return out;
}

void GovernorPolicy::validate() const {
    table.validate();
    if (kind == Kind::Static && table.find(static_state) == nullptr)
        throw ValidationError("static governor state '" + static_state +
                              "' not in the table");
    if (kind == Kind::Ewma && !(alpha > 0.0 && alpha <= 1.0))
        throw ValidationError("EWMA alpha must be in (0, 1], got " +
                              format_sig6(alpha));
}

ReplayResult governor_replay(const SimResult& result, const GovernorPolicy& policy,
                             int core) {
    policy.validate();
    if (core < 0 || core >= static_cast<int>(result.core_idle.size()))
        throw ValidationError("core index out of range");
    const auto& intervals = result.core_idle[static_cast<std::size_t>(core)];

    std::map<std::string, Nanos> exit_ns;
    std::map<std::string, Nanos> target_ns;
    exit_ns[policy.table.idle_shallow_name] = 0;
    target_ns[policy.table.idle_shallow_name] = 0;
    for (const auto& s : policy.table.states) {
        exit_ns[s.name] = s_to_ns(s.exit_latency);
        target_ns[s.name] = s_to_ns(s.target_residency);
    }

    std::map<std::string, Nanos> credit;
    Nanos overhead = 0;
    ReplayResult replay;
    double ewma = 0.0;
    bool have_history = false;
    for (const auto& iv : intervals) {
        Nanos length = iv.length();
        std::string chosen;
        switch (policy.kind) {
        case GovernorPolicy::Kind::Oracle:
            chosen = oracle_select(policy.table, ns_to_s(length));
            break;
        case GovernorPolicy::Kind::Static:
            chosen = policy.static_state;
            break;
        case GovernorPolicy::Kind::Ewma: {
            double predicted = have_history ? ewma : static_cast<double>(length);
            chosen = oracle_select(policy.table, predicted / kNanosPerSecond);
            break;
        }
        }
        if (policy.kind == GovernorPolicy::Kind::Ewma) {
            ewma = have_history ? policy.alpha * static_cast<double>(length) +
                                      (1.0 - policy.alpha) * ewma
                                : static_cast<double>(length);
            have_history = true;
        }
        Nanos exit = exit_ns.at(chosen);
        credit[chosen] += std::max<Nanos>(0, length - exit);
        overhead += std::min(length, exit);
        if (length < target_ns.at(chosen))
            ++replay.mispredictions;
        ++replay.intervals;
    }

    auto fraction = [&](Nanos ns) {
        return static_cast<double>(ns) / static_cast<double>(result.horizon);
    };
    ResidencyReport& report = replay.report;
    report.scope = policy.table.scope;
    report.horizon_s = ns_to_s(result.horizon);
    report.add(policy.table.active_name,
               fraction(result.busy_ns[static_cast<std::size_t>(core)]));
    report.add(policy.table.idle_shallow_name,
               fraction(credit[policy.table.idle_shallow_name]));
    // overhead sits before the table states so the deepest state stays last
    report.add(kTransitionOverheadName, fraction(overhead));
    for (const auto& s : policy.table.states)
        report.add(s.name, fraction(credit[s.name]));
    report.validate();
    return replay;
}

IdleIntervalTrace to_trace(const SimResult& result,
                           const std::optional<CStateTable>& classify) {
    IdleIntervalTrace trace;
    trace.cores = static_cast<int>(result.core_idle.size());
    trace.horizon = result.horizon;
    trace.per_core.resize(result.core_idle.size());
    for (std::size_t core = 0; core < result.core_idle.size(); ++core) {
        trace.per_core[core].reserve(result.core_idle[core].size());
        for (const auto& iv : result.core_idle[core]) {
            std::string state =
                classify ? oracle_select(*classify, ns_to_s(iv.length())) : "idle";
            trace.per_core[core].push_back({iv.begin, iv.end, std::move(state)});
        }
    }
    trace.validate();
    return trace;
}

} // namespace idlelab
