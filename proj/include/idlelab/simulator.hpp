#pragma once

#include "idlelab/cstates.hpp"
#include "idlelab/intervals.hpp"
#include "idlelab/queueing.hpp"
#include "idlelab/trace.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace idlelab {

enum class DispatchPolicy { LowestIndex, RandomIdle, LongestIdleFirst };

std::string to_string(DispatchPolicy policy);
DispatchPolicy dispatch_from_string(const std::string& name);

// Fully determines a run: identical configs give bit-identical results.
struct SimConfig {
    QueueParams params;
    std::uint64_t seed = 1;
    std::uint64_t arrivals = 0;        // serviced jobs after warmup
    std::uint64_t warmup_arrivals = 0; // serviced jobs discarded
    // M/M/c only; per-core for MM1/CxMM1, global for MMc.
    DispatchPolicy dispatch = DispatchPolicy::LowestIndex;

    void validate() const;
};

// Measurement-window view of one run. Times are shifted so the window
// starts at 0; intervals are sorted, disjoint, within [0, horizon].
struct SimResult {
    QueueParams params;
    Nanos horizon = 0;
    std::vector<double> busy_fraction;             // per core
    std::vector<Nanos> busy_ns;                    // per core, within window
    std::vector<std::vector<Interval>> core_idle;  // per core
    std::vector<Interval> package_idle;            // all cores idle
    std::uint64_t jobs = 0;                        // serviced inside window

    void validate() const;
};

// Open-loop Poisson arrivals, exponential service, FIFO per server
// (MM1/CxMM1) or one shared FIFO feeding c servers (MMc).
SimResult simulate(const SimConfig& config);

struct BandedFractions {
    std::vector<double> fractions; // one per consecutive edge pair
    bool degenerate = false;       // no intervals at the chosen level
};

struct SimLevel {
    enum class Kind { Core, Package } kind = Kind::Package;
    int core = 0;

    static SimLevel Core(int index) { return {Kind::Core, index}; }
    static SimLevel Package() { return {Kind::Package, 0}; }
};

// Wall-clock fraction spent in idle periods whose duration falls in each
// [edge_i, edge_i+1) band. Edges are seconds, start at 0, strictly
// increasing; the last may be infinity.
BandedFractions empirical_idle_distribution(const SimResult& result,
                                            SimLevel level,
                                            const std::vector<double>& band_edges);

struct GovernorPolicy {
    enum class Kind { Oracle, Static, Ewma };
    Kind kind = Kind::Oracle;
    std::string static_state; // Static only
    double alpha = 0.3;       // Ewma only, in (0, 1]
    CStateTable table;

    void validate() const;
};

struct ReplayResult {
    ResidencyReport report; // active, shallow, transition-overhead, states
    std::uint64_t mispredictions = 0; // interval shorter than chosen target
    std::uint64_t intervals = 0;
};

inline constexpr const char* kTransitionOverheadName = "transition-overhead";

// Replays one core's idle intervals under a governor. Each interval of
// length L with chosen state s credits max(0, L - exit_latency(s)) to s and
// the rest to the transition-overhead bucket.
ReplayResult governor_replay(const SimResult& result, const GovernorPolicy& policy,
                             int core);

// Simulated idleness in the trace_io interval format. States label each
// interval via oracle_select when a table is given, otherwise "idle".
IdleIntervalTrace to_trace(const SimResult& result,
                           const std::optional<CStateTable>& classify = std::nullopt);

} // namespace idlelab
