#pragma once

#include "idlelab/queueing.hpp"
#include "idlelab/units.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace idlelab {

enum class Scope { Core, Package };

std::string to_string(Scope scope);

// One sleep state. target_residency is the selection threshold (break-even
// time); exit_latency is what a transition costs on wakeup.
struct CState {
    std::string name;
    double exit_latency = 0.0;     // seconds
    double target_residency = 0.0; // seconds
    int depth_rank = 0;            // 0 = shallowest
};

// Ordered sleep-state table for one scope. states are ascending in
// target_residency (strictly; ties would make selection ambiguous).
struct CStateTable {
    Scope scope = Scope::Core;
    std::vector<CState> states;
    std::string active_name;       // "C0" / "PC0"
    std::string idle_shallow_name; // idle but no savings: "POLL" / "PC0-idle"

    void validate() const;
    const CState* find(const std::string& name) const;
};

// JSON document: {"scope": "core"|"package",
//                 "states": [{"name", "exit_latency_us",
//                             "target_residency_us"}, ...],
//                 optional "active_name", "idle_shallow_name"}.
// depth_rank follows ascending target_residency.
CStateTable load_cstate_table(std::istream& in);
CStateTable load_cstate_table_file(const std::string& path);

// Wall-clock share per state name. Entries keep a shallow-to-deep order
// where the producer defines one; produced reports end with the deepest
// state so gap headlines can anchor on the last entry.
struct ResidencyReport {
    Scope scope = Scope::Core;
    std::vector<std::pair<std::string, double>> entries;
    std::optional<double> horizon_s;

    double at(const std::string& name) const; // 0 when absent
    bool has(const std::string& name) const;
    void add(const std::string& name, double fraction);
    double sum() const;

    // Sum-to-1 check; produced reports use 1e-6, measured ones 1e-3.
    void validate(double tolerance = 1e-6) const;
};

std::string report_to_json(const ResidencyReport& report);
std::string report_to_csv(const ResidencyReport& report);
ResidencyReport report_from_json(const std::string& text);

// Deepest state whose target_residency fits within idle_len; the shallow
// bucket when idle_len is below every threshold.
std::string oracle_select(const CStateTable& table, double idle_len);

// Upper bound with a clairvoyant governor and free transitions: active
// share rho, idle bands of the core idle law mapped onto the table
// thresholds. Requires scope Core, kind != MMc.
ResidencyReport ideal_core_residency(const QueueParams& params,
                                     const CStateTable& table);

// Same bound over the package idle law. Requires scope Package,
// kind CxMM1 or MMc (MM1 fan-out accepted as CxMM1).
ResidencyReport ideal_package_residency(const QueueParams& params,
                                        const CStateTable& table);

struct GapEntry {
    std::string state;
    double ideal = 0.0;
    double measured = 0.0;
    double gap = 0.0; // ideal - measured
};

struct GapReport {
    Scope scope = Scope::Core;
    std::vector<GapEntry> entries;
    std::string headline_state;
    double headline_gap = 0.0;
};

// Per-state ideal - measured; states missing on one side count as 0.
// Headline anchors on the ideal report's deepest (last) entry.
GapReport residency_gap(const ResidencyReport& ideal,
                        const ResidencyReport& measured);

} // namespace idlelab
