#pragma once

#include "idlelab/cstates.hpp"
#include "idlelab/intervals.hpp"
#include "idlelab/units.hpp"

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace idlelab {

// Idle interval with the sleep state the core reported for it.
struct StateInterval {
    Nanos begin = 0;
    Nanos end = 0;
    std::string state;

    friend bool operator==(const StateInterval&, const StateInterval&) = default;
};

// Per-core idle intervals over a common horizon. Intervals are half-open,
// sorted, and disjoint per core; everything outside them is active time.
struct IdleIntervalTrace {
    int cores = 0;
    Nanos horizon = 0;
    std::vector<std::vector<StateInterval>> per_core;

    void validate() const;
};

// CSV with preamble `# horizon_us=<value> cores=<n>` then header
// `core,start_us,end_us,state`. Rows may arrive unsorted; parse errors name
// the 1-based row.
IdleIntervalTrace parse_interval_trace(std::istream& in);
IdleIntervalTrace parse_interval_trace_file(const std::string& path);
void write_interval_trace(const IdleIntervalTrace& trace, std::ostream& out);
std::string interval_trace_to_csv(const IdleIntervalTrace& trace);

// Per-core wall-clock share per state; the uncovered remainder goes to
// active_name. Entries: active first, then states in sorted-name order.
std::vector<ResidencyReport> residency_from_trace(const IdleIntervalTrace& trace,
                                                  const std::string& active_name = "C0");

// Maximal spans where every core is simultaneously idle. When filter is
// set, only intervals whose state is in the filter count as idle.
std::vector<Interval> package_overlap(
    const IdleIntervalTrace& trace,
    const std::optional<std::set<std::string>>& filter = std::nullopt);

// Overlap spans classified against the package table via oracle_select;
// active share = 1 - total overlap fraction.
ResidencyReport package_residency_from_trace(
    const IdleIntervalTrace& trace, const CStateTable& table,
    const std::optional<std::set<std::string>>& filter = std::nullopt);

// Turbostat-style per-core residency fractions, `core,state,fraction`.
struct ResidencySummary {
    // core -> (state, fraction) rows in input order
    std::map<int, std::vector<std::pair<std::string, double>>> per_core;

    void validate() const; // per-core sums must be <= 1 + 1e-3
};

ResidencySummary parse_residency_summary(std::istream& in);
ResidencySummary parse_residency_summary_file(const std::string& path);
std::string residency_summary_to_csv(const ResidencySummary& summary);

// One core's rows as a report; the unlisted remainder goes to active_name.
ResidencyReport summary_to_report(const ResidencySummary& summary, int core,
                                  Scope scope, const std::string& active_name = "C0");

// Unweighted mean across cores (states unioned, missing treated as 0).
ResidencyReport summary_mean_report(const ResidencySummary& summary, Scope scope,
                                    const std::string& active_name = "C0");

} // namespace idlelab
