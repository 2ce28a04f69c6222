#include "idlelab/trace.hpp"

#include "idlelab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace idlelab {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current += ch;
        }
    }
    fields.push_back(current);
    return fields;
}

std::string strip_cr(std::string line) {
    if (!line.empty() && line.back() == '\r')
        line.pop_back();
    return line;
}

[[noreturn]] void row_error(std::size_t row, const std::string& what) {
    throw ParseError("row " + std::to_string(row) + ": " + what);
}

int parse_int(const std::string& text, std::size_t row, const std::string& what) {
    char* end = nullptr;
    long value = std::strtol(text.c_str(), &end, 10);
    if (text.empty() || end == nullptr || *end != '\0')
        row_error(row, "malformed " + what + " '" + text + "'");
    return static_cast<int>(value);
}

double parse_fraction(const std::string& text, std::size_t row) {
    char* end = nullptr;
    double value = std::strtod(text.c_str(), &end);
    if (text.empty() || end == nullptr || *end != '\0' || !std::isfinite(value))
        row_error(row, "malformed fraction '" + text + "'");
    return value;
}

} // namespace

void IdleIntervalTrace::validate() const {
    if (cores < 1)
        throw ValidationError("trace must declare at least one core");
    if (horizon <= 0)
        throw ValidationError("trace horizon must be positive");
    if (per_core.size() != static_cast<std::size_t>(cores))
        throw ValidationError("trace per-core list count does not match cores");
    for (int core = 0; core < cores; ++core) {
        const auto& list = per_core[core];
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto& iv = list[i];
            if (iv.state.empty())
                throw ValidationError("empty state name on core " + std::to_string(core));
            if (iv.begin < 0 || iv.begin >= iv.end || iv.end > horizon)
                throw ValidationError("interval out of bounds on core " +
                                      std::to_string(core));
            if (i > 0 && iv.begin < list[i - 1].end)
                throw ValidationError("overlapping intervals on core " +
                                      std::to_string(core));
        }
    }
}

IdleIntervalTrace parse_interval_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("row 1: empty document, expected preamble "
                         "'# horizon_us=<value> cores=<n>'");
    line = strip_cr(line);
    Nanos horizon = 0;
    int cores = 0;
    {
        std::istringstream head(line);
        std::string hash, horizon_kv, cores_kv;
        head >> hash >> horizon_kv >> cores_kv;
        if (hash != "#" || horizon_kv.rfind("horizon_us=", 0) != 0 ||
            cores_kv.rfind("cores=", 0) != 0)
            throw ParseError("row 1: missing preamble "
                             "'# horizon_us=<value> cores=<n>'");
        try {
            horizon = parse_us(horizon_kv.substr(11));
        } catch (const ParseError& e) {
            throw ParseError(std::string("row 1: bad horizon_us: ") + e.what());
        }
        cores = parse_int(cores_kv.substr(6), 1, "cores");
    }
    if (cores < 1)
        throw ParseError("row 1: cores must be >= 1");
    if (horizon <= 0)
        throw ParseError("row 1: horizon_us must be > 0");

    if (!std::getline(in, line))
        throw ParseError("row 2: missing header 'core,start_us,end_us,state'");
    if (strip_cr(line) != "core,start_us,end_us,state")
        throw ParseError("row 2: expected header 'core,start_us,end_us,state'");

    struct Row {
        StateInterval interval;
        std::size_t row;
    };
    std::vector<std::vector<Row>> rows(static_cast<std::size_t>(cores));
    std::size_t row_number = 2;
    while (std::getline(in, line)) {
        ++row_number;
        line = strip_cr(line);
        if (line.empty())
            continue;
        auto fields = split_fields(line);
        if (fields.size() != 4)
            row_error(row_number, "expected 4 fields, got " +
                                      std::to_string(fields.size()));
        int core = parse_int(fields[0], row_number, "core index");
        if (core < 0 || core >= cores)
            row_error(row_number, "core index " + std::to_string(core) +
                                      " outside declared cores=" +
                                      std::to_string(cores));
        StateInterval iv;
        try {
            iv.begin = parse_us(fields[1]);
            iv.end = parse_us(fields[2]);
        } catch (const ParseError& e) {
            row_error(row_number, e.what());
        }
        iv.state = fields[3];
        if (iv.state.empty())
            row_error(row_number, "empty state name");
        if (iv.end <= iv.begin)
            row_error(row_number, "interval end must be after start");
        if (iv.end > horizon)
            row_error(row_number, "interval ends after the declared horizon");
        rows[static_cast<std::size_t>(core)].push_back({std::move(iv), row_number});
    }

    IdleIntervalTrace trace;
    trace.cores = cores;
    trace.horizon = horizon;
    trace.per_core.resize(static_cast<std::size_t>(cores));
    for (int core = 0; core < cores; ++core) {
        auto& list = rows[static_cast<std::size_t>(core)];
        std::stable_sort(list.begin(), list.end(), [](const Row& a, const Row& b) {
            return a.interval.begin < b.interval.begin;
        });
        for (std::size_t i = 0; i < list.size(); ++i) {
            if (i > 0 && list[i].interval.begin < list[i - 1].interval.end)
                row_error(list[i].row, "overlapping intervals on core " +
                                           std::to_string(core));
            trace.per_core[static_cast<std::size_t>(core)].push_back(
                std::move(list[i].interval));
        }
    }
    trace.validate();
    return trace;
}

IdleIntervalTrace parse_interval_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open trace file '" + path + "'");
    try {
        return parse_interval_trace(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

void write_interval_trace(const IdleIntervalTrace& trace, std::ostream& out) {
    trace.validate();
    out << "# horizon_us=" << format_us(trace.horizon) << " cores=" << trace.cores
        << "\n";
    out << "core,start_us,end_us,state\n";
    for (int core = 0; core < trace.cores; ++core)
        for (const auto& iv : trace.per_core[static_cast<std::size_t>(core)])
            out << core << ',' << format_us(iv.begin) << ',' << format_us(iv.end)
                << ',' << iv.state << '\n';
}

std::string interval_trace_to_csv(const IdleIntervalTrace& trace) {
    std::ostringstream out;
    write_interval_trace(trace, out);
    return out.str();
}

std::vector<ResidencyReport> residency_from_trace(const IdleIntervalTrace& trace,
                                                  const std::string& active_name) {
    trace.validate();
    std::vector<ResidencyReport> reports;
    double horizon_s = ns_to_s(trace.horizon);
    for (int core = 0; core < trace.cores; ++core) {
        const auto& list = trace.per_core[static_cast<std::size_t>(core)];
        std::map<std::string, Nanos> per_state;
        Nanos idle_total = 0;
        for (const auto& iv : list) {
            per_state[iv.state] += iv.end - iv.begin;
            idle_total += iv.end - iv.begin;
        }
        ResidencyReport report;
        report.scope = Scope::Core;
        report.horizon_s = horizon_s;
        report.add(active_name, static_cast<double>(trace.horizon - idle_total) /
                                    static_cast<double>(trace.horizon));
        for (const auto& [state, ns] : per_state)
            report.add(state, static_cast<double>(ns) /
                                  static_cast<double>(trace.horizon));
        report.validate();
        reports.push_back(std::move(report));
    }
    return reports;
}

std::vector<Interval> package_overlap(
    const IdleIntervalTrace& trace,
    const std::optional<std::set<std::string>>& filter) {
    trace.validate();
    std::vector<std::vector<Interval>> per_core;
    per_core.reserve(static_cast<std::size_t>(trace.cores));
    for (const auto& list : trace.per_core) {
        std::vector<Interval> plain;
        for (const auto& iv : list) {
            if (filter && filter->count(iv.state) == 0)
                continue;
            // adjacent intervals merge so state boundaries do not split
            // a continuous idle span
            if (!plain.empty() && plain.back().end == iv.begin)
                plain.back().end = iv.end;
            else
                plain.push_back({iv.begin, iv.end});
        }
        per_core.push_back(std::move(plain));
    }
    return intersect_all(per_core);
}

ResidencyReport package_residency_from_trace(
    const IdleIntervalTrace& trace, const CStateTable& table,
    const std::optional<std::set<std::string>>& filter) {
    table.validate();
    if (table.scope != Scope::Package)
        throw ValidationError("package residency needs a package-scope table");
    auto overlap = package_overlap(trace, filter);
    ResidencyReport report;
    report.scope = Scope::Package;
    report.horizon_s = ns_to_s(trace.horizon);
    Nanos overlap_total = total_length(overlap);
    report.add(table.active_name,
               static_cast<double>(trace.horizon - overlap_total) /
                   static_cast<double>(trace.horizon));
    report.add(table.idle_shallow_name, 0.0);
    for (const auto& s : table.states)
        report.add(s.name, 0.0);
    for (const auto& iv : overlap)
        report.add(oracle_select(table, ns_to_s(iv.length())),
                   static_cast<double>(iv.length()) /
                       static_cast<double>(trace.horizon));
    report.validate();
    return report;
}

void ResidencySummary::validate() const {
    for (const auto& [core, rows] : per_core) {
        if (core < 0)
            throw ValidationError("negative core index in residency summary");
        double sum = 0.0;
        for (const auto& [state, fraction] : rows) {
            if (fraction < 0.0 || fraction > 1.0)
                throw ValidationError("fraction out of [0,1] for core " +
                                      std::to_string(core) + " state '" + state + "'");
            sum += fraction;
        }
        if (sum > 1.0 + 1e-3)
            throw ValidationError("core " + std::to_string(core) +
                                  " fractions sum to " + format_sig6(sum) +
                                  ", must be <= 1");
    }
}

ResidencySummary parse_residency_summary(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || strip_cr(line) != "core,state,fraction")
        throw ParseError("row 1: expected header 'core,state,fraction'");
    ResidencySummary summary;
    std::set<std::pair<int, std::string>> seen;
    std::size_t row_number = 1;
    while (std::getline(in, line)) {
        ++row_number;
        line = strip_cr(line);
        if (line.empty())
            continue;
        auto fields = split_fields(line);
        if (fields.size() != 3)
            row_error(row_number, "expected 3 fields, got " +
                                      std::to_string(fields.size()));
        int core = parse_int(fields[0], row_number, "core index");
        if (core < 0)
            row_error(row_number, "negative core index");
        const std::string& state = fields[1];
        if (state.empty())
            row_error(row_number, "empty state name");
        double fraction = parse_fraction(fields[2], row_number);
        if (fraction < 0.0 || fraction > 1.0)
            row_error(row_number, "fraction " + format_sig6(fraction) +
                                      " outside [0,1]");
        if (!seen.insert({core, state}).second)
            row_error(row_number, "duplicate (core,state) row (" +
                                      std::to_string(core) + "," + state + ")");
        summary.per_core[core].emplace_back(state, fraction);
    }
    summary.validate();
    return summary;
}

ResidencySummary parse_residency_summary_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open residency summary '" + path + "'");
    try {
        return parse_residency_summary(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string residency_summary_to_csv(const ResidencySummary& summary) {
    std::ostringstream out;
    out << "core,state,fraction\n";
    for (const auto& [core, rows] : summary.per_core)
        for (const auto& [state, fraction] : rows)
            out << core << ',' << state << ',' << format_sig6(fraction) << '\n';
    return out.str();
}

ResidencyReport summary_to_report(const ResidencySummary& summary, int core,
                                  Scope scope, const std::string& active_name) {
    summary.validate();
    auto it = summary.per_core.find(core);
    if (it == summary.per_core.end())
        throw ValidationError("residency summary has no rows for core " +
                              std::to_string(core));
    ResidencyReport report;
    report.scope = scope;
    report.add(active_name, 0.0);
    double sum = 0.0;
    for (const auto& [state, fraction] : it->second) {
        report.add(state, fraction);
        sum += fraction;
    }
    // unlisted remainder is active time the tool did not attribute
    if (sum < 1.0)
        report.add(active_name, 1.0 - sum);
    report.validate(1e-3);
    return report;
}

ResidencyReport summary_mean_report(const ResidencySummary& summary, Scope scope,
                                    const std::string& active_name) {
    if (summary.per_core.empty())
        throw ValidationError("residency summary is empty");
    ResidencyReport mean;
    mean.scope = scope;
    double n = static_cast<double>(summary.per_core.size());
    for (const auto& [core, rows] : summary.per_core) {
        ResidencyReport report = summary_to_report(summary, core, scope, active_name);
        for (const auto& [state, fraction] : report.entries)
            mean.add(state, fraction / n);
    }
    mean.validate(1e-3);
    return mean;
}

} // namespace idlelab
