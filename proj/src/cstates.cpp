#include "idlelab/cstates.hpp"

#include "idlelab/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace idlelab {

std::string to_string(Scope scope) {
    return scope == Scope::Core ? "core" : "package";
}

void CStateTable::validate() const {
    if (states.empty())
        throw ValidationError("C-state table needs at least one state");
    if (active_name.empty() || idle_shallow_name.empty())
        throw ValidationError("C-state table needs active and idle-shallow names");
    std::set<std::string> names{active_name, idle_shallow_name};
    for (std::size_t i = 0; i < states.size(); ++i) {
        const CState& s = states[i];
        if (s.name.empty())
            throw ValidationError("C-state with empty name");
        if (!names.insert(s.name).second)
            throw ValidationError("duplicate C-state name '" + s.name + "'");
        if (s.exit_latency < 0)
            throw ValidationError("C-state '" + s.name + "' has negative exit latency");
        if (s.depth_rank != static_cast<int>(i))
            throw ValidationError("C-state depth ranks must be 0..n-1 in order");
        if (i > 0 && !(states[i - 1].target_residency < s.target_residency))
            throw ValidationError(
                "target residencies must be strictly increasing; '" +
                states[i - 1].name + "' and '" + s.name + "' tie or invert");
    }
}

const CState* CStateTable::find(const std::string& name) const {
    for (const auto& s : states)
        if (s.name == name)
            return &s;
    return nullptr;
}

CStateTable load_cstate_table(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("C-state table is not valid JSON: ") + e.what());
    }
    CStateTable table;
    try {
        std::string scope = doc.at("scope").get<std::string>();
        if (scope == "core")
            table.scope = Scope::Core;
        else if (scope == "package")
            table.scope = Scope::Package;
        else
            throw ParseError("C-state table scope must be 'core' or 'package'");
        table.active_name = table.scope == Scope::Core ? "C0" : "PC0";
        table.idle_shallow_name = table.scope == Scope::Core ? "POLL" : "PC0-idle";
        if (doc.contains("active_name"))
            table.active_name = doc.at("active_name").get<std::string>();
        if (doc.contains("idle_shallow_name"))
            table.idle_shallow_name = doc.at("idle_shallow_name").get<std::string>();
        for (const auto& item : doc.at("states")) {
            CState s;
            s.name = item.at("name").get<std::string>();
            s.exit_latency = item.at("exit_latency_us").get<double>() * 1e-6;
            s.target_residency = item.at("target_residency_us").get<double>() * 1e-6;
            table.states.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("C-state table document malformed: ") + e.what());
    }
    std::stable_sort(table.states.begin(), table.states.end(),
                     [](const CState& a, const CState& b) {
                         return a.target_residency < b.target_residency;
                     });
    for (std::size_t i = 0; i < table.states.size(); ++i)
        table.states[i].depth_rank = static_cast<int>(i);
    table.validate();
    return table;
}

CStateTable load_cstate_table_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open C-state table file '" + path + "'");
    try {
        return load_cstate_table(in);
    } catch (const Error& e) {
        throw ParseError(path + ": " + e.what());
    }
}

double ResidencyReport::at(const std::string& name) const {
    for (const auto& [state, fraction] : entries)
        if (state == name)
            return fraction;
    return 0.0;
}

bool ResidencyReport::has(const std::string& name) const {
    for (const auto& [state, fraction] : entries)
        if (state == name)
            return true;
    return false;
}

void ResidencyReport::add(const std::string& name, double fraction) {
    for (auto& [state, value] : entries) {
        if (state == name) {
            value += fraction;
            return;
        }
    }
    entries.emplace_back(name, fraction);
}

double ResidencyReport::sum() const {
    double total = 0.0;
    for (const auto& [state, fraction] : entries)
        total += fraction;
    return total;
}

void ResidencyReport::validate(double tolerance) const {
    for (const auto& [state, fraction] : entries) {
        if (state.empty())
            throw ValidationError("residency entry with empty state name");
        if (fraction < -1e-12 || fraction > 1.0 + 1e-12)
            throw ValidationError("residency for '" + state + "' out of [0,1]: " +
                                  format_sig6(fraction));
    }
    double total = sum();
    if (std::fabs(total - 1.0) > tolerance)
        throw ValidationError("residency entries sum to " + format_sig6(total) +
                              ", expected 1 within " + format_sig6(tolerance));
}

std::string report_to_json(const ResidencyReport& report) {
    nlohmann::ordered_json doc;
    doc["scope"] = to_string(report.scope);
    nlohmann::ordered_json entries = nlohmann::ordered_json::object();
    for (const auto& [state, fraction] : report.entries)
        entries[state] = round_sig6(fraction);
    doc["entries"] = entries;
    if (report.horizon_s)
        doc["horizon_s"] = round_sig6(*report.horizon_s);
    return doc.dump(2);
}

std::string report_to_csv(const ResidencyReport& report) {
    std::ostringstream out;
    out << "state,fraction\n";
    for (const auto& [state, fraction] : report.entries)
        out << state << ',' << format_sig6(fraction) << '\n';
    return out.str();
}

ResidencyReport report_from_json(const std::string& text) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("residency report: ") + e.what());
    }
    ResidencyReport report;
    try {
        std::string scope = doc.at("scope").get<std::string>();
        if (scope == "core")
            report.scope = Scope::Core;
        else if (scope == "package")
            report.scope = Scope::Package;
        else
            throw ParseError("residency report: unknown scope '" + scope + "'");
        for (const auto& [state, fraction] : doc.at("entries").items())
            report.add(state, fraction.get<double>());
        if (doc.contains("horizon_s"))
            report.horizon_s = doc.at("horizon_s").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("residency report: ") + e.what());
    }
    report.validate(1e-3);
    return report;
}

std::string oracle_select(const CStateTable& table, double idle_len) {
    if (idle_len < 0)
        throw DomainError("idle length must be >= 0");
    const CState* chosen = nullptr;
    for (const auto& s : table.states) {
        if (s.target_residency <= idle_len)
            chosen = &s;
        else
            break;
    }
    return chosen ? chosen->name : table.idle_shallow_name;
}

namespace {

// Shared band layout: active share, the sub-threshold bucket, then one band
// per state between consecutive thresholds (last band unbounded).
ResidencyReport banded_residency(const IdleLaw& law, const CStateTable& table) {
    ResidencyReport report;
    report.scope = table.scope;
    report.add(table.active_name, 1.0 - law.idle_fraction);
    double first_threshold = table.states.front().target_residency;
    report.add(table.idle_shallow_name,
               law.idle_fraction *
                   (1.0 - idle_tail_time_weighted(law.rate, first_threshold)));
    for (std::size_t i = 0; i < table.states.size(); ++i) {
        double lo_tail =
            idle_tail_time_weighted(law.rate, table.states[i].target_residency);
        double hi_tail =
            i + 1 < table.states.size()
                ? idle_tail_time_weighted(law.rate, table.states[i + 1].target_residency)
                : 0.0;
        report.add(table.states[i].name, law.idle_fraction * (lo_tail - hi_tail));
    }
    report.validate();
    return report;
}

} // namespace

ResidencyReport ideal_core_residency(const QueueParams& params,
                                     const CStateTable& table) {
    table.validate();
    if (table.scope != Scope::Core)
        throw ValidationError("ideal_core_residency needs a core-scope table");
    return banded_residency(core_idle_law(params), table);
}

ResidencyReport ideal_package_residency(const QueueParams& params,
                                        const CStateTable& table) {
    table.validate();
    if (table.scope != Scope::Package)
        throw ValidationError("ideal_package_residency needs a package-scope table");
    return banded_residency(package_idle_law(params), table);
}

GapReport residency_gap(const ResidencyReport& ideal,
                        const ResidencyReport& measured) {
    if (ideal.scope != measured.scope)
        throw ValidationError("cannot compare a " + to_string(ideal.scope) +
                              " report against a " + to_string(measured.scope) +
                              " report");
    GapReport gap;
    gap.scope = ideal.scope;
    for (const auto& [state, fraction] : ideal.entries)
        gap.entries.push_back(
            {state, fraction, measured.at(state), fraction - measured.at(state)});
    for (const auto& [state, fraction] : measured.entries)
        if (!ideal.has(state))
            gap.entries.push_back({state, 0.0, fraction, -fraction});
    if (!ideal.entries.empty()) {
        gap.headline_state = ideal.entries.back().first;
        gap.headline_gap =
            ideal.entries.back().second - measured.at(gap.headline_state);
    }
    return gap;
}

} // namespace idlelab
