#include "idlelab/cstates.hpp"
#include "idlelab/errors.hpp"
#include "idlelab/queueing.hpp"
#include "idlelab/simulator.hpp"
#include "idlelab/trace.hpp"
#include "idlelab/units.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

using namespace idlelab;

constexpr int kExitUsage = 2;
constexpr int kExitCheckFailed = 3;

class CheckToleranceError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// shared flag plumbing

struct ScenarioFlags {
    std::string queue = "mm1";
    double lambda = 0.0;
    std::string service;
    double util = -1.0;
    int cores = 1;
    std::vector<std::string> sweep_service;
    std::vector<double> sweep_util;
    std::vector<int> sweep_cores;
    std::string core_table_path = "core_skx.json";
    std::string pkg_table_path = "pkg_skx.json";
    std::vector<std::string> bands;
    std::string out = "table";

    bool lambda_set = false;
    bool service_set = false;
    bool util_set = false;
};

struct SweepPoint {
    QueueParams params;
};

struct Band {
    double lo = 0.0;
    double hi = kUnbounded;
};

std::string fixture_root() {
    if (const char* env = std::getenv("IDLELAB_FIXTURES"))
        return env;
    return "fixtures";
}

std::string resolve_input(const std::string& path) {
    if (fs::exists(path))
        return path;
    fs::path under_root = fs::path(fixture_root()) / path;
    if (fs::exists(under_root))
        return under_root.string();
    throw ValidationError("file not found: tried '" + path + "' and '" +
                          under_root.string() + "'");
}

void add_scenario_flags(CLI::App* cmd, ScenarioFlags& flags, bool with_tables) {
    cmd->add_option("--queue", flags.queue, "Queue model: mm1, cxmm1, mmc")
        ->check(CLI::IsMember({"mm1", "cxmm1", "mmc"}));
    cmd->add_option("--lambda", flags.lambda,
                    "Per-core arrival rate (arrivals/second)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--service", flags.service,
                    "Mean service time with unit suffix (e.g. 100us, 1ms)");
    cmd->add_option("--util", flags.util, "Per-core utilization in (0,1)");
    cmd->add_option("--cores", flags.cores, "Core count")->check(CLI::PositiveNumber);
    cmd->add_option("--sweep-service", flags.sweep_service,
                    "Comma list of service times to sweep (e.g. 100us,1ms)")
        ->delimiter(',');
    cmd->add_option("--sweep-util", flags.sweep_util,
                    "Comma list of utilizations to sweep")
        ->delimiter(',');
    cmd->add_option("--sweep-cores", flags.sweep_cores,
                    "Comma list of core counts to sweep")
        ->delimiter(',');
    if (with_tables) {
        cmd->add_option("--cstates", flags.core_table_path,
                        "Core C-state table JSON (resolved under the fixture "
                        "root when not found as given)");
        cmd->add_option("--pkg-cstates", flags.pkg_table_path,
                        "Package C-state table JSON");
        cmd->add_option("--band", flags.bands,
                        "Extra duration band LO:HI (e.g. 2us:600us, 0:inf)");
    }
    cmd->add_option("--out", flags.out, "Output format")
        ->check(CLI::IsMember({"json", "csv", "table"}));
}

void capture_presence(CLI::App* cmd, ScenarioFlags& flags) {
    flags.lambda_set = cmd->count("--lambda") > 0;
    flags.service_set = cmd->count("--service") > 0;
    flags.util_set = cmd->count("--util") > 0;
}

double parse_band_edge(const std::string& text) {
    if (text == "0")
        return 0.0;
    if (text == "inf")
        return kUnbounded;
    return parse_duration_s(text);
}

Band parse_band(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw ValidationError("--band expects LO:HI, got '" + text + "'");
    Band band;
    band.lo = parse_band_edge(text.substr(0, colon));
    band.hi = parse_band_edge(text.substr(colon + 1));
    if (!(band.lo < band.hi))
        throw ValidationError("--band needs LO < HI, got '" + text + "'");
    return band;
}

// Any two of (lambda, service, util) determine the third; all three must
// agree within 1e-9. Sweep axes stand in for their base flag.
QueueParams resolve_point(const ScenarioFlags& flags, int cores,
                          std::optional<double> service_override,
                          std::optional<double> util_override) {
    bool have_lambda = flags.lambda_set;
    bool have_service = flags.service_set || service_override.has_value();
    bool have_util = flags.util_set || util_override.has_value();
    double service = service_override ? *service_override
                     : flags.service_set ? parse_duration_s(flags.service)
                                         : 0.0;
    double util = util_override ? *util_override : flags.util;
    int known = int(have_lambda) + int(have_service) + int(have_util);
    if (known < 2)
        throw ValidationError(
            "need two of --lambda, --service, --util (sweeps count)");
    QueueParams params;
    params.kind = queue_kind_from_string(flags.queue);
    params.cores = cores;
    if (have_lambda && have_service && have_util) {
        if (std::fabs(flags.lambda * service - util) > 1e-9)
            throw ValidationError(
                "--lambda, --service and --util are inconsistent: lambda * "
                "service = " +
                format_sig6(flags.lambda * service) + " but --util = " +
                format_sig6(util));
        params.lambda_per_core = flags.lambda;
        params.service_mean = service;
    } else if (have_lambda && have_service) {
        params.lambda_per_core = flags.lambda;
        params.service_mean = service;
    } else if (have_lambda && have_util) {
        if (!(util > 0.0))
            throw ValidationError("--util must be > 0");
        params.lambda_per_core = flags.lambda;
        params.service_mean = util / flags.lambda;
    } else { // service + util
        if (!(util > 0.0))
            throw ValidationError("--util must be > 0");
        if (!(service > 0.0))
            throw ValidationError("--service must be > 0");
        params.service_mean = service;
        params.lambda_per_core = util / service;
    }
    params.validate();
    return params;
}

// Row order: cores, then service, then util, outer to inner.
std::vector<SweepPoint> resolve_points(const ScenarioFlags& flags) {
    std::vector<int> cores_axis =
        flags.sweep_cores.empty() ? std::vector<int>{flags.cores} : flags.sweep_cores;
    std::vector<std::optional<double>> service_axis{std::nullopt};
    if (!flags.sweep_service.empty()) {
        service_axis.clear();
        for (const auto& text : flags.sweep_service)
            service_axis.push_back(parse_duration_s(text));
    }
    std::vector<std::optional<double>> util_axis{std::nullopt};
    if (!flags.sweep_util.empty()) {
        util_axis.clear();
        for (double u : flags.sweep_util)
            util_axis.push_back(u);
    }
    std::vector<SweepPoint> points;
    for (int cores : cores_axis)
        for (const auto& service : service_axis)
            for (const auto& util : util_axis)
                points.push_back({resolve_point(flags, cores, service, util)});
    return points;
}

bool wants_package(const QueueParams& params) {
    return params.kind != QueueKind::MM1 || params.cores > 1;
}

bool wants_core(const QueueParams& params) {
    return params.kind != QueueKind::MMc;
}

// ---------------------------------------------------------------------------
// document assembly

json scenario_json(const QueueParams& params) {
    json doc;
    doc["queue"] = to_string(params.kind);
    doc["cores"] = params.cores;
    doc["lambda_per_core"] = round_sig6(params.lambda_per_core);
    doc["service_mean_s"] = round_sig6(params.service_mean);
    doc["utilization"] = round_sig6(params.utilization());
    return doc;
}

json report_json(const ResidencyReport& report) {
    json doc;
    doc["scope"] = to_string(report.scope);
    json entries = json::object();
    for (const auto& [state, fraction] : report.entries)
        entries[state] = round_sig6(fraction);
    doc["entries"] = entries;
    if (report.horizon_s)
        doc["horizon_s"] = round_sig6(*report.horizon_s);
    return doc;
}

std::string band_name(const Band& band) {
    std::string hi = std::isinf(band.hi) ? "inf" : format_us(s_to_ns(band.hi)) + "us";
    return "[" + format_us(s_to_ns(band.lo)) + "us," + hi + ")";
}

json band_json(Level level, const Band& band) {
    json row;
    row["level"] = level == Level::Core ? "core" : "package";
    row["lo_s"] = round_sig6(band.lo);
    if (std::isinf(band.hi))
        row["hi_s"] = nullptr;
    else
        row["hi_s"] = round_sig6(band.hi);
    row["name"] = band_name(band);
    return row;
}

// Threshold bands of a table: [0,t1), [t1,t2), ..., [tn,inf).
std::vector<Band> table_bands(const CStateTable& table) {
    std::vector<Band> bands;
    double prev = 0.0;
    for (const auto& s : table.states) {
        bands.push_back({prev, s.target_residency});
        prev = s.target_residency;
    }
    bands.push_back({prev, kUnbounded});
    return bands;
}

std::string format_us_axis(double seconds) {
    return format_us(s_to_ns(seconds));
}

void write_output(const std::string& text) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n')
        std::cout << '\n';
}

// ---------------------------------------------------------------------------
// model

struct ModelFlags {
    ScenarioFlags scenario;
    bool count_weighted = false;
};

json model_point(const QueueParams& params, const CStateTable* core_table,
                 const CStateTable* pkg_table, const std::vector<Band>& extra_bands,
                 bool count_weighted) {
    json point;
    point["scenario"] = scenario_json(params);

    std::optional<IdleLaw> core_law;
    std::optional<IdleLaw> pkg_law;
    if (wants_core(params)) {
        core_law = core_idle_law(params);
        json law;
        law["rate_per_s"] = round_sig6(core_law->rate);
        law["idle_fraction"] = round_sig6(core_law->idle_fraction);
        point["core_idle_law"] = law;
    } else {
        point["core_idle_law"] = nullptr;
    }
    if (wants_package(params)) {
        pkg_law = package_idle_law(params);
        json law;
        law["rate_per_s"] = round_sig6(pkg_law->rate);
        law["idle_fraction"] = round_sig6(pkg_law->idle_fraction);
        point["package_idle_law"] = law;
    } else {
        point["package_idle_law"] = nullptr;
    }

    json bands = json::array();
    auto emit_bands = [&](Level level, const std::vector<Band>& list) {
        for (const auto& band : list) {
            json row = band_json(level, band);
            row["fraction"] =
                round_sig6(idle_band_fraction(params, level, band.lo, band.hi));
            bands.push_back(row);
        }
    };
    if (core_law && core_table)
        emit_bands(Level::Core, table_bands(*core_table));
    if (pkg_law && pkg_table)
        emit_bands(Level::Package, table_bands(*pkg_table));
    if (core_law)
        emit_bands(Level::Core, extra_bands);
    if (pkg_law)
        emit_bands(Level::Package, extra_bands);
    point["bands"] = bands;

    if (count_weighted) {
        json tails = json::array();
        auto emit_tails = [&](Level level, const IdleLaw& law,
                              const CStateTable* table) {
            std::set<double> edges;
            if (table)
                for (const auto& s : table->states)
                    edges.insert(s.target_residency);
            for (const auto& band : extra_bands) {
                if (band.lo > 0)
                    edges.insert(band.lo);
                if (!std::isinf(band.hi))
                    edges.insert(band.hi);
            }
            for (double t : edges) {
                json row;
                row["level"] = level == Level::Core ? "core" : "package";
                row["t_s"] = round_sig6(t);
                row["fraction_of_periods"] =
                    round_sig6(idle_tail_count_weighted(law.rate, t));
                tails.push_back(row);
            }
        };
        if (core_law)
            emit_tails(Level::Core, *core_law, core_table);
        if (pkg_law)
            emit_tails(Level::Package, *pkg_law, pkg_table);
        point["count_weighted_tails"] = tails;
    }

    if (core_law && core_table)
        point["core_residency"] = report_json(ideal_core_residency(params, *core_table));
    else
        point["core_residency"] = nullptr;
    if (pkg_law && pkg_table)
        point["package_residency"] =
            report_json(ideal_package_residency(params, *pkg_table));
    else
        point["package_residency"] = nullptr;
    return point;
}

std::string model_csv(const json& doc) {
    std::ostringstream out;
    out << "queue,cores,service_mean_us,utilization,section,level,name,value\n";
    for (const auto& point : doc.at("points")) {
        const auto& sc = point.at("scenario");
        std::string prefix = sc.at("queue").get<std::string>() + "," +
                             std::to_string(sc.at("cores").get<int>()) + "," +
                             format_us_axis(sc.at("service_mean_s").get<double>()) +
                             "," + format_sig6(sc.at("utilization").get<double>());
        auto law_rows = [&](const char* key, const char* level) {
            if (point.at(key).is_null())
                return;
            out << prefix << ",idle_law," << level << ",rate_per_s,"
                << format_sig6(point.at(key).at("rate_per_s").get<double>()) << '\n';
            out << prefix << ",idle_law," << level << ",idle_fraction,"
                << format_sig6(point.at(key).at("idle_fraction").get<double>())
                << '\n';
        };
        law_rows("core_idle_law", "core");
        law_rows("package_idle_law", "package");
        for (const auto& band : point.at("bands"))
            out << prefix << ",band," << band.at("level").get<std::string>() << ","
                << band.at("name").get<std::string>() << ","
                << format_sig6(band.at("fraction").get<double>()) << '\n';
        if (point.contains("count_weighted_tails"))
            for (const auto& row : point.at("count_weighted_tails"))
                out << prefix << ",tail_count_weighted,"
                    << row.at("level").get<std::string>() << ",P(period>="
                    << format_us_axis(row.at("t_s").get<double>()) << "us),"
                    << format_sig6(row.at("fraction_of_periods").get<double>())
                    << '\n';
        auto residency_rows = [&](const char* key, const char* level) {
            if (point.at(key).is_null())
                return;
            for (const auto& [state, fraction] :
                 point.at(key).at("entries").items())
                out << prefix << ",residency," << level << "," << state << ","
                    << format_sig6(fraction.get<double>()) << '\n';
        };
        residency_rows("core_residency", "core");
        residency_rows("package_residency", "package");
    }
    return out.str();
}

std::string model_table(const json& doc) {
    std::ostringstream out;
    for (const auto& point : doc.at("points")) {
        const auto& sc = point.at("scenario");
        out << "scenario: queue=" << sc.at("queue").get<std::string>()
            << " cores=" << sc.at("cores").get<int>() << " lambda/core="
            << format_sig6(sc.at("lambda_per_core").get<double>())
            << "/s service=" << format_us_axis(sc.at("service_mean_s").get<double>())
            << "us utilization="
            << format_sig6(sc.at("utilization").get<double>()) << "\n";
        auto law_line = [&](const char* key, const char* label) {
            if (point.at(key).is_null())
                return;
            out << "  " << label << " idle law: rate="
                << format_sig6(point.at(key).at("rate_per_s").get<double>())
                << "/s idle_fraction="
                << format_sig6(point.at(key).at("idle_fraction").get<double>())
                << "\n";
        };
        law_line("core_idle_law", "core");
        law_line("package_idle_law", "package");
        if (!point.at("bands").empty()) {
            out << "  bands (fraction of wall-clock time):\n";
            for (const auto& band : point.at("bands"))
                out << "    " << band.at("level").get<std::string>() << " "
                    << band.at("name").get<std::string>() << " = "
                    << format_sig6(band.at("fraction").get<double>()) << "\n";
        }
        if (point.contains("count_weighted_tails") &&
            !point.at("count_weighted_tails").empty()) {
            out << "  count-weighted tails (fraction of idle *periods*):\n";
            for (const auto& row : point.at("count_weighted_tails"))
                out << "    " << row.at("level").get<std::string>()
                    << " P(period >= " << format_us_axis(row.at("t_s").get<double>())
                    << "us) = "
                    << format_sig6(row.at("fraction_of_periods").get<double>())
                    << "\n";
        }
        auto residency_block = [&](const char* key, const char* label) {
            if (point.at(key).is_null())
                return;
            out << "  ideal " << label << " residency:\n";
            for (const auto& [state, fraction] :
                 point.at(key).at("entries").items())
                out << "    " << state << " = " << format_sig6(fraction.get<double>())
                    << "\n";
        };
        residency_block("core_residency", "core");
        residency_block("package_residency", "package");
    }
    return out.str();
}

int cmd_model(const ModelFlags& flags) {
    auto points = resolve_points(flags.scenario);
    std::vector<Band> extra_bands;
    for (const auto& text : flags.scenario.bands)
        extra_bands.push_back(parse_band(text));

    std::optional<CStateTable> core_table;
    std::optional<CStateTable> pkg_table;
    bool any_core = false, any_pkg = false;
    for (const auto& point : points) {
        any_core |= wants_core(point.params);
        any_pkg |= wants_package(point.params);
    }
    if (any_core)
        core_table = load_cstate_table_file(resolve_input(flags.scenario.core_table_path));
    if (any_pkg)
        pkg_table = load_cstate_table_file(resolve_input(flags.scenario.pkg_table_path));

    json doc;
    doc["command"] = "model";
    json out_points = json::array();
    for (const auto& point : points)
        out_points.push_back(model_point(point.params,
                                         core_table ? &*core_table : nullptr,
                                         pkg_table ? &*pkg_table : nullptr,
                                         extra_bands, flags.count_weighted));
    doc["points"] = out_points;

    if (flags.scenario.out == "json")
        write_output(doc.dump(2));
    else if (flags.scenario.out == "csv")
        write_output(model_csv(doc));
    else
        write_output(model_table(doc));
    return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateFlags {
    ScenarioFlags scenario;
    double arrivals = 100000;
    double warmup = -1; // default: arrivals / 10
    std::uint64_t seed = 1;
    std::string dispatch = "lowest-index";
    bool dispatch_set = false;
    std::string trace_out;
    bool check = false;
    double tol = 0.01;
};

struct CheckRow {
    std::string name;
    double simulated = 0.0;
    double analytic = 0.0;
};

json simulate_point(const QueueParams& params, const SimulateFlags& flags,
                    const CStateTable* core_table, const CStateTable* pkg_table,
                    const std::vector<Band>& extra_bands) {
    SimConfig config;
    config.params = params;
    config.seed = flags.seed;
    config.arrivals = static_cast<std::uint64_t>(flags.arrivals);
    config.warmup_arrivals =
        flags.warmup < 0 ? config.arrivals / 10
                         : static_cast<std::uint64_t>(flags.warmup);
    config.dispatch = dispatch_from_string(flags.dispatch);
    SimResult result = simulate(config);

    json point;
    json scenario = scenario_json(params);
    scenario["seed"] = flags.seed;
    scenario["arrivals"] = config.arrivals;
    scenario["warmup_arrivals"] = config.warmup_arrivals;
    scenario["dispatch"] = to_string(config.dispatch);
    point["scenario"] = scenario;

    int cores = params.cores;
    double busy_mean = 0.0;
    json busy = json::array();
    for (double b : result.busy_fraction) {
        busy.push_back(round_sig6(b));
        busy_mean += b / cores;
    }
    Nanos pkg_total = total_length(result.package_idle);
    double pkg_fraction =
        static_cast<double>(pkg_total) / static_cast<double>(result.horizon);
    json res;
    res["horizon_s"] = round_sig6(ns_to_s(result.horizon));
    res["jobs"] = result.jobs;
    res["busy_fraction_per_core"] = busy;
    res["busy_fraction_mean"] = round_sig6(busy_mean);
    res["package_idle_fraction"] = round_sig6(pkg_fraction);
    res["package_intervals"] = result.package_idle.size();
    if (!result.package_idle.empty())
        res["package_idle_mean_s"] = round_sig6(
            ns_to_s(pkg_total) / static_cast<double>(result.package_idle.size()));
    else
        res["package_idle_mean_s"] = nullptr;
    // per-core mean idle interval length, averaged over cores
    {
        Nanos idle_total = 0;
        std::size_t idle_count = 0;
        for (const auto& list : result.core_idle) {
            idle_total += total_length(list);
            idle_count += list.size();
        }
        if (idle_count > 0)
            res["core_idle_mean_s"] = round_sig6(
                ns_to_s(idle_total) / static_cast<double>(idle_count));
        else
            res["core_idle_mean_s"] = nullptr;
    }
    point["result"] = res;

    // band rows: simulated fractions next to the closed form where one exists
    std::vector<CheckRow> check_rows;
    check_rows.push_back({"busy_fraction_mean", busy_mean, busy_fraction(params)});
    json bands = json::array();
    auto emit_level = [&](Level level, const std::vector<Band>& list) {
        // bands may be arbitrary [lo,hi); evaluate each one separately
        for (const auto& band : list) {
            json row = band_json(level, band);
            double sim;
            if (level == Level::Core) {
                double sum = 0.0;
                for (int core = 0; core < cores; ++core) {
                    auto banded = empirical_idle_distribution(
                        result, SimLevel::Core(core),
                        band.lo == 0.0
                            ? std::vector<double>{band.lo, band.hi}
                            : std::vector<double>{0.0, band.lo, band.hi});
                    sum += banded.fractions.back();
                }
                sim = sum / cores;
            } else {
                auto banded = empirical_idle_distribution(
                    result, SimLevel::Package(),
                    band.lo == 0.0 ? std::vector<double>{band.lo, band.hi}
                                   : std::vector<double>{0.0, band.lo, band.hi});
                sim = banded.fractions.back();
            }
            row["simulated"] = round_sig6(sim);
            bool have_model =
                level == Level::Core ? wants_core(params) : wants_package(params);
            if (have_model) {
                double analytic = idle_band_fraction(params, level, band.lo, band.hi);
                row["analytic"] = round_sig6(analytic);
                check_rows.push_back({(level == Level::Core ? std::string("core ")
                                                            : std::string("package ")) +
                                          band_name(band),
                                      sim, analytic});
            } else {
                row["analytic"] = nullptr;
            }
            bands.push_back(row);
        }
    };
    std::vector<Band> core_bands;
    if (core_table)
        core_bands = table_bands(*core_table);
    core_bands.insert(core_bands.end(), extra_bands.begin(), extra_bands.end());
    std::vector<Band> pkg_bands;
    if (wants_package(params)) {
        if (pkg_table)
            pkg_bands = table_bands(*pkg_table);
        pkg_bands.insert(pkg_bands.end(), extra_bands.begin(), extra_bands.end());
    }
    emit_level(Level::Core, core_bands);
    emit_level(Level::Package, pkg_bands);
    if (wants_package(params))
        check_rows.push_back({"package_idle_fraction", pkg_fraction,
                              package_idle_law(params).idle_fraction});
    point["bands"] = bands;

    if (flags.check) {
        json check;
        check["tolerance"] = flags.tol;
        json rows = json::array();
        double max_dev = 0.0;
        for (const auto& row : check_rows) {
            double dev = std::fabs(row.simulated - row.analytic);
            max_dev = std::max(max_dev, dev);
            json r;
            r["name"] = row.name;
            r["simulated"] = round_sig6(row.simulated);
            r["analytic"] = round_sig6(row.analytic);
            r["abs_deviation"] = round_sig6(dev);
            rows.push_back(r);
        }
        check["rows"] = rows;
        check["max_abs_deviation"] = round_sig6(max_dev);
        check["pass"] = max_dev <= flags.tol;
        point["check"] = check;
    } else {
        point["check"] = nullptr;
    }

    if (!flags.trace_out.empty()) {
        std::optional<CStateTable> classify;
        if (core_table)
            classify = *core_table;
        IdleIntervalTrace trace = to_trace(result, classify);
        std::ofstream out(flags.trace_out);
        if (!out)
            throw ValidationError("cannot write trace file '" + flags.trace_out + "'");
        write_interval_trace(trace, out);
        point["trace_path"] = flags.trace_out;
    } else {
        point["trace_path"] = nullptr;
    }
    return point;
}

std::string simulate_csv(const json& doc) {
    std::ostringstream out;
    out << "queue,cores,service_mean_us,utilization,section,name,value\n";
    for (const auto& point : doc.at("points")) {
        const auto& sc = point.at("scenario");
        std::string prefix = sc.at("queue").get<std::string>() + "," +
                             std::to_string(sc.at("cores").get<int>()) + "," +
                             format_us_axis(sc.at("service_mean_s").get<double>()) +
                             "," + format_sig6(sc.at("utilization").get<double>());
        const auto& res = point.at("result");
        out << prefix << ",result,horizon_s,"
            << format_sig6(res.at("horizon_s").get<double>()) << '\n';
        out << prefix << ",result,jobs," << res.at("jobs").get<std::uint64_t>()
            << '\n';
        out << prefix << ",result,busy_fraction_mean,"
            << format_sig6(res.at("busy_fraction_mean").get<double>()) << '\n';
        int core = 0;
        for (const auto& b : res.at("busy_fraction_per_core"))
            out << prefix << ",result,busy_fraction[" << core++ << "],"
                << format_sig6(b.get<double>()) << '\n';
        out << prefix << ",result,package_idle_fraction,"
            << format_sig6(res.at("package_idle_fraction").get<double>()) << '\n';
        for (const auto& band : point.at("bands")) {
            std::string name = band.at("level").get<std::string>() + " " +
                               band.at("name").get<std::string>();
            out << prefix << ",band_sim," << name << ","
                << format_sig6(band.at("simulated").get<double>()) << '\n';
            if (!band.at("analytic").is_null())
                out << prefix << ",band_model," << name << ","
                    << format_sig6(band.at("analytic").get<double>()) << '\n';
        }
        if (!point.at("check").is_null()) {
            for (const auto& row : point.at("check").at("rows"))
                out << prefix << ",check," << row.at("name").get<std::string>() << ","
                    << format_sig6(row.at("abs_deviation").get<double>()) << '\n';
            out << prefix << ",check,max_abs_deviation,"
                << format_sig6(
                       point.at("check").at("max_abs_deviation").get<double>())
                << '\n';
        }
    }
    return out.str();
}

std::string simulate_table(const json& doc) {
    std::ostringstream out;
    for (const auto& point : doc.at("points")) {
        const auto& sc = point.at("scenario");
        out << "simulated: queue=" << sc.at("queue").get<std::string>()
            << " cores=" << sc.at("cores").get<int>()
            << " service=" << format_us_axis(sc.at("service_mean_s").get<double>())
            << "us utilization=" << format_sig6(sc.at("utilization").get<double>())
            << " seed=" << sc.at("seed").get<std::uint64_t>()
            << " arrivals=" << sc.at("arrivals").get<std::uint64_t>() << "\n";
        const auto& res = point.at("result");
        out << "  horizon = " << format_sig6(res.at("horizon_s").get<double>())
            << " s, jobs = " << res.at("jobs").get<std::uint64_t>() << "\n";
        out << "  busy fraction mean = "
            << format_sig6(res.at("busy_fraction_mean").get<double>()) << "\n";
        out << "  package idle fraction = "
            << format_sig6(res.at("package_idle_fraction").get<double>()) << "\n";
        if (!res.at("package_idle_mean_s").is_null())
            out << "  package idle mean = "
                << format_sig6(res.at("package_idle_mean_s").get<double>() * 1e6)
                << " us over " << res.at("package_intervals").get<std::uint64_t>()
                << " intervals\n";
        if (!point.at("bands").empty()) {
            out << "  bands (simulated | analytic):\n";
            for (const auto& band : point.at("bands")) {
                out << "    " << band.at("level").get<std::string>() << " "
                    << band.at("name").get<std::string>() << " = "
                    << format_sig6(band.at("simulated").get<double>());
                if (!band.at("analytic").is_null())
                    out << " | " << format_sig6(band.at("analytic").get<double>());
                out << "\n";
            }
        }
        if (!point.at("check").is_null()) {
            const auto& check = point.at("check");
            out << "  check: max abs deviation = "
                << format_sig6(check.at("max_abs_deviation").get<double>())
                << " (tolerance " << format_sig6(check.at("tolerance").get<double>())
                << ") -> " << (check.at("pass").get<bool>() ? "pass" : "FAIL")
                << "\n";
        }
        if (!point.at("trace_path").is_null())
            out << "  trace written to "
                << point.at("trace_path").get<std::string>() << "\n";
    }
    return out.str();
}

int cmd_simulate(const SimulateFlags& flags) {
    auto points = resolve_points(flags.scenario);
    if (points.size() > 1 && !flags.trace_out.empty())
        throw ValidationError("--trace-out expects a single sweep point");
    std::vector<Band> extra_bands;
    for (const auto& text : flags.scenario.bands)
        extra_bands.push_back(parse_band(text));
    for (const auto& point : points) {
        if (flags.dispatch_set && point.params.kind != QueueKind::MMc)
            throw ValidationError("--dispatch applies only to --queue mmc");
    }

    std::optional<CStateTable> core_table;
    std::optional<CStateTable> pkg_table;
    bool any_core = !flags.trace_out.empty(); // classification wants the table
    bool any_pkg = false;
    for (const auto& point : points) {
        any_core |= wants_core(point.params);
        any_pkg |= wants_package(point.params);
    }
    if (any_core)
        core_table =
            load_cstate_table_file(resolve_input(flags.scenario.core_table_path));
    if (any_pkg)
        pkg_table =
            load_cstate_table_file(resolve_input(flags.scenario.pkg_table_path));

    json doc;
    doc["command"] = "simulate";
    json out_points = json::array();
    bool check_failed = false;
    double worst = 0.0;
    for (const auto& point : points) {
        json p = simulate_point(point.params, flags,
                                core_table ? &*core_table : nullptr,
                                pkg_table ? &*pkg_table : nullptr, extra_bands);
        if (!p.at("check").is_null() && !p.at("check").at("pass").get<bool>()) {
            check_failed = true;
            worst = std::max(worst,
                             p.at("check").at("max_abs_deviation").get<double>());
        }
        out_points.push_back(std::move(p));
    }
    doc["points"] = out_points;

    if (flags.scenario.out == "json")
        write_output(doc.dump(2));
    else if (flags.scenario.out == "csv")
        write_output(simulate_csv(doc));
    else
        write_output(simulate_table(doc));
    if (check_failed)
        throw CheckToleranceError("simulation deviates from the closed forms by " +
                                  format_sig6(worst) + " (> tolerance " +
                                  format_sig6(flags.tol) + ")");
    return 0;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeFlags {
    std::string trace_path;
    std::string pkg_table_path = "pkg_skx.json";
    std::vector<std::string> require_states;
    std::string out = "table";
};

int cmd_analyze(const AnalyzeFlags& flags) {
    IdleIntervalTrace trace =
        parse_interval_trace_file(resolve_input(flags.trace_path));
    CStateTable pkg_table =
        load_cstate_table_file(resolve_input(flags.pkg_table_path));
    std::optional<std::set<std::string>> filter;
    if (!flags.require_states.empty())
        filter = std::set<std::string>(flags.require_states.begin(),
                                       flags.require_states.end());

    auto per_core = residency_from_trace(trace);
    auto package = package_residency_from_trace(trace, pkg_table, filter);

    json doc;
    doc["command"] = "analyze";
    doc["trace"] = flags.trace_path;
    doc["cores"] = trace.cores;
    doc["horizon_s"] = round_sig6(ns_to_s(trace.horizon));
    if (filter) {
        json states = json::array();
        for (const auto& s : *filter)
            states.push_back(s);
        doc["require_states"] = states;
    } else {
        doc["require_states"] = nullptr;
    }
    json cores = json::array();
    for (int core = 0; core < trace.cores; ++core) {
        json row = report_json(per_core[static_cast<std::size_t>(core)]);
        row["core"] = core;
        cores.push_back(row);
    }
    doc["per_core"] = cores;
    doc["package"] = report_json(package);

    if (flags.out == "json") {
        write_output(doc.dump(2));
    } else if (flags.out == "csv") {
        std::ostringstream out;
        out << "scope,core,state,fraction\n";
        for (const auto& row : doc.at("per_core"))
            for (const auto& [state, fraction] : row.at("entries").items())
                out << "core," << row.at("core").get<int>() << "," << state << ","
                    << format_sig6(fraction.get<double>()) << '\n';
        for (const auto& [state, fraction] : doc.at("package").at("entries").items())
            out << "package,," << state << "," << format_sig6(fraction.get<double>())
                << '\n';
        write_output(out.str());
    } else {
        std::ostringstream out;
        out << "trace: " << flags.trace_path << " (" << trace.cores << " cores, "
            << format_sig6(ns_to_s(trace.horizon)) << " s horizon)\n";
        for (const auto& row : doc.at("per_core")) {
            out << "  core " << row.at("core").get<int>() << " residency:\n";
            for (const auto& [state, fraction] : row.at("entries").items())
                out << "    " << state << " = " << format_sig6(fraction.get<double>())
                    << "\n";
        }
        out << "  package residency";
        if (filter) {
            out << " (idle filter:";
            for (const auto& s : *filter)
                out << " " << s;
            out << ")";
        }
        out << ":\n";
        for (const auto& [state, fraction] : doc.at("package").at("entries").items())
            out << "    " << state << " = " << format_sig6(fraction.get<double>())
                << "\n";
        write_output(out.str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// compare

struct CompareFlags {
    ScenarioFlags scenario;
    std::vector<std::string> measured;
    std::string level = "core";
    int core = -1; // -1: mean across cores
};

ResidencyReport load_measured(const std::string& path, Scope scope, int core,
                              const std::string& active_name) {
    std::string resolved = resolve_input(path);
    if (resolved.size() >= 5 &&
        resolved.compare(resolved.size() - 5, 5, ".json") == 0) {
        std::ifstream in(resolved);
        if (!in)
            throw ValidationError("cannot open measured report '" + resolved + "'");
        std::stringstream buffer;
        buffer << in.rdbuf();
        ResidencyReport report = report_from_json(buffer.str());
        if (report.scope != scope)
            throw ValidationError("measured report '" + resolved + "' is " +
                                  to_string(report.scope) + "-scope, expected " +
                                  to_string(scope));
        return report;
    }
    ResidencySummary summary = parse_residency_summary_file(resolved);
    if (core >= 0)
        return summary_to_report(summary, core, scope, active_name);
    return summary_mean_report(summary, scope, active_name);
}

int cmd_compare(const CompareFlags& flags) {
    auto points = resolve_points(flags.scenario);
    if (flags.measured.empty())
        throw ValidationError("--measured is required");
    if (flags.measured.size() != 1 && flags.measured.size() != points.size())
        throw ValidationError("--measured must be given once or once per sweep "
                              "point (" +
                              std::to_string(points.size()) + " points, " +
                              std::to_string(flags.measured.size()) + " files)");
    Scope scope = flags.level == "core" ? Scope::Core : Scope::Package;
    CStateTable table = load_cstate_table_file(
        resolve_input(scope == Scope::Core ? flags.scenario.core_table_path
                                           : flags.scenario.pkg_table_path));

    json doc;
    doc["command"] = "compare";
    doc["level"] = flags.level;
    json out_points = json::array();
    for (std::size_t i = 0; i < points.size(); ++i) {
        const QueueParams& params = points[i].params;
        ResidencyReport ideal = scope == Scope::Core
                                    ? ideal_core_residency(params, table)
                                    : ideal_package_residency(params, table);
        const std::string& source =
            flags.measured.size() == 1 ? flags.measured[0] : flags.measured[i];
        ResidencyReport measured =
            load_measured(source, scope, flags.core, table.active_name);
        GapReport gap = residency_gap(ideal, measured);

        json point;
        point["scenario"] = scenario_json(params);
        point["measured_source"] = source;
        json entries = json::array();
        for (const auto& entry : gap.entries) {
            json row;
            row["state"] = entry.state;
            row["ideal"] = round_sig6(entry.ideal);
            row["measured"] = round_sig6(entry.measured);
            row["gap"] = round_sig6(entry.gap);
            entries.push_back(row);
        }
        point["entries"] = entries;
        json headline;
        headline["state"] = gap.headline_state;
        headline["gap"] = round_sig6(gap.headline_gap);
        point["headline"] = headline;
        out_points.push_back(point);
    }
    doc["points"] = out_points;

    if (flags.scenario.out == "json") {
        write_output(doc.dump(2));
    } else if (flags.scenario.out == "csv") {
        std::ostringstream out;
        out << "queue,cores,service_mean_us,utilization,state,ideal,measured,gap,"
               "is_headline\n";
        for (const auto& point : doc.at("points")) {
            const auto& sc = point.at("scenario");
            std::string prefix =
                sc.at("queue").get<std::string>() + "," +
                std::to_string(sc.at("cores").get<int>()) + "," +
                format_us_axis(sc.at("service_mean_s").get<double>()) + "," +
                format_sig6(sc.at("utilization").get<double>());
            std::string headline_state =
                point.at("headline").at("state").get<std::string>();
            for (const auto& row : point.at("entries"))
                out << prefix << "," << row.at("state").get<std::string>() << ","
                    << format_sig6(row.at("ideal").get<double>()) << ","
                    << format_sig6(row.at("measured").get<double>()) << ","
                    << format_sig6(row.at("gap").get<double>()) << ","
                    << (row.at("state").get<std::string>() == headline_state ? 1 : 0)
                    << '\n';
        }
        write_output(out.str());
    } else {
        std::ostringstream out;
        for (const auto& point : doc.at("points")) {
            const auto& sc = point.at("scenario");
            out << "compare (" << flags.level << "): queue="
                << sc.at("queue").get<std::string>() << " cores="
                << sc.at("cores").get<int>() << " service="
                << format_us_axis(sc.at("service_mean_s").get<double>())
                << "us utilization="
                << format_sig6(sc.at("utilization").get<double>()) << " vs "
                << point.at("measured_source").get<std::string>() << "\n";
            out << "    state        ideal   measured        gap\n";
            for (const auto& row : point.at("entries")) {
                char line[160];
                std::snprintf(line, sizeof line, "    %-8s %9s %9s %9s\n",
                              row.at("state").get<std::string>().c_str(),
                              format_sig6(row.at("ideal").get<double>()).c_str(),
                              format_sig6(row.at("measured").get<double>()).c_str(),
                              format_sig6(row.at("gap").get<double>()).c_str());
                out << line;
            }
            out << "  headline: "
                << point.at("headline").at("state").get<std::string>()
                << " gap = "
                << format_sig6(point.at("headline").at("gap").get<double>()) << "\n";
        }
        write_output(out.str());
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Idle-time distribution modeling and C-state residency analysis"};
    app.require_subcommand(1);
    app.fallthrough(); // lets `idlelab model --config f` reach the global flag
    app.set_config("--config", "", "Read flags from a config file (INI/TOML)");

    ModelFlags model_flags;
    auto* model = app.add_subcommand(
        "model", "Closed-form idle laws, band fractions, ideal residencies");
    add_scenario_flags(model, model_flags.scenario, true);
    model->add_flag("--count-weighted", model_flags.count_weighted,
                    "Also emit count-weighted period tails (fraction of idle "
                    "*periods*, not idle time)");

    SimulateFlags sim_flags;
    auto* simulate = app.add_subcommand(
        "simulate", "Discrete-event simulation with optional closed-form check");
    add_scenario_flags(simulate, sim_flags.scenario, true);
    simulate->add_option("--arrivals", sim_flags.arrivals,
                         "Serviced jobs after warmup (per core for mm1/cxmm1, "
                         "total for mmc; 1e6 notation accepted)")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--warmup", sim_flags.warmup,
                         "Warmup jobs discarded (default: arrivals/10)");
    simulate->add_option("--seed", sim_flags.seed, "Master seed");
    auto* dispatch_opt = simulate->add_option(
        "--dispatch", sim_flags.dispatch,
        "M/M/c dispatch: lowest-index, random-idle, longest-idle-first");
    dispatch_opt->check(
        CLI::IsMember({"lowest-index", "random-idle", "longest-idle-first"}));
    simulate->add_option("--trace-out", sim_flags.trace_out,
                         "Write the idle-interval trace CSV here");
    simulate->add_flag("--check", sim_flags.check,
                       "Compare against the closed forms; exit 3 beyond --tol");
    simulate->add_option("--tol", sim_flags.tol,
                         "Max absolute deviation allowed with --check");

    AnalyzeFlags analyze_flags;
    auto* analyze = app.add_subcommand(
        "analyze", "Measured residencies and package overlap from a trace CSV");
    analyze->add_option("trace", analyze_flags.trace_path, "Interval trace CSV")
        ->required();
    analyze->add_option("--pkg-cstates", analyze_flags.pkg_table_path,
                        "Package C-state table JSON");
    analyze->add_option("--require-state", analyze_flags.require_states,
                        "Only these states count as idle for package overlap")
        ->delimiter(',');
    analyze->add_option("--out", analyze_flags.out, "Output format")
        ->check(CLI::IsMember({"json", "csv", "table"}));

    CompareFlags compare_flags;
    auto* compare = app.add_subcommand(
        "compare", "Ideal model residency vs a measured report; gap per state");
    add_scenario_flags(compare, compare_flags.scenario, true);
    compare->add_option("--measured", compare_flags.measured,
                        "Measured residency summary CSV or report JSON "
                        "(repeat once per sweep point)");
    compare->add_option("--level", compare_flags.level, "core or package")
        ->check(CLI::IsMember({"core", "package"}));
    compare->add_option("--core", compare_flags.core,
                        "Compare against this core of the summary (default: "
                        "mean across cores)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        capture_presence(model, model_flags.scenario);
        capture_presence(simulate, sim_flags.scenario);
        capture_presence(compare, compare_flags.scenario);
        sim_flags.dispatch_set = simulate->count("--dispatch") > 0;
        if (app.got_subcommand(model))
            return cmd_model(model_flags);
        if (app.got_subcommand(simulate))
            return cmd_simulate(sim_flags);
        if (app.got_subcommand(analyze))
            return cmd_analyze(analyze_flags);
        if (app.got_subcommand(compare))
            return cmd_compare(compare_flags);
    } catch (const CheckToleranceError& e) {
        std::cerr << "check failed: " << e.what() << "\n";
        return kExitCheckFailed;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return 0;
}
