#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

// Spawns the installed binary through the shell and inspects exit codes and
// output bytes. IDLELAB_BIN, FIXTURES_DIR and GOLDEN_DIR come from the build.

namespace {

using json = nlohmann::ordered_json;

struct RunResult {
    int exit_code = -1;
    std::string output;
};

RunResult run(const std::string& args, bool merge_stderr = true) {
    std::string cmd = std::string("IDLELAB_FIXTURES='") + FIXTURES_DIR + "' '" +
                      IDLELAB_BIN + "' " + args;
    if (merge_stderr)
        cmd += " 2>&1";
    else
        cmd += " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult result;
    std::array<char, 4096> buffer{};
    std::size_t n;
    while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0)
        result.output.append(buffer.data(), n);
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string tmp_path(const std::string& name) {
    return "/tmp/idlelab_test_" + std::to_string(getpid()) + "_" + name;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    std::stringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

double band_fraction(const json& point, const std::string& level,
                     const std::string& name) {
    for (const auto& band : point.at("bands"))
        if (band.at("level") == level && band.at("name") == name)
            return band.at("fraction").get<double>();
    FAIL("band not found: " << level << " " << name);
    return 0.0;
}

} // namespace

TEST_CASE("model emits the single-core reference numbers") {
    auto r = run("model --queue mm1 --lambda 2000 --util 0.2 "
                 "--band 2us:600us --out json",
                 false);
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.output);
    CHECK(doc.at("command") == "model");
    REQUIRE(doc.at("points").size() == 1);
    const auto& point = doc.at("points")[0];
    CHECK(point.at("scenario").at("utilization").get<double>() ==
          doctest::Approx(0.2));
    CHECK(band_fraction(point, "core", "[2us,600us)") ==
          doctest::Approx(0.269892).epsilon(1e-9));
    CHECK(point.at("core_residency").at("entries").at("C6").get<double>() ==
          doctest::Approx(0.530102).epsilon(1e-9));
    CHECK(point.at("package_idle_law").is_null());
    CHECK(point.at("package_residency").is_null());
}

TEST_CASE("model emits the multi-core package reference numbers") {
    auto r = run("model --queue cxmm1 --cores 10 --lambda 2000 --util 0.2 "
                 "--band 0:183us --out json",
                 false);
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.output);
    const auto& point = doc.at("points")[0];
    CHECK(point.at("package_idle_law").at("idle_fraction").get<double>() ==
          doctest::Approx(0.107374).epsilon(1e-9));
    CHECK(band_fraction(point, "package", "[0us,183us)") ==
          doctest::Approx(0.0944986).epsilon(1e-8));
    const auto& pkg = point.at("package_residency").at("entries");
    CHECK(pkg.at("PC0").get<double>() == doctest::Approx(0.892626).epsilon(1e-9));
    CHECK(pkg.at("PC6").get<double>() == doctest::Approx(0.0128756).epsilon(1e-8));
}

TEST_CASE("shared-queue model documents skip per-core sections") {
    auto r = run("model --queue mmc --cores 10 --lambda 2000 --util 0.2 --out json",
                 false);
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.output);
    const auto& point = doc.at("points")[0];
    CHECK(point.at("core_idle_law").is_null());
    CHECK(point.at("core_residency").is_null());
    CHECK(point.at("package_idle_law").at("idle_fraction").get<double>() ==
          doctest::Approx(0.135335).epsilon(1e-8));
}

TEST_CASE("documents carry the structure the published schema promises") {
    for (const char* args :
         {"model --queue cxmm1 --cores 4 --lambda 2000 --util 0.2 --out json",
          "simulate --queue cxmm1 --cores 2 --lambda 2000 --util 0.2 "
          "--arrivals 2000 --check --tol 0.2 --out json",
          "analyze sample_trace.csv --out json",
          "compare --queue mm1 --lambda 2000 --util 0.2 "
          "--measured legacy_core_100us.csv --out json"}) {
        auto r = run(std::string(args), false);
        REQUIRE(r.exit_code == 0);
        json doc = json::parse(r.output);
        std::string command = doc.at("command").get<std::string>();
        if (command == "analyze") {
            for (const char* key :
                 {"trace", "cores", "horizon_s", "require_states", "per_core",
                  "package"})
                CHECK(doc.contains(key));
            CHECK(doc.at("package").at("scope") == "package");
        } else {
            REQUIRE(doc.contains("points"));
            for (const auto& point : doc.at("points")) {
                CHECK(point.contains("scenario"));
                const auto& sc = point.at("scenario");
                for (const char* key : {"queue", "cores", "lambda_per_core",
                                        "service_mean_s", "utilization"})
                    CHECK(sc.contains(key));
                if (command == "model")
                    for (const char* key :
                         {"core_idle_law", "package_idle_law", "bands",
                          "core_residency", "package_residency"})
                        CHECK(point.contains(key));
                if (command == "simulate")
                    for (const char* key : {"result", "bands", "check", "trace_path"})
                        CHECK(point.contains(key));
                if (command == "compare")
                    for (const char* key : {"measured_source", "entries", "headline"})
                        CHECK(point.contains(key));
            }
        }
    }
}

TEST_CASE("usage problems exit with code 2") {
    CHECK(run("model --queue mm1 --lambda 2000 --util 1.2").exit_code == 2);
    CHECK(run("model --queue mm1 --lambda 2000").exit_code == 2);
    CHECK(run("").exit_code == 2);
    CHECK(run("frobnicate").exit_code == 2);
    CHECK(run("model --no-such-flag 1").exit_code == 2);
    CHECK(run("model --queue mm1 --lambda 2000 --service 100").exit_code == 2);
    CHECK(run("analyze no_such_trace.csv").exit_code == 2);
    CHECK(run("--help").exit_code == 0);
    CHECK(run("model --help").exit_code == 0);

    auto inconsistent = run("model --queue mm1 --lambda 2000 --service 1ms --util 0.2");
    CHECK(inconsistent.exit_code == 2);
    CHECK(inconsistent.output.find("inconsistent") != std::string::npos);

    auto unstable = run("model --queue mm1 --lambda 2000 --util 1.2");
    CHECK(unstable.output.find("rho") != std::string::npos);
}

TEST_CASE("malformed measured input names the offending row") {
    std::string bad = tmp_path("bad_summary.csv");
    {
        std::ofstream out(bad);
        out << "core,state,fraction\n0,C6,1.5\n";
    }
    auto r = run("compare --queue mm1 --lambda 2000 --util 0.2 --measured " + bad);
    CHECK(r.exit_code == 2);
    CHECK(r.output.find("row 2") != std::string::npos);
    std::remove(bad.c_str());
}

TEST_CASE("simulate --check exits 3 when the run misses the tolerance") {
    auto r = run("simulate --queue mm1 --lambda 2000 --util 0.2 --arrivals 100 "
                 "--warmup 10 --seed 1 --check --tol 0.0001");
    CHECK(r.exit_code == 3);
    CHECK(r.output.find("check failed") != std::string::npos);
}

TEST_CASE("simulate output is deterministic for a fixed seed") {
    std::string args = "simulate --queue cxmm1 --cores 2 --lambda 2000 "
                       "--util 0.2 --arrivals 5000 --seed 42 --out json";
    auto a = run(args, false);
    auto b = run(args, false);
    REQUIRE(a.exit_code == 0);
    CHECK(a.output == b.output);
    auto c = run("simulate --queue cxmm1 --cores 2 --lambda 2000 --util 0.2 "
                 "--arrivals 5000 --seed 43 --out json",
                 false);
    CHECK(a.output != c.output);
}

TEST_CASE("analyze output matches the golden bytes") {
    auto r = run("analyze sample_trace.csv --out json", false);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output == slurp(std::string(GOLDEN_DIR) + "/analyze_sample.json"));
}

TEST_CASE("compare output matches the golden bytes and headline") {
    auto r = run("compare --queue mm1 --lambda 2000 --util 0.2 "
                 "--measured legacy_core_100us.csv --out json",
                 false);
    REQUIRE(r.exit_code == 0);
    CHECK(r.output == slurp(std::string(GOLDEN_DIR) + "/compare_legacy_100us.json"));
    json doc = json::parse(r.output);
    const auto& headline = doc.at("points")[0].at("headline");
    CHECK(headline.at("state") == "C6");
    CHECK(headline.at("gap").get<double>() == doctest::Approx(0.510102).epsilon(1e-9));
}

TEST_CASE("compare sweeps emit one plot-ready row block per point") {
    auto r = run("compare --queue mm1 --sweep-service 100us,10ms --util 0.2 "
                 "--measured legacy_core_100us.csv --measured "
                 "legacy_core_10ms.csv --out csv",
                 false);
    REQUIRE(r.exit_code == 0);
    std::istringstream lines(r.output);
    std::string line;
    int rows = 0, headlines = 0;
    std::getline(lines, line);
    CHECK(line ==
          "queue,cores,service_mean_us,utilization,state,ideal,measured,gap,"
          "is_headline");
    while (std::getline(lines, line)) {
        ++rows;
        if (line.size() >= 2 && line.compare(line.size() - 2, 2, ",1") == 0)
            ++headlines;
    }
    CHECK(rows == 10);
    CHECK(headlines == 2);
    CHECK(r.output.find("mm1,1,10000,0.2,C6,") != std::string::npos);
}

TEST_CASE("a simulated trace feeds back through analyze") {
    std::string trace = tmp_path("roundtrip_trace.csv");
    auto sim = run("simulate --queue cxmm1 --cores 2 --lambda 2000 --util 0.2 "
                   "--arrivals 3000 --seed 8 --trace-out " +
                       trace + " --out json",
                   false);
    REQUIRE(sim.exit_code == 0);
    auto analyzed = run("analyze " + trace + " --out json", false);
    REQUIRE(analyzed.exit_code == 0);
    json doc = json::parse(analyzed.output);
    CHECK(doc.at("cores") == 2);
    // C0 share reported by analyze must match the simulator's busy fraction
    json sim_doc = json::parse(sim.output);
    double busy0 =
        sim_doc.at("points")[0].at("result").at("busy_fraction_per_core")[0]
            .get<double>();
    double active0 = doc.at("per_core")[0].at("entries").at("C0").get<double>();
    CHECK(active0 == doctest::Approx(busy0).epsilon(1e-4));
    std::remove(trace.c_str());
}

TEST_CASE("count-weighted tails appear only on request, clearly labeled") {
    auto without = run("model --queue mm1 --lambda 2000 --util 0.2 --out json",
                       false);
    CHECK(without.output.find("count_weighted") == std::string::npos);
    auto with = run("model --queue mm1 --lambda 2000 --util 0.2 "
                    "--count-weighted --out json",
                    false);
    json doc = json::parse(with.output);
    const auto& tails = doc.at("points")[0].at("count_weighted_tails");
    REQUIRE(!tails.empty());
    CHECK(tails[0].contains("fraction_of_periods"));
}

TEST_CASE("a config file can hold the scenario flags") {
    std::string cfg = tmp_path("scenario.ini");
    {
        std::ofstream out(cfg);
        out << "[model]\nlambda=2000\nutil=0.2\nband=\"2us:600us\"\n";
    }
    auto r = run("model --config " + cfg + " --out json", false);
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.output);
    CHECK(band_fraction(doc.at("points")[0], "core", "[2us,600us)") ==
          doctest::Approx(0.269892).epsilon(1e-9));
    std::remove(cfg.c_str());
}

TEST_CASE("sweeps order points cores-major then service then utilization") {
    auto r = run("model --queue cxmm1 --lambda 2000 --sweep-cores 2,4 "
                 "--sweep-util 0.2,0.5 --out json",
                 false);
    REQUIRE(r.exit_code == 0);
    json doc = json::parse(r.output);
    const auto& points = doc.at("points");
    REQUIRE(points.size() == 4);
    CHECK(points[0].at("scenario").at("cores") == 2);
    CHECK(points[0].at("scenario").at("utilization").get<double>() ==
          doctest::Approx(0.2));
    CHECK(points[1].at("scenario").at("utilization").get<double>() ==
          doctest::Approx(0.5));
    CHECK(points[3].at("scenario").at("cores") == 4);
}
