#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "greendc/cli.hpp"
#include "greendc/config.hpp"
#include "greendc/report.hpp"
#include "greendc/simulator.hpp"
#include "greendc/trace_io.hpp"

using namespace greendc;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

const char* kMinimalConfig = R"({
  "version": 1,
  "data_centers": [{"name": "dc1"}],
  "classes": [{"name": "web"}]
})";

const char* kPaperStyleConfig = R"({
  "version": 1,
  "data_centers": [
    {"name": "dc1", "idle_power_kw": 0.1, "peak_power_kw": 0.2, "pue": 1.2,
     "max_servers": 2000, "network_delay_s": 0.02, "green_unit_cost": 0.02},
    {"name": "dc2", "idle_power_kw": 0.1, "peak_power_kw": 0.2, "pue": 1.2,
     "max_servers": 2000, "network_delay_s": 0.03, "green_unit_cost": 0.03},
    {"name": "dc3", "idle_power_kw": 0.1, "peak_power_kw": 0.2, "pue": 1.2,
     "max_servers": 2000, "network_delay_s": 0.04, "green_unit_cost": 0.025}
  ],
  "classes": [
    {"name": "web", "deadline_s": 1.5, "income": 0.0004, "penalty": 0.0008,
     "per_server_capacity": 10, "drop_threshold": 5.0},
    {"name": "video", "deadline_s": 4.0, "income": 0.0008, "penalty": 0.0016,
     "per_server_capacity": 5, "drop_threshold": 5.0}
  ]
})";

std::string temp_dir() {
    static int counter = 0;
    const fs::path p =
        fs::temp_directory_path() / ("greendc_test_" + std::to_string(::getpid()) + "_" +
                                     std::to_string(counter++));
    fs::create_directories(p);
    return p.string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

RunConfig two_dc_config() {
    RunConfig cfg = parse_config(R"({
      "version": 1,
      "data_centers": [{"name": "dc1"}, {"name": "dc2"}],
      "classes": [{"name": "web", "deadline_s": 2.0, "income": 0.001,
                   "penalty": 0.002, "per_server_capacity": 10, "drop_threshold": 5.0}]
    })");
    return cfg;
}

}  // namespace

TEST_CASE("config: minimal file loads with defaults") {
    const RunConfig cfg = parse_config(kMinimalConfig);
    REQUIRE(cfg.data_centers.size() == 1);
    REQUIRE(cfg.classes.size() == 1);
    CHECK(cfg.data_centers[0].pue == 1.2);
    CHECK(cfg.classes[0].per_server_capacity == 1.0);
    CHECK(cfg.solver.tolerance == 1e-6);
    CHECK(cfg.solver.multistart == 3);
    CHECK(cfg.mc.replications == 20);
}

TEST_CASE("config: invariant violations name the failing field") {
    CHECK_THROWS_WITH(parse_config(R"({"version":1,
        "data_centers":[{"name":"dc1","pue":0.9}],
        "classes":[{"name":"web"}]})"),
                      Catch::Matchers::ContainsSubstring("pue"));
    CHECK_THROWS_WITH(parse_config(R"({"version":1,
        "data_centers":[{"name":"dc1","typo_field":1}],
        "classes":[{"name":"web"}]})"),
                      Catch::Matchers::ContainsSubstring("typo_field"));
    CHECK_THROWS_WITH(parse_config("{not json"),
                      Catch::Matchers::ContainsSubstring("parse"));
    CHECK_THROWS_AS(parse_config(R"({"version":2,
        "data_centers":[{"name":"dc1"}], "classes":[{"name":"web"}]})"),
                    ConfigError);
    // Delay beyond a deadline is a cross-field error.
    CHECK_THROWS_WITH(parse_config(R"({"version":1,
        "data_centers":[{"name":"dc1","network_delay_s":3.0}],
        "classes":[{"name":"web","deadline_s":2.0}]})"),
                      Catch::Matchers::ContainsSubstring("deadline"));
}

TEST_CASE("config: evaluation-style parameters are echoed back") {
    const RunConfig cfg = parse_config(kPaperStyleConfig);
    REQUIRE(cfg.data_centers.size() == 3);
    REQUIRE(cfg.classes.size() == 2);
    for (const auto& d : cfg.data_centers) {
        CHECK(d.peak_power == 0.2);
        CHECK(d.idle_power == 0.1);
        CHECK(d.pue == 1.2);
    }
    CHECK(cfg.classes[1].income == 0.0008);
}

TEST_CASE("traces: hourly rows expand to slot granularity") {
    RunConfig cfg = two_dc_config();
    cfg.slot_length = 900.0;
    std::ostringstream os;
    os << "timestamp,green_kw_dc1,green_kw_dc2,price_dc1,price_dc2,rate_web\n";
    for (int h = 0; h < 24; ++h)
        os << h * 3600 << "," << 10 + h << "," << 5 + h << ",0.1,0.2," << 100 + h << "\n";
    const TraceSet ts = parse_traces(os.str(), cfg);
    REQUIRE(ts.slots.size() == 96);
    // Step expansion: four slots per hourly row.
    CHECK(ts.slots[0].green_kwh[0] == Approx(10.0 * 900 / 3600).epsilon(1e-12));
    CHECK(ts.slots[3].green_kwh[0] == Approx(10.0 * 900 / 3600).epsilon(1e-12));
    CHECK(ts.slots[4].green_kwh[0] == Approx(11.0 * 900 / 3600).epsilon(1e-12));
    CHECK(ts.slots[95].class_stats[0].mean_rate == Approx(123.0));
    CHECK(ts.slots[0].class_stats[0].variance == 0.0);
}

TEST_CASE("traces: malformed files name the row and column") {
    RunConfig cfg = two_dc_config();
    const std::string header = "timestamp,green_kw_dc1,green_kw_dc2,price_dc1,price_dc2,rate_web\n";
    CHECK_THROWS_WITH(parse_traces(header + "0,1,1,0.1,0.1,5\n0,1,1,0.1,0.1,5\n", cfg),
                      Catch::Matchers::ContainsSubstring("duplicated timestamp"));
    CHECK_THROWS_WITH(parse_traces(header + "10,1,1,0.1,0.1,5\n5,1,1,0.1,0.1,5\n", cfg),
                      Catch::Matchers::ContainsSubstring("non-monotone"));
    CHECK_THROWS_WITH(parse_traces(header + "0,1,1,-0.1,0.1,5\n", cfg),
                      Catch::Matchers::ContainsSubstring("price_dc1"));
    CHECK_THROWS_WITH(
        parse_traces("timestamp,green_kw_dc1,price_dc1,price_dc2,rate_web\n0,1,0.1,0.1,5\n",
                     cfg),
        Catch::Matchers::ContainsSubstring("green_kw_dc2"));
    CHECK_THROWS_WITH(parse_traces("timestamp,bogus\n0,1\n", cfg),
                      Catch::Matchers::ContainsSubstring("bogus"));
    CHECK_THROWS_WITH(parse_traces(header + "0,1,1,0.1,0.1,abc\n", cfg),
                      Catch::Matchers::ContainsSubstring("not a number"));
}

TEST_CASE("traces: per-second samples aggregate to slot statistics") {
    RunConfig cfg = two_dc_config();
    cfg.slot_length = 900.0;
    cfg.sim_lag_cap = 4;
    std::ostringstream os;
    os.precision(17);
    os << "timestamp,green_kw_dc1,green_kw_dc2,price_dc1,price_dc2,rate_web\n";
    std::vector<double> first_slot;
    for (int s = 0; s < 1800; ++s) {
        const double rate = 100.0 + 20.0 * ((s * 37) % 11) / 11.0;
        if (s < 900) first_slot.push_back(rate);
        os << s << ",3,4,0.1,0.2," << rate << "\n";
    }
    const TraceSet ts = parse_traces(os.str(), cfg);
    REQUIRE(ts.slots.size() == 2);
    const WorkloadStats expect = estimate_stats(first_slot, 4);
    CHECK(ts.slots[0].class_stats[0].mean_rate == Approx(expect.mean_rate).epsilon(1e-12));
    CHECK(ts.slots[0].class_stats[0].variance == Approx(expect.variance).epsilon(1e-12));
    REQUIRE(ts.slots[0].class_stats[0].autocov.size() == expect.autocov.size());
    for (std::size_t l = 0; l < expect.autocov.size(); ++l)
        CHECK(ts.slots[0].class_stats[0].autocov[l] ==
              Approx(expect.autocov[l]).epsilon(1e-12));
}

TEST_CASE("generated traces round-trip through the loader") {
    RunConfig cfg = two_dc_config();
    cfg.slot_length = 900.0;
    cfg.sim_lag_cap = 6;
    SynthSpec spec;
    spec.n_slots = 4;
    spec.slot_length = 900.0;
    spec.samples_per_slot = 90;
    spec.lag_cap = 6;
    spec.wind = {{15.0, 5.0, 3.0, -1, 0, 0}, {25.0, 0.0, 12.0, -1, 0, 0}};
    spec.price = {{0.08, 0.01, 18.0, -1, -1, 0}, {0.11, 0.0, 18.0, -1, -1, 0}};
    spec.classes = {{400.0, 100.0, 14.0, 0.3, 0.4}};

    const TraceSet ts = synth_traces(spec, 13);
    const std::string csv = trace_csv(ts, cfg.data_centers, cfg.classes);
    const TraceSet back = parse_traces(csv, cfg);
    REQUIRE(back.slots.size() == ts.slots.size());
    for (std::size_t k = 0; k < ts.slots.size(); ++k) {
        CHECK(back.slots[k].green_kwh[0] == Approx(ts.slots[k].green_kwh[0]).epsilon(1e-12));
        CHECK(back.slots[k].price[1] == Approx(ts.slots[k].price[1]).epsilon(1e-12));
        CHECK(back.slots[k].class_stats[0].mean_rate ==
              Approx(ts.slots[k].class_stats[0].mean_rate).epsilon(1e-12));
        CHECK(back.slots[k].class_stats[0].variance ==
              Approx(ts.slots[k].class_stats[0].variance).epsilon(1e-12));
    }
}

TEST_CASE("records round-trip at 15 significant digits") {
    std::vector<Record> records;
    Record r;
    r.add("slot", 3);
    r.add("status", std::string("optimal"));
    r.add("profit", 1234.56789012345678);
    r.add("tiny", 6.9996571715991633e-06);
    r.add("empty", std::string());
    records.push_back(r);
    Record r2 = r;
    r2.fields[0].second = "4";
    records.push_back(r2);

    for (const auto parse : {parse_records_csv, parse_records_jsonl}) {
        const std::string text = parse == parse_records_csv ? render_csv(records)
                                                            : render_jsonl(records);
        const std::vector<Record> back = parse(text);
        REQUIRE(back.size() == records.size());
        for (std::size_t i = 0; i < records.size(); ++i) {
            REQUIRE(back[i].fields.size() == records[i].fields.size());
            for (std::size_t f = 0; f < records[i].fields.size(); ++f) {
                CHECK(back[i].fields[f].first == records[i].fields[f].first);
                CHECK(back[i].fields[f].second == records[i].fields[f].second);
            }
        }
    }
}

TEST_CASE("atomic writes never leave partial outputs") {
    const std::string dir = temp_dir();
    write_file_atomic(dir + "/nested/out.txt", "payload");
    CHECK(read_file(dir + "/nested/out.txt") == "payload");
    // Parent is a regular file: the write fails and the target does not appear.
    write_file(dir + "/blocker", "x");
    CHECK_THROWS(write_file_atomic(dir + "/blocker/out.txt", "payload"));
    CHECK(!fs::exists(dir + "/blocker/out.txt"));
}

TEST_CASE("cli: usage errors exit with code 2") {
    CHECK(run_cli({"frobnicate"}) == 2);
    CHECK(run_cli({"solve", "--config", "/nonexistent/nope.json"}) == 2);
    CHECK(run_cli({"solve"}) == 2);  // missing --config
    CHECK(run_cli({"--help"}) == 0);
}

TEST_CASE("cli: solve and gen-traces end to end") {
    const std::string dir = temp_dir();
    const std::string config = dir + "/config.json";
    write_file(config, R"({
      "version": 1,
      "data_centers": [{"name": "dc1", "green_unit_cost": 0.02},
                        {"name": "dc2", "green_unit_cost": 0.03}],
      "classes": [{"name": "web", "deadline_s": 2.0, "income": 0.001,
                   "penalty": 0.002, "per_server_capacity": 10, "drop_threshold": 5.0}],
      "solver": {"seed": 5},
      "traces": {"generator": {
        "n_slots": 2, "slot_length_s": 900, "samples_per_slot": 40,
        "wind": [{"base_kw": 15}, {"base_kw": 10}],
        "price": [{"base": 0.09}, {"base": 0.11}],
        "workload": [{"base_rate": 300, "amp": 50, "cv": 0.25}]
      }},
      "output_dir": ")" + dir + R"(/out"
    })");

    CHECK(run_cli({"solve", "--config", config, "--format", "csv"}) == 0);
    const auto records = parse_records_csv(read_file(dir + "/out/solve.csv"));
    REQUIRE(records.size() == 1);
    CHECK(*records[0].find("status") == "optimal");

    CHECK(run_cli({"gen-traces", "--config", config}) == 0);
    CHECK(fs::exists(dir + "/out/traces.csv"));

    // The simulate command writes slots and summary.
    CHECK(run_cli({"simulate", "--config", config, "--format", "records",
                   "--no-baselines"}) == 0);
    CHECK(fs::exists(dir + "/out/slots.jsonl"));
    CHECK(fs::exists(dir + "/out/summary.jsonl"));
    const auto slots = parse_records_jsonl(read_file(dir + "/out/slots.jsonl"));
    CHECK(slots.size() == 2);
}

TEST_CASE("cli: validate-loss reports are byte-identical per seed") {
    const std::string dir = temp_dir();
    const std::string config = dir + "/config.json";
    write_file(config, R"({
      "version": 1,
      "data_centers": [{"name": "dc1"}],
      "classes": [{"name": "web", "deadline_s": 2.0, "income": 0.001,
                   "penalty": 0.002, "per_server_capacity": 10, "drop_threshold": 5.0}],
      "monte_carlo": {"horizon_s": 20000, "replications": 6, "seed": 7, "burn_in_s": 200},
      "output_dir": ")" + dir + R"(/out"
    })");

    const int rc1 = run_cli({"validate-loss", "--config", config, "--format", "csv"});
    const std::string first = read_file(dir + "/out/loss_battery.csv");
    const int rc2 = run_cli({"validate-loss", "--config", config, "--format", "csv"});
    const std::string second = read_file(dir + "/out/loss_battery.csv");
    CHECK(rc1 == rc2);
    CHECK(first == second);
    CHECK((rc1 == 0 || rc1 == 3));
}

TEST_CASE("cli: audit-convexity reports the documented red checks") {
    const std::string dir = temp_dir();
    const std::string config = dir + "/config.json";
    write_file(config, R"({
      "version": 1,
      "data_centers": [{"name": "dc1"}],
      "classes": [{"name": "web"}],
      "output_dir": ")" + dir + R"(/out"
    })");
    // The curvature and midpoint checks fail by the model's actual shape, so
    // the audit exit code is the validation-failure code.
    CHECK(run_cli({"audit-convexity", "--config", config}) == 3);
    const std::string text = read_file(dir + "/out/audit.txt");
    CHECK(text.find("[PASS] mills-tail-sandwich") != std::string::npos);
    CHECK(text.find("[FAIL] curvature-nonnegativity") != std::string::npos);
}
