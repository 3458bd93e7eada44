#include "greendc/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "greendc/config.hpp"
#include "greendc/optimizer.hpp"
#include "greendc/power_profit.hpp"
#include "greendc/report.hpp"
#include "greendc/simulator.hpp"
#include "greendc/trace_io.hpp"
#include "greendc/validation.hpp"

namespace greendc {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;

struct Common {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string format = "table";
    bool baselines = true;
    int slot = 0;
};

std::string resolve_out(const Common& c, const RunConfig& cfg) {
    if (!c.out_dir.empty()) return c.out_dir;
    if (!cfg.output_dir.empty()) return cfg.output_dir;
    if (const char* env = std::getenv("GREENDC_OUT"); env && *env) return env;
    return ".";
}

const char* extension(ReportFormat f) {
    switch (f) {
        case ReportFormat::table: return ".txt";
        case ReportFormat::csv: return ".csv";
        case ReportFormat::records: return ".jsonl";
    }
    return ".txt";
}

RunConfig load(const Common& c) {
    if (c.config_path.empty()) throw ConfigError("missing --config");
    RunConfig cfg = load_config(c.config_path);
    if (c.seed) {
        cfg.solver.seed = *c.seed;
        cfg.simulator.solver.seed = *c.seed;
        cfg.mc.seed = *c.seed;
    }
    return cfg;
}

TraceSet traces_for(const RunConfig& cfg) {
    if (!cfg.trace_file.empty()) return load_traces(cfg.trace_file, cfg);
    if (cfg.has_generator) return synth_traces(cfg.generator, cfg.solver.seed);
    throw ConfigError("config has neither traces.file nor traces.generator");
}

void emit(const std::string& out_dir, const std::string& stem, ReportFormat f,
          std::span<const Record> records, bool echo) {
    const std::string path = out_dir + "/" + stem + extension(f);
    write_file_atomic(path, render(records, f));
    if (echo) std::cout << render_table(records);
    std::cout << "wrote " << path << "\n";
}

int cmd_solve(const Common& c) {
    const RunConfig cfg = load(c);
    const ReportFormat fmt = parse_format(c.format);
    const std::string out = resolve_out(c, cfg);
    TraceSet all = traces_for(cfg);
    if (c.slot < 0 || c.slot >= static_cast<int>(all.slots.size()))
        throw ConfigError("slot index out of range (have " +
                          std::to_string(all.slots.size()) + " slots)");
    TraceSet one = all;
    one.slots = {all.slots[static_cast<std::size_t>(c.slot)]};
    SimOptions opts = cfg.simulator;
    opts.run_baselines = c.baselines;
    RunSummary summary = run(one, cfg.data_centers, cfg.classes, opts);
    summary.slots[0].slot = c.slot;
    const auto records = slot_records(summary, cfg.data_centers, cfg.classes);
    emit(out, "solve", fmt, records, true);
    const auto& rep = summary.slots[0];
    std::cout << "status: " << to_string(rep.solve.status);
    if (!rep.solve.message.empty()) std::cout << " (" << rep.solve.message << ")";
    std::cout << "\n";
    if (!rep.solve.gate_failures.empty()) {
        std::cout << "profitability gate failed for:";
        for (auto [i, j] : rep.solve.gate_failures)
            std::cout << " (" << cfg.data_centers[i].name << ", " << cfg.classes[j].name << ")";
        std::cout << "\n";
    }
    return kExitOk;
}

int cmd_simulate(const Common& c) {
    const RunConfig cfg = load(c);
    const ReportFormat fmt = parse_format(c.format);
    const std::string out = resolve_out(c, cfg);
    const TraceSet traces = traces_for(cfg);
    SimOptions opts = cfg.simulator;
    opts.run_baselines = c.baselines;
    const RunSummary summary = run(traces, cfg.data_centers, cfg.classes, opts);
    const auto records = slot_records(summary, cfg.data_centers, cfg.classes);
    emit(out, "slots", fmt, records, false);
    const Record total = summary_record(summary);
    const std::vector<Record> totals{total};
    emit(out, "summary", fmt, totals, true);
    return kExitOk;
}

int cmd_validate_loss(const Common& c) {
    const RunConfig cfg = load(c);
    const ReportFormat fmt = parse_format(c.format);
    const std::string out = resolve_out(c, cfg);

    const double lam = 100.0;
    std::vector<Record> records;
    int in_range = 0, within = 0;
    for (double cv : {0.1, 0.3}) {
        for (double ratio : {1.05, 1.1, 1.2, 1.5}) {
            for (double tau : {1.0, 5.0, 30.0}) {
                WorkloadStats st;
                st.mean_rate = lam;
                st.variance = cv * cv * lam * lam;
                st.autocov = {st.variance};
                QueueSpec q;
                q.alloc_rate = lam;
                q.service_rate = ratio * lam;
                q.deadline = tau;
                q.network_delay = 0.0;
                const double analytic = loss_probability(st, q, cfg.solver.search).loss_prob;
                const oracle::McResult mc = oracle::mc_loss(st, q, cfg.mc);
                const bool range_ok = analytic >= 1e-4 && analytic <= 1e-1;
                const double dlog =
                    std::abs(std::log10(std::max(analytic, 1e-300)) -
                             std::log10(std::max(mc.loss, 1e-300)));
                const bool ok = dlog <= 0.5;
                if (range_ok) {
                    ++in_range;
                    if (ok) ++within;
                }
                Record r;
                r.add("cv", cv);
                r.add("mu_over_lambda", ratio);
                r.add("eff_deadline_s", tau);
                r.add("analytic", analytic);
                r.add("monte_carlo", mc.loss);
                r.add("mc_half_width", mc.half_width);
                r.add("dlog10", dlog);
                r.add("counted", range_ok ? 1 : 0);
                r.add("within_half_decade", ok ? 1 : 0);
                records.push_back(std::move(r));
            }
        }
    }
    emit(out, "loss_battery", fmt, records, true);
    const bool pass = in_range == 0 || within >= 0.8 * in_range;
    std::cout << "cells in [1e-4, 1e-1]: " << in_range << ", within half a decade: " << within
              << " -> " << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? kExitOk : kExitValidation;
}

int cmd_audit(const Common& c) {
    const RunConfig cfg = load(c);
    const std::string out = resolve_out(c, cfg);
    oracle::AuditGrid grid;
    if (c.seed) grid.seed = *c.seed;
    const oracle::AuditReport rep = oracle::convexity_audit(grid);
    const std::string text = rep.to_text();
    write_file_atomic(out + "/audit.txt", text);
    std::cout << text << "wrote " << out << "/audit.txt\n";
    return rep.all_pass() ? kExitOk : kExitValidation;
}

int cmd_brute_force(const Common& c) {
    const RunConfig cfg = load(c);
    const ReportFormat fmt = parse_format(c.format);
    const std::string out = resolve_out(c, cfg);
    TraceSet all = traces_for(cfg);
    if (c.slot < 0 || c.slot >= static_cast<int>(all.slots.size()))
        throw ConfigError("slot index out of range");
    const SlotEnvironment env = all.environment(static_cast<std::size_t>(c.slot));

    const oracle::BruteForceResult bf =
        oracle::brute_force_solve(env, cfg.data_centers, cfg.classes, cfg.grid);
    const ProblemInstance P = build_problem(env, cfg.data_centers, cfg.classes, cfg.solver);
    const SolveResult sr = solve(P, cfg.solver);

    Record r;
    r.add("slot", c.slot);
    r.add("grid_profit", bf.profit);
    r.add("grid_feasible", bf.feasible ? 1 : 0);
    r.add("grid_evaluations", static_cast<int>(bf.evaluations));
    r.add("solver_profit", sr.objective);
    r.add("solver_status", std::string(to_string(sr.status)));
    r.add("solver_minus_grid", sr.objective - bf.profit);
    const std::vector<Record> records{r};
    emit(out, "brute_force", fmt, records, true);
    return kExitOk;
}

int cmd_gen_traces(const Common& c) {
    const RunConfig cfg = load(c);
    if (!cfg.has_generator) throw ConfigError("config has no traces.generator section");
    const std::string out = resolve_out(c, cfg);
    const TraceSet traces = synth_traces(cfg.generator, cfg.solver.seed);
    const std::string path = out + "/traces.csv";
    write_file_atomic(path, trace_csv(traces, cfg.data_centers, cfg.classes));
    std::cout << "wrote " << path << " (" << traces.slots.size() << " slots)\n";
    return kExitOk;
}

int guarded(const Common& c, int (*fn)(const Common&)) {
    try {
        return fn(c);
    } catch (const ConfigError& e) {
        std::cerr << "error: category=usage: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: category=usage: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: category=runtime: " << e.what() << "\n";
        // Best-effort diagnostics file; never a partial report.
        try {
            const std::string out = c.out_dir.empty() ? "." : c.out_dir;
            write_file_atomic(out + "/diagnostics.txt",
                              std::string("runtime failure: ") + e.what() + "\n");
        } catch (...) {
        }
        return kExitRuntime;
    }
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"workload distribution across green data centers"};
    app.require_subcommand(1);
    Common c;

    auto add_common = [&](CLI::App* sub, bool with_format = true) {
        sub->add_option("--config", c.config_path, "config file (JSON)");
        sub->add_option("--out", c.out_dir, "output directory");
        sub->add_option("--seed", c.seed, "seed override");
        if (with_format)
            sub->add_option("--format", c.format, "table, csv or records")
                ->check(CLI::IsMember({"table", "csv", "records"}));
    };

    CLI::App* s_solve = app.add_subcommand("solve", "optimize one slot");
    add_common(s_solve);
    s_solve->add_option("--slot", c.slot, "slot index");
    c.baselines = false;
    s_solve->add_flag("--baselines,!--no-baselines", c.baselines, "also run the baselines");

    CLI::App* s_sim = app.add_subcommand("simulate", "replay all slots with baselines");
    add_common(s_sim);
    s_sim->add_flag("--baselines,!--no-baselines", c.baselines, "run the baselines (default on)");

    CLI::App* s_val = app.add_subcommand("validate-loss", "Monte Carlo loss battery");
    add_common(s_val);

    CLI::App* s_audit = app.add_subcommand("audit-convexity", "bounds and curvature audit");
    add_common(s_audit, false);

    CLI::App* s_bf = app.add_subcommand("brute-force", "grid oracle on a tiny instance");
    add_common(s_bf);
    s_bf->add_option("--slot", c.slot, "slot index");

    CLI::App* s_gen = app.add_subcommand("gen-traces", "write synthetic traces");
    add_common(s_gen, false);

    try {
        app.parse(argc, const_cast<char**>(argv));
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }

    if (s_solve->parsed()) return guarded(c, cmd_solve);
    if (s_sim->parsed()) {
        if (s_sim->count("--baselines") == 0) c.baselines = true;
        return guarded(c, cmd_simulate);
    }
    if (s_val->parsed()) return guarded(c, cmd_validate_loss);
    if (s_audit->parsed()) return guarded(c, cmd_audit);
    if (s_bf->parsed()) return guarded(c, cmd_brute_force);
    if (s_gen->parsed()) return guarded(c, cmd_gen_traces);
    return kExitUsage;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("greendc");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace greendc
