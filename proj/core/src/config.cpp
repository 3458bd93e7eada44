#include "greendc/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace greendc {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& what) {
    throw ConfigError(origin + ": " + what);
}

void require_object(const json& j, const std::string& origin, const std::string& where) {
    if (!j.is_object()) fail(origin, where + " must be an object");
}

void check_keys(const json& j, const std::string& origin, const std::string& where,
                const std::set<std::string>& allowed) {
    for (const auto& [key, _] : j.items()) {
        if (!allowed.count(key)) fail(origin, where + ": unknown field '" + key + "'");
    }
}

double num(const json& j, const std::string& origin, const std::string& field, double dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number()) fail(origin, field + " must be a number");
    return j[field].get<double>();
}

int integer(const json& j, const std::string& origin, const std::string& field, int dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_number_integer()) fail(origin, field + " must be an integer");
    return j[field].get<int>();
}

bool boolean(const json& j, const std::string& origin, const std::string& field, bool dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_boolean()) fail(origin, field + " must be a boolean");
    return j[field].get<bool>();
}

std::string text(const json& j, const std::string& origin, const std::string& field,
                 const std::string& dflt) {
    if (!j.contains(field)) return dflt;
    if (!j[field].is_string()) fail(origin, field + " must be a string");
    return j[field].get<std::string>();
}

bool identifier_ok(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) return false;
    return true;
}

DataCenterSpec parse_dc(const json& j, const std::string& origin, std::size_t idx) {
    const std::string where = "data_centers[" + std::to_string(idx) + "]";
    require_object(j, origin, where);
    check_keys(j, origin, where,
               {"name", "idle_power_kw", "peak_power_kw", "pue", "max_servers",
                "network_delay_s", "green_unit_cost"});
    DataCenterSpec dc;
    dc.name = text(j, origin, "name", "dc" + std::to_string(idx + 1));
    if (!identifier_ok(dc.name))
        fail(origin, where + ": name must be alphanumeric/underscore (trace column mapping)");
    dc.idle_power = num(j, origin, "idle_power_kw", dc.idle_power);
    dc.peak_power = num(j, origin, "peak_power_kw", dc.peak_power);
    dc.pue = num(j, origin, "pue", dc.pue);
    dc.max_servers = num(j, origin, "max_servers", dc.max_servers);
    dc.network_delay = num(j, origin, "network_delay_s", dc.network_delay);
    dc.green_unit_cost = num(j, origin, "green_unit_cost", dc.green_unit_cost);
    try {
        dc.validate();
    } catch (const std::invalid_argument& e) {
        fail(origin, where + ": " + e.what());
    }
    return dc;
}

ServiceClass parse_class(const json& j, const std::string& origin, std::size_t idx) {
    const std::string where = "classes[" + std::to_string(idx) + "]";
    require_object(j, origin, where);
    check_keys(j, origin, where,
               {"name", "deadline_s", "income", "penalty", "per_server_capacity",
                "drop_threshold"});
    ServiceClass c;
    c.name = text(j, origin, "name", "class" + std::to_string(idx + 1));
    if (!identifier_ok(c.name))
        fail(origin, where + ": name must be alphanumeric/underscore (trace column mapping)");
    c.deadline = num(j, origin, "deadline_s", c.deadline);
    c.income = num(j, origin, "income", c.income);
    c.penalty = num(j, origin, "penalty", c.penalty);
    c.per_server_capacity = num(j, origin, "per_server_capacity", c.per_server_capacity);
    c.drop_threshold = num(j, origin, "drop_threshold", c.drop_threshold);
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        fail(origin, where + ": " + e.what());
    }
    return c;
}

void parse_solver(const json& j, const std::string& origin, SolveOptions& o) {
    require_object(j, origin, "solver");
    check_keys(j, origin, "solver",
               {"tolerance", "max_iterations", "barrier_initial_weight", "barrier_reduction",
                "epsilon_alloc_frac", "seed", "multistart", "total_capacity_constraint",
                "relax_demand_equality", "n_max", "increase_run"});
    o.tolerance = num(j, origin, "tolerance", o.tolerance);
    if (o.tolerance <= 0.0) fail(origin, "solver.tolerance must be > 0");
    o.max_iterations = integer(j, origin, "max_iterations", o.max_iterations);
    o.barrier_initial_weight = num(j, origin, "barrier_initial_weight", o.barrier_initial_weight);
    o.barrier_reduction = num(j, origin, "barrier_reduction", o.barrier_reduction);
    if (!(o.barrier_reduction > 0.0 && o.barrier_reduction < 1.0))
        fail(origin, "solver.barrier_reduction must be inside (0, 1)");
    o.epsilon_alloc_frac = num(j, origin, "epsilon_alloc_frac", o.epsilon_alloc_frac);
    if (o.epsilon_alloc_frac <= 0.0) fail(origin, "solver.epsilon_alloc_frac must be > 0");
    o.seed = static_cast<std::uint64_t>(integer(j, origin, "seed", static_cast<int>(o.seed)));
    o.multistart = integer(j, origin, "multistart", o.multistart);
    o.total_capacity_constraint =
        boolean(j, origin, "total_capacity_constraint", o.total_capacity_constraint);
    o.relax_demand_equality =
        boolean(j, origin, "relax_demand_equality", o.relax_demand_equality);
    o.search.n_max = integer(j, origin, "n_max", o.search.n_max);
    o.search.increase_run = integer(j, origin, "increase_run", o.search.increase_run);
}

SynthSpec parse_generator(const json& j, const std::string& origin, std::size_t n_dcs,
                          std::size_t n_classes) {
    require_object(j, origin, "traces.generator");
    check_keys(j, origin, "traces.generator",
               {"n_slots", "slot_length_s", "samples_per_slot", "lag_cap", "wind", "price",
                "workload"});
    SynthSpec g;
    g.n_slots = integer(j, origin, "n_slots", g.n_slots);
    g.slot_length = num(j, origin, "slot_length_s", g.slot_length);
    g.samples_per_slot = integer(j, origin, "samples_per_slot", g.samples_per_slot);
    g.lag_cap = integer(j, origin, "lag_cap", g.lag_cap);

    auto arr = [&](const char* name) -> const json& {
        if (!j.contains(name) || !j[name].is_array())
            fail(origin, std::string("traces.generator.") + name + " must be an array");
        return j[name];
    };
    const json& wind = arr("wind");
    if (wind.size() != n_dcs) fail(origin, "traces.generator.wind needs one entry per DC");
    for (std::size_t i = 0; i < n_dcs; ++i) {
        const std::string where = "traces.generator.wind[" + std::to_string(i) + "]";
        check_keys(wind[i], origin, where,
                   {"base_kw", "amp_kw", "peak_hour", "step_hour", "low_kw", "high_kw"});
        SynthSpec::Wind w;
        w.base_kw = num(wind[i], origin, "base_kw", w.base_kw);
        w.amp_kw = num(wind[i], origin, "amp_kw", w.amp_kw);
        w.peak_hour = num(wind[i], origin, "peak_hour", w.peak_hour);
        w.step_hour = num(wind[i], origin, "step_hour", w.step_hour);
        w.low_kw = num(wind[i], origin, "low_kw", w.low_kw);
        w.high_kw = num(wind[i], origin, "high_kw", w.high_kw);
        g.wind.push_back(w);
    }
    const json& price = arr("price");
    if (price.size() != n_dcs) fail(origin, "traces.generator.price needs one entry per DC");
    for (std::size_t i = 0; i < n_dcs; ++i) {
        const std::string where = "traces.generator.price[" + std::to_string(i) + "]";
        check_keys(price[i], origin, where,
                   {"base", "amp", "peak_hour", "trough_start_hour", "trough_end_hour",
                    "trough_value"});
        SynthSpec::Price p;
        p.base = num(price[i], origin, "base", p.base);
        p.amp = num(price[i], origin, "amp", p.amp);
        p.peak_hour = num(price[i], origin, "peak_hour", p.peak_hour);
        p.trough_start_hour = num(price[i], origin, "trough_start_hour", p.trough_start_hour);
        p.trough_end_hour = num(price[i], origin, "trough_end_hour", p.trough_end_hour);
        p.trough_value = num(price[i], origin, "trough_value", p.trough_value);
        g.price.push_back(p);
    }
    const json& work = arr("workload");
    if (work.size() != n_classes)
        fail(origin, "traces.generator.workload needs one entry per class");
    for (std::size_t c = 0; c < n_classes; ++c) {
        const std::string where = "traces.generator.workload[" + std::to_string(c) + "]";
        check_keys(work[c], origin, where, {"base_rate", "amp", "peak_hour", "cv", "ar1"});
        SynthSpec::Workload w;
        w.base_rate = num(work[c], origin, "base_rate", w.base_rate);
        w.amp = num(work[c], origin, "amp", w.amp);
        w.peak_hour = num(work[c], origin, "peak_hour", w.peak_hour);
        w.cv = num(work[c], origin, "cv", w.cv);
        w.ar1 = num(work[c], origin, "ar1", w.ar1);
        if (w.cv < 0.0) fail(origin, where + ".cv must be >= 0");
        g.classes.push_back(w);
    }
    return g;
}

}  // namespace

RunConfig parse_config(const std::string& content, const std::string& origin) {
    json j;
    try {
        j = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    require_object(j, origin, "config");
    check_keys(j, origin, "config",
               {"version", "data_centers", "classes", "solver", "simulator", "monte_carlo",
                "grid", "traces", "output_dir"});

    RunConfig cfg;
    cfg.version = integer(j, origin, "version", 1);
    if (cfg.version != 1) fail(origin, "unsupported config version");

    if (!j.contains("data_centers") || !j["data_centers"].is_array() ||
        j["data_centers"].empty())
        fail(origin, "data_centers must be a non-empty array");
    for (std::size_t i = 0; i < j["data_centers"].size(); ++i)
        cfg.data_centers.push_back(parse_dc(j["data_centers"][i], origin, i));

    if (!j.contains("classes") || !j["classes"].is_array() || j["classes"].empty())
        fail(origin, "classes must be a non-empty array");
    for (std::size_t i = 0; i < j["classes"].size(); ++i)
        cfg.classes.push_back(parse_class(j["classes"][i], origin, i));

    std::set<std::string> names;
    for (const auto& d : cfg.data_centers)
        if (!names.insert(d.name).second) fail(origin, "duplicate data center name " + d.name);
    names.clear();
    for (const auto& c : cfg.classes)
        if (!names.insert(c.name).second) fail(origin, "duplicate class name " + c.name);

    for (const auto& d : cfg.data_centers)
        for (const auto& c : cfg.classes)
            if (d.network_delay >= c.deadline)
                fail(origin, "network_delay of " + d.name + " must stay below deadline of " +
                                 c.name);

    if (j.contains("solver")) parse_solver(j["solver"], origin, cfg.solver);

    if (j.contains("simulator")) {
        const json& s = j["simulator"];
        require_object(s, origin, "simulator");
        check_keys(s, origin, "simulator",
                   {"run_baselines", "profit_max_sweep", "lag_cap", "slot_length_s"});
        cfg.simulator.run_baselines = boolean(s, origin, "run_baselines", true);
        cfg.simulator.profit_max_sweep = integer(s, origin, "profit_max_sweep", 64);
        cfg.sim_lag_cap = integer(s, origin, "lag_cap", cfg.sim_lag_cap);
        cfg.slot_length = num(s, origin, "slot_length_s", cfg.slot_length);
        if (cfg.slot_length <= 0.0) fail(origin, "simulator.slot_length_s must be > 0");
    }
    cfg.simulator.solver = cfg.solver;

    if (j.contains("monte_carlo")) {
        const json& m = j["monte_carlo"];
        require_object(m, origin, "monte_carlo");
        check_keys(m, origin, "monte_carlo", {"horizon_s", "replications", "seed", "burn_in_s"});
        cfg.mc.horizon_s = num(m, origin, "horizon_s", cfg.mc.horizon_s);
        cfg.mc.replications = integer(m, origin, "replications", cfg.mc.replications);
        cfg.mc.seed = static_cast<std::uint64_t>(
            integer(m, origin, "seed", static_cast<int>(cfg.mc.seed)));
        cfg.mc.burn_in_s = num(m, origin, "burn_in_s", cfg.mc.burn_in_s);
        if (!(cfg.mc.horizon_s > cfg.mc.burn_in_s) || cfg.mc.burn_in_s < 0.0)
            fail(origin, "monte_carlo: need horizon_s > burn_in_s >= 0");
    }

    if (j.contains("grid")) {
        const json& g = j["grid"];
        require_object(g, origin, "grid");
        check_keys(g, origin, "grid", {"lambda_steps", "mu_steps", "mu_span"});
        cfg.grid.lambda_steps = integer(g, origin, "lambda_steps", cfg.grid.lambda_steps);
        cfg.grid.mu_steps = integer(g, origin, "mu_steps", cfg.grid.mu_steps);
        cfg.grid.mu_span = num(g, origin, "mu_span", cfg.grid.mu_span);
        if (cfg.grid.lambda_steps < 1 || cfg.grid.mu_steps < 1)
            fail(origin, "grid steps must be >= 1");
    }

    if (j.contains("traces")) {
        const json& t = j["traces"];
        require_object(t, origin, "traces");
        check_keys(t, origin, "traces", {"file", "generator"});
        if (t.contains("file") && t.contains("generator"))
            fail(origin, "traces: give either file or generator, not both");
        if (t.contains("file")) {
            cfg.trace_file = text(t, origin, "file", "");
            if (cfg.trace_file.empty()) fail(origin, "traces.file must be a non-empty path");
            if (!std::filesystem::exists(cfg.trace_file))
                fail(origin, "traces.file does not exist: " + cfg.trace_file);
        } else if (t.contains("generator")) {
            cfg.has_generator = true;
            cfg.generator = parse_generator(t["generator"], origin, cfg.data_centers.size(),
                                            cfg.classes.size());
        } else {
            fail(origin, "traces: needs file or generator");
        }
    }

    cfg.output_dir = text(j, origin, "output_dir", "");
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open config file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str(), path);
}

}  // namespace greendc
