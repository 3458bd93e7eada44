#include "greendc/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace greendc {

ReportFormat parse_format(const std::string& name) {
    if (name == "table") return ReportFormat::table;
    if (name == "csv") return ReportFormat::csv;
    if (name == "records") return ReportFormat::records;
    throw std::invalid_argument("unknown format '" + name + "' (table, csv, records)");
}

const char* to_string(ReportFormat f) {
    switch (f) {
        case ReportFormat::table: return "table";
        case ReportFormat::csv: return "csv";
        case ReportFormat::records: return "records";
    }
    return "unknown";
}

std::string format_double15(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    return buf;
}

namespace {

struct FieldRef {
    const std::string* text;
    bool numeric;
};

bool looks_numeric(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

}  // namespace

void Record::add(const std::string& name, double v) { fields.emplace_back(name, format_double15(v)); }
void Record::add(const std::string& name, const std::string& v) { fields.emplace_back(name, v); }
void Record::add(const std::string& name, int v) { fields.emplace_back(name, std::to_string(v)); }

const std::string* Record::find(const std::string& name) const {
    for (const auto& [n, v] : fields)
        if (n == name) return &v;
    return nullptr;
}

std::string render_csv(std::span<const Record> records) {
    std::ostringstream os;
    if (records.empty()) return "";
    for (std::size_t c = 0; c < records[0].fields.size(); ++c)
        os << (c ? "," : "") << records[0].fields[c].first;
    os << "\n";
    for (const auto& r : records) {
        for (std::size_t c = 0; c < r.fields.size(); ++c) os << (c ? "," : "") << r.fields[c].second;
        os << "\n";
    }
    return os.str();
}

std::string render_jsonl(std::span<const Record> records) {
    std::ostringstream os;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        for (const auto& [name, value] : r.fields) {
            if (value.empty()) {
                j[name] = nullptr;
            } else if (looks_numeric(value)) {
                j[name] = std::strtod(value.c_str(), nullptr);
            } else {
                j[name] = value;
            }
        }
        os << j.dump() << "\n";
    }
    return os.str();
}

std::string render_table(std::span<const Record> records) {
    std::ostringstream os;
    if (records.empty()) return "";
    std::vector<std::size_t> width(records[0].fields.size());
    for (std::size_t c = 0; c < width.size(); ++c) width[c] = records[0].fields[c].first.size();
    for (const auto& r : records)
        for (std::size_t c = 0; c < r.fields.size() && c < width.size(); ++c)
            width[c] = std::max(width[c], r.fields[c].second.size());
    for (std::size_t c = 0; c < width.size(); ++c) {
        os << (c ? "  " : "");
        os.width(static_cast<std::streamsize>(width[c]));
        os << std::left << records[0].fields[c].first;
    }
    os << "\n";
    for (const auto& r : records) {
        for (std::size_t c = 0; c < r.fields.size(); ++c) {
            os << (c ? "  " : "");
            os.width(static_cast<std::streamsize>(width[c]));
            os << std::left << r.fields[c].second;
        }
        os << "\n";
    }
    return os.str();
}

std::string render(std::span<const Record> records, ReportFormat f) {
    switch (f) {
        case ReportFormat::table: return render_table(records);
        case ReportFormat::csv: return render_csv(records);
        case ReportFormat::records: return render_jsonl(records);
    }
    return "";
}

std::vector<Record> parse_records_csv(const std::string& text) {
    std::vector<Record> out;
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) return out;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::string cur;
        for (char c : l) {
            if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else if (c != '\r') {
                cur += c;
            }
        }
        cells.push_back(cur);
        return cells;
    };
    const std::vector<std::string> header = split(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line);
        if (cells.size() != header.size())
            throw std::runtime_error("record csv: ragged row");
        Record r;
        for (std::size_t c = 0; c < header.size(); ++c) r.add(header[c], cells[c]);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<Record> parse_records_jsonl(const std::string& text) {
    std::vector<Record> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const nlohmann::ordered_json j = nlohmann::ordered_json::parse(line);
        Record r;
        for (const auto& [name, value] : j.items()) {
            if (value.is_null())
                r.add(name, std::string());
            else if (value.is_number())
                r.add(name, value.get<double>());
            else
                r.add(name, value.get<std::string>());
        }
        out.push_back(std::move(r));
    }
    return out;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, target);
}

std::vector<Record> slot_records(const RunSummary& summary,
                                 std::span<const DataCenterSpec> dcs,
                                 std::span<const ServiceClass> classes) {
    std::vector<Record> out;
    for (const auto& rep : summary.slots) {
        Record r;
        r.add("slot", rep.slot);
        r.add("status", std::string(to_string(rep.solve.status)));
        r.add("gate_ok", rep.solve.profitability_ok ? 1 : 0);
        r.add("kkt_stationarity", rep.solve.kkt.stationarity);
        r.add("kkt_equality", rep.solve.kkt.equality);
        r.add("kkt_inequality", rep.solve.kkt.inequality);
        r.add("profit", rep.profit.total());
        r.add("green_revenue", rep.profit.green_revenue);
        r.add("green_cost", rep.profit.green_cost);
        r.add("brown_revenue", rep.profit.brown_revenue);
        r.add("brown_cost", rep.profit.brown_cost);
        r.add("profit_base", rep.profit_base);
        r.add("profit_max", rep.profit_max);
        if (rep.norm_gain)
            r.add("norm_gain", *rep.norm_gain);
        else
            r.add("norm_gain", std::string());
        if (rep.mm1_profit)
            r.add("mm1_profit_gd1", *rep.mm1_profit);
        else
            r.add("mm1_profit_gd1", std::string());
        if (rep.equal_profit)
            r.add("equal_profit_gd1", *rep.equal_profit);
        else
            r.add("equal_profit_gd1", std::string());
        for (std::size_t i = 0; i < dcs.size(); ++i) {
            r.add("green_cap_" + dcs[i].name,
                  i < rep.solve.green_caps.size() ? rep.solve.green_caps[i] : 0);
        }
        const auto& alloc = rep.solve.allocation;
        for (std::size_t i = 0; i < dcs.size(); ++i) {
            for (std::size_t j = 0; j < classes.size(); ++j) {
                const std::string suffix = "_" + dcs[i].name + "_" + classes[j].name;
                const bool have = alloc.n_dcs() == dcs.size() && alloc.n_classes() == classes.size();
                const QueueAllocation qg = have ? alloc.green[i][j] : QueueAllocation{};
                const QueueAllocation qb = have ? alloc.brown[i][j] : QueueAllocation{};
                r.add("lambda_g" + suffix, qg.alloc_rate);
                r.add("mu_g" + suffix, qg.service_rate);
                r.add("loss_g" + suffix,
                      !rep.profit.green.empty() ? rep.profit.green[i][j].loss_prob : 0.0);
                r.add("lambda_b" + suffix, qb.alloc_rate);
                r.add("mu_b" + suffix, qb.service_rate);
                r.add("loss_b" + suffix,
                      !rep.profit.brown.empty() ? rep.profit.brown[i][j].loss_prob : 0.0);
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

Record summary_record(const RunSummary& summary) {
    Record r;
    r.add("slots", static_cast<int>(summary.slots.size()));
    r.add("total_profit", summary.total_profit);
    r.add("total_mm1_gd1", summary.total_mm1);
    r.add("total_equal_gd1", summary.total_equal);
    r.add("delta_vs_mm1", summary.total_profit - summary.total_mm1);
    r.add("delta_vs_equal", summary.total_profit - summary.total_equal);
    return r;
}

}  // namespace greendc
