#include "greendc/trace_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace greendc {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_num(const std::string& s, const std::string& origin, std::size_t row,
                 const std::string& col) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw ConfigError(origin + ": row " + std::to_string(row) + ", column '" + col +
                          "': not a number: '" + s + "'");
    return v;
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

TraceSet parse_traces(const std::string& content, const RunConfig& config,
                      const std::string& origin) {
    const std::size_t nd = config.data_centers.size();
    const std::size_t ncl = config.classes.size();

    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(origin + ": empty trace file");
    const std::vector<std::string> header = split_csv(line);

    // Required columns in any order; extras are rejected to catch typos.
    std::vector<int> green_col(nd, -1), price_col(nd, -1), rate_col(ncl, -1);
    int ts_col = -1;
    for (std::size_t c = 0; c < header.size(); ++c) {
        const std::string& name = header[c];
        bool known = false;
        if (name == "timestamp") {
            ts_col = static_cast<int>(c);
            known = true;
        }
        for (std::size_t i = 0; i < nd; ++i) {
            if (name == "green_kw_" + config.data_centers[i].name) {
                green_col[i] = static_cast<int>(c);
                known = true;
            }
            if (name == "price_" + config.data_centers[i].name) {
                price_col[i] = static_cast<int>(c);
                known = true;
            }
        }
        for (std::size_t j = 0; j < ncl; ++j) {
            if (name == "rate_" + config.classes[j].name) {
                rate_col[j] = static_cast<int>(c);
                known = true;
            }
        }
        if (!known)
            throw ConfigError(origin + ": unknown trace column '" + name + "'");
    }
    if (ts_col < 0) throw ConfigError(origin + ": missing column 'timestamp'");
    for (std::size_t i = 0; i < nd; ++i) {
        if (green_col[i] < 0)
            throw ConfigError(origin + ": missing column 'green_kw_" +
                              config.data_centers[i].name + "'");
        if (price_col[i] < 0)
            throw ConfigError(origin + ": missing column 'price_" +
                              config.data_centers[i].name + "'");
    }
    for (std::size_t j = 0; j < ncl; ++j)
        if (rate_col[j] < 0)
            throw ConfigError(origin + ": missing column 'rate_" + config.classes[j].name + "'");

    struct Row {
        double ts;
        std::vector<double> green_kw, price, rate;
    };
    std::vector<Row> rows;
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (line.empty() || line == "\r") continue;
        const std::vector<std::string> cells = split_csv(line);
        if (cells.size() != header.size())
            throw ConfigError(origin + ": row " + std::to_string(row_no) + ": expected " +
                              std::to_string(header.size()) + " columns, got " +
                              std::to_string(cells.size()));
        Row r;
        r.ts = parse_num(cells[ts_col], origin, row_no, "timestamp");
        if (!rows.empty()) {
            if (r.ts == rows.back().ts)
                throw ConfigError(origin + ": row " + std::to_string(row_no) +
                                  ": duplicated timestamp");
            if (r.ts < rows.back().ts)
                throw ConfigError(origin + ": row " + std::to_string(row_no) +
                                  ": non-monotone timestamp");
        }
        for (std::size_t i = 0; i < nd; ++i) {
            const std::string col_g = "green_kw_" + config.data_centers[i].name;
            const std::string col_p = "price_" + config.data_centers[i].name;
            const double g = parse_num(cells[green_col[i]], origin, row_no, col_g);
            const double p = parse_num(cells[price_col[i]], origin, row_no, col_p);
            if (g < 0.0)
                throw ConfigError(origin + ": row " + std::to_string(row_no) + ", column '" +
                                  col_g + "': negative power");
            if (p < 0.0)
                throw ConfigError(origin + ": row " + std::to_string(row_no) + ", column '" +
                                  col_p + "': negative price");
            r.green_kw.push_back(g);
            r.price.push_back(p);
        }
        for (std::size_t j = 0; j < ncl; ++j) {
            const std::string col_r = "rate_" + config.classes[j].name;
            const double v = parse_num(cells[rate_col[j]], origin, row_no, col_r);
            if (v < 0.0)
                throw ConfigError(origin + ": row " + std::to_string(row_no) + ", column '" +
                                  col_r + "': negative rate");
            r.rate.push_back(v);
        }
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw ConfigError(origin + ": no data rows");

    const double T = config.slot_length;
    const double t0 = rows[0].ts;
    double spacing = T;
    if (rows.size() > 1) {
        std::vector<double> gaps;
        for (std::size_t r = 1; r < rows.size(); ++r) gaps.push_back(rows[r].ts - rows[r - 1].ts);
        std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
        spacing = gaps[gaps.size() / 2];
    }
    const double span = rows.back().ts - t0 + spacing;
    const int n_slots = std::max(1, static_cast<int>(std::ceil(span / T - 1e-9)));

    TraceSet ts;
    ts.slot_length = T;
    ts.n_dcs = nd;
    ts.n_classes = ncl;
    std::size_t cursor = 0;
    for (int k = 0; k < n_slots; ++k) {
        const double lo = t0 + k * T;
        const double hi = lo + T;
        while (cursor + 1 < rows.size() && rows[cursor + 1].ts <= lo) ++cursor;
        // Rows inside [lo, hi); when none, the slot steps from the last row at
        // or before its start.
        std::vector<std::size_t> in_window;
        for (std::size_t r = cursor; r < rows.size() && rows[r].ts < hi; ++r)
            if (rows[r].ts >= lo) in_window.push_back(r);

        TraceSet::Slot slot;
        slot.green_kwh.resize(nd);
        slot.price.resize(nd);
        slot.rate_samples.resize(ncl);
        for (std::size_t i = 0; i < nd; ++i) {
            double kw = 0.0, price = 0.0;
            if (in_window.empty()) {
                kw = rows[cursor].green_kw[i];
                price = rows[cursor].price[i];
            } else {
                for (std::size_t r : in_window) {
                    kw += rows[r].green_kw[i];
                    price += rows[r].price[i];
                }
                kw /= static_cast<double>(in_window.size());
                price /= static_cast<double>(in_window.size());
            }
            slot.green_kwh[i] = kw * T / 3600.0;
            slot.price[i] = price;
        }
        for (std::size_t j = 0; j < ncl; ++j) {
            std::vector<double>& samples = slot.rate_samples[j];
            if (in_window.empty()) {
                samples.push_back(rows[cursor].rate[j]);
            } else {
                for (std::size_t r : in_window) samples.push_back(rows[r].rate[j]);
            }
            if (samples.size() == 1) {
                WorkloadStats st;
                st.mean_rate = samples[0];
                st.variance = 0.0;
                st.autocov = {0.0};
                slot.class_stats.push_back(st);
            } else {
                slot.class_stats.push_back(estimate_stats(samples, config.sim_lag_cap));
            }
        }
        ts.slots.push_back(std::move(slot));
    }
    ts.validate();
    return ts;
}

TraceSet load_traces(const std::string& path, const RunConfig& config) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path + ": cannot open trace file");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_traces(buf.str(), config, path);
}

std::string trace_csv(const TraceSet& traces, std::span<const DataCenterSpec> dcs,
                      std::span<const ServiceClass> classes) {
    std::ostringstream os;
    os << "timestamp";
    for (const auto& d : dcs) os << ",green_kw_" << d.name;
    for (const auto& d : dcs) os << ",price_" << d.name;
    for (const auto& c : classes) os << ",rate_" << c.name;
    os << "\n";

    bool have_samples = !traces.slots.empty();
    std::size_t per_slot = 0;
    for (const auto& s : traces.slots) {
        for (const auto& rs : s.rate_samples) {
            if (rs.empty()) have_samples = false;
            else if (per_slot == 0) per_slot = rs.size();
            else if (rs.size() != per_slot) have_samples = false;
        }
        if (s.rate_samples.size() != traces.n_classes) have_samples = false;
    }

    const double T = traces.slot_length;
    for (std::size_t k = 0; k < traces.slots.size(); ++k) {
        const auto& s = traces.slots[k];
        const double hours = T / 3600.0;
        const std::size_t reps = have_samples ? per_slot : 1;
        for (std::size_t r = 0; r < reps; ++r) {
            const double ts = k * T + (have_samples ? r * (T / per_slot) : 0.0);
            os << fmt17(ts);
            for (std::size_t i = 0; i < traces.n_dcs; ++i)
                os << ',' << fmt17(s.green_kwh[i] / hours);
            for (std::size_t i = 0; i < traces.n_dcs; ++i) os << ',' << fmt17(s.price[i]);
            for (std::size_t j = 0; j < traces.n_classes; ++j)
                os << ','
                   << fmt17(have_samples ? s.rate_samples[j][r] : s.class_stats[j].mean_rate);
            os << "\n";
        }
    }
    return os.str();
}

}  // namespace greendc
