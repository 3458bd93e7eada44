#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "greendc/simulator.hpp"

namespace greendc {

enum class ReportFormat { table, csv, records };
/// Accepts "table", "csv" (delimiter-separated) and "records" (JSON lines).
ReportFormat parse_format(const std::string& name);
const char* to_string(ReportFormat f);

/// 15-significant-digit serialization used for every number in reports, so
/// that re-runs diff cleanly and records round-trip.
std::string format_double15(double v);

/// One emitted record: ordered (name, already-serialized value) pairs.
struct Record {
    std::vector<std::pair<std::string, std::string>> fields;

    void add(const std::string& name, double v);
    void add(const std::string& name, const std::string& v);
    void add(const std::string& name, int v);
    const std::string* find(const std::string& name) const;
};

std::string render_csv(std::span<const Record> records);
std::string render_jsonl(std::span<const Record> records);
std::string render_table(std::span<const Record> records);
std::string render(std::span<const Record> records, ReportFormat f);

std::vector<Record> parse_records_csv(const std::string& text);
std::vector<Record> parse_records_jsonl(const std::string& text);

/// Write-then-rename; the destination appears only on success.
void write_file_atomic(const std::string& path, const std::string& content);

/// Per-slot records of a run, in fixed field order. Deterministic: wall-clock
/// fields are never included.
std::vector<Record> slot_records(const RunSummary& summary,
                                 std::span<const DataCenterSpec> dcs,
                                 std::span<const ServiceClass> classes);
Record summary_record(const RunSummary& summary);

}  // namespace greendc
