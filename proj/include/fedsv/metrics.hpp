#pragma once

#include <fstream>
#include <iosfwd>
#include <string>
#include <vector>

#include "fedsv/orchestrator.hpp"

namespace fedsv {

// Shortest round-trip decimal form; identical across executions.
std::string format_double(double v);

// Per-round CSV sink. Header then one row per round, flushed as written,
// so a killed run leaves a valid prefix. Columns: run_id, round, defense,
// attack, malicious_fraction, loss, accuracy, selected_count, excluded_ids
// (semicolon-joined), one sv column per client, wall_time_s.
class MetricsWriter {
public:
    MetricsWriter(const std::string& path, const RunConfig& config);

    void append(const RoundRecord& rec);
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::ofstream out_;
    std::string run_id_;
    std::string defense_;
    std::string attack_;
    std::string fraction_;
    int num_clients_;
};

// Writes `<metrics path>.summary`, a key=value footer for the run.
void write_summary_file(const std::string& metrics_path, const RunSummary& summary);

struct MetricsRow {
    std::string run_id;
    int round = 0;
    std::string defense;
    std::string attack;
    double malicious_fraction = 0.0;
    double loss = 0.0;
    double accuracy = 0.0;
    int selected_count = 0;
    std::vector<int> excluded_ids;
    std::vector<double> sv;  // empty when the row carries no SVs
    double wall_time_s = 0.0;
};

struct MetricsContent {
    int num_clients = 0;  // from the sv column count
    std::vector<MetricsRow> rows;
};

// Tolerant reader: malformed rows are skipped with a warning on `warnings`.
MetricsContent read_metrics(const std::string& path, std::ostream& warnings);

std::vector<std::string> split_csv_line(const std::string& line);
std::string csv_escape(const std::string& field);

}  // namespace fedsv
