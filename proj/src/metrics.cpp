#include "fedsv/metrics.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <sstream>

#include "fedsv/errors.hpp"

namespace fedsv {

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    fields.push_back(std::move(cur));
    return fields;
}

MetricsWriter::MetricsWriter(const std::string& path, const RunConfig& config)
    : path_(path),
      run_id_(config.run_id),
      defense_(defense_name(config.defense.kind)),
      attack_(attack_name(config.attack.kind)),
      num_clients_(config.num_clients) {
    out_.open(path, std::ios::out | std::ios::trunc);
    if (!out_) throw OutputError("metrics: cannot open for writing: " + path);
    fraction_ = format_double(static_cast<double>(config.num_malicious) /
                              static_cast<double>(config.num_clients));
    out_ << "run_id,round,defense,attack,malicious_fraction,loss,accuracy,"
            "selected_count,excluded_ids";
    for (int i = 0; i < num_clients_; ++i) out_ << ",sv_" << i;
    out_ << ",wall_time_s\n";
    out_.flush();
}

void MetricsWriter::append(const RoundRecord& rec) {
    std::string excluded;
    {
        size_t sel_pos = 0;
        for (int id = 0; id < num_clients_; ++id) {
            if (sel_pos < rec.selected.size() && rec.selected[sel_pos] == id) {
                ++sel_pos;
                continue;
            }
            if (!excluded.empty()) excluded += ';';
            excluded += std::to_string(id);
        }
    }
    out_ << csv_escape(run_id_) << ',' << rec.round << ',' << defense_ << ',' << attack_
         << ',' << fraction_ << ',' << format_double(rec.loss) << ','
         << format_double(rec.accuracy) << ',' << rec.selected.size() << ','
         << csv_escape(excluded);
    for (int i = 0; i < num_clients_; ++i) {
        out_ << ',';
        if (rec.sv_round && i < static_cast<int>(rec.sv.size()))
            out_ << format_double(rec.sv[static_cast<size_t>(i)]);
    }
    out_ << ',' << format_double(rec.wall_time_s) << '\n';
    out_.flush();
}

void write_summary_file(const std::string& metrics_path, const RunSummary& summary) {
    std::ofstream out(metrics_path + ".summary", std::ios::out | std::ios::trunc);
    if (!out) throw OutputError("metrics: cannot open for writing: " + metrics_path + ".summary");
    out << "run_id = " << summary.run_id << "\n";
    out << "defense = " << defense_name(summary.defense) << "\n";
    out << "attack = " << attack_name(summary.attack) << "\n";
    out << "num_clients = " << summary.num_clients << "\n";
    out << "num_malicious = " << summary.num_malicious << "\n";
    out << "master_seed = " << summary.master_seed << "\n";
    out << "rounds = " << summary.records.size() << "\n";
    out << "final_loss = " << format_double(summary.final_loss) << "\n";
    out << "final_accuracy = " << format_double(summary.final_accuracy) << "\n";
    out << "baseline_accuracy = "
        << (std::isnan(summary.baseline_accuracy) ? "none"
                                                  : format_double(summary.baseline_accuracy))
        << "\n";
    out << "success = "
        << (std::isnan(summary.baseline_accuracy) ? "n/a" : (summary.success ? "true" : "false"))
        << "\n";
    if (summary.defense == DefenseKind::FedSv) {
        out << "rounds_to_full_exclusion = "
            << (summary.rounds_to_full_exclusion ? std::to_string(*summary.rounds_to_full_exclusion)
                                                 : "never")
            << "\n";
        out << "false_exclusions = " << summary.false_exclusions << "\n";
    }
    if (!summary.error.empty()) out << "error = " << summary.error << "\n";
}

MetricsContent read_metrics(const std::string& path, std::ostream& warnings) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("metrics: cannot open " + path);
    MetricsContent content;
    std::string line;
    if (!std::getline(in, line)) return content;
    const auto header = split_csv_line(line);
    if (header.empty() || header[0] != "run_id")
        throw std::runtime_error("metrics: not a metrics file: " + path);
    int sv_cols = 0;
    for (const auto& h : header)
        if (h.rfind("sv_", 0) == 0) ++sv_cols;
    content.num_clients = sv_cols;
    const size_t expected = header.size();

    auto to_double = [](const std::string& s, double& out) {
        auto res = std::from_chars(s.data(), s.data() + s.size(), out);
        return res.ec == std::errc() && res.ptr == s.data() + s.size();
    };

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != expected) {
            warnings << path << ":" << line_no << ": skipping row with " << fields.size()
                     << " fields (expected " << expected << ")\n";
            continue;
        }
        MetricsRow row;
        row.run_id = fields[0];
        row.defense = fields[2];
        row.attack = fields[3];
        double round_d;
        bool ok = to_double(fields[1], round_d) && to_double(fields[4], row.malicious_fraction) &&
                  to_double(fields[5], row.loss) && to_double(fields[6], row.accuracy);
        double sel_d = 0.0;
        ok = ok && to_double(fields[7], sel_d);
        if (!ok) {
            warnings << path << ":" << line_no << ": skipping unparsable row\n";
            continue;
        }
        row.round = static_cast<int>(round_d);
        row.selected_count = static_cast<int>(sel_d);
        if (!fields[8].empty()) {
            std::stringstream ss(fields[8]);
            std::string tok;
            while (std::getline(ss, tok, ';'))
                if (!tok.empty()) row.excluded_ids.push_back(std::stoi(tok));
        }
        bool sv_ok = true;
        for (int i = 0; i < sv_cols; ++i) {
            const std::string& f = fields[9 + static_cast<size_t>(i)];
            if (f.empty()) {
                row.sv.clear();
                break;
            }
            double v;
            if (!to_double(f, v)) {
                sv_ok = false;
                break;
            }
            row.sv.push_back(v);
        }
        if (!sv_ok) {
            warnings << path << ":" << line_no << ": skipping row with bad sv field\n";
            continue;
        }
        if (!to_double(fields.back(), row.wall_time_s)) row.wall_time_s = 0.0;
        content.rows.push_back(std::move(row));
    }
    return content;
}

}  // namespace fedsv
