#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>

#include "fedsv/config.hpp"
#include "fedsv/errors.hpp"
#include "fedsv/metrics.hpp"
#include "fedsv/orchestrator.hpp"

namespace fs = std::filesystem;
using namespace fedsv;

namespace {

// Exit codes, also documented in the README:
// 0 ok, 1 runtime error, 2 config/schema error, 3 unwritable output,
// 4 empty metrics directory, 5 missing input file, 6 training divergence.
enum ExitCode {
    kOk = 0,
    kRuntime = 1,
    kConfig = 2,
    kUnwritable = 3,
    kEmptyDir = 4,
    kMissingFile = 5,
    kDivergence = 6,
};

int map_exception(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e)) return kConfig;
    if (dynamic_cast<const MissingFileError*>(&e)) return kMissingFile;
    if (dynamic_cast<const OutputError*>(&e)) return kUnwritable;
    if (dynamic_cast<const RunAbortError*>(&e)) return kDivergence;
    return kRuntime;
}

struct CommonOpts {
    std::string config_path;
    std::optional<uint64_t> seed;
    std::optional<std::string> defense;
    bool quiet = false;
};

ParsedConfig load_config(const CommonOpts& o) {
    ParsedConfig cfg =
        o.config_path.empty() ? ParsedConfig{} : parse_config_file(o.config_path);
    if (o.seed) cfg.run.master_seed = *o.seed;
    if (o.defense) {
        // Reuse the file parser so the token set stays in one place.
        cfg.run.defense.kind =
            parse_config_text("defense.kind = " + *o.defense, "--defense").run.defense.kind;
    }
    return cfg;
}

void print_summary(const RunSummary& s, std::ostream& out) {
    out << "run " << s.run_id << ": defense=" << defense_name(s.defense)
        << " attack=" << attack_name(s.attack) << " malicious=" << s.num_malicious << "/"
        << s.num_clients << " rounds=" << s.records.size()
        << " final_accuracy=" << format_double(s.final_accuracy)
        << " final_loss=" << format_double(s.final_loss);
    if (!std::isnan(s.baseline_accuracy))
        out << " baseline=" << format_double(s.baseline_accuracy)
            << " success=" << (s.success ? "yes" : "no");
    if (s.defense == DefenseKind::FedSv) {
        out << " rounds_to_full_exclusion="
            << (s.rounds_to_full_exclusion ? std::to_string(*s.rounds_to_full_exclusion)
                                           : "never");
    }
    out << "\n";
}

int cmd_run(const CommonOpts& opts, const std::string& out_path) {
    ParsedConfig cfg = load_config(opts);
    MetricsWriter writer(out_path, cfg.run);
    RunSummary summary =
        run(cfg.run, [&](const RoundRecord& rec) { writer.append(rec); });
    write_summary_file(out_path, summary);
    if (!opts.quiet) print_summary(summary, std::cout);
    return kOk;
}

int cmd_sweep(const CommonOpts& opts, const std::string& fractions_arg, int reps,
              const std::string& out_dir) {
    ParsedConfig cfg = load_config(opts);
    std::vector<double> fractions;
    {
        std::stringstream ss(fractions_arg);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            if (tok.empty()) continue;
            try {
                fractions.push_back(std::stod(tok));
            } catch (const std::exception&) {
                throw ConfigError("--fractions: bad number '" + tok + "'");
            }
        }
    }
    if (fractions.empty()) throw ConfigError("--fractions: empty list");

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw OutputError("sweep: cannot create " + out_dir);

    std::vector<DefenseKind> defenses = cfg.sweep_defenses;
    if (defenses.empty()) defenses.push_back(cfg.run.defense.kind);

    struct CellKey {
        std::string defense;
        double fraction;
        bool operator<(const CellKey& o) const {
            return std::tie(defense, fraction) < std::tie(o.defense, o.fraction);
        }
    };
    struct CellStat {
        int runs = 0;
        int successes = 0;
        int failures = 0;
        double acc_sum = 0.0;
    };
    std::map<CellKey, CellStat> cells;

    bool any_error = false;
    for (DefenseKind d : defenses) {
        RunConfig base = cfg.run;
        base.defense.kind = d;
        auto sink_factory = [&](const RunConfig& cell) -> RoundCallback {
            auto writer = std::make_shared<MetricsWriter>(
                out_dir + "/" + cell.run_id + ".csv", cell);
            return [writer](const RoundRecord& rec) { writer->append(rec); };
        };
        std::vector<RunSummary> summaries = run_sweep(base, fractions, reps, sink_factory);
        size_t idx = 0;
        for (size_t fi = 0; fi < fractions.size(); ++fi) {
            for (int rep = 0; rep < reps; ++rep, ++idx) {
                const RunSummary& s = summaries[idx];
                CellStat& stat = cells[{defense_name(d), fractions[fi]}];
                ++stat.runs;
                if (!s.error.empty()) {
                    ++stat.failures;
                    any_error = true;
                    std::cerr << "cell " << s.run_id << " failed: " << s.error << "\n";
                    continue;
                }
                write_summary_file(out_dir + "/" + s.run_id + ".csv", s);
                stat.acc_sum += s.final_accuracy;
                if (s.success) ++stat.successes;
                if (!opts.quiet) print_summary(s, std::cout);
            }
        }
    }

    std::ofstream agg(out_dir + "/aggregate.csv");
    if (!agg) throw OutputError("sweep: cannot write aggregate.csv");
    agg << "defense,malicious_fraction,runs,failures,successes,success_rate,mean_final_accuracy\n";
    for (const auto& [key, stat] : cells) {
        const int ok_runs = stat.runs - stat.failures;
        agg << key.defense << ',' << format_double(key.fraction) << ',' << stat.runs << ','
            << stat.failures << ',' << stat.successes << ','
            << format_double(ok_runs > 0 ? static_cast<double>(stat.successes) / ok_runs : 0.0)
            << ','
            << format_double(ok_runs > 0 ? stat.acc_sum / ok_runs : 0.0) << '\n';
        if (!opts.quiet)
            std::cout << key.defense << " f=" << key.fraction << ": success "
                      << stat.successes << "/" << ok_runs << "\n";
    }
    return any_error ? kRuntime : kOk;
}

struct RunAgg {
    std::string defense;
    std::string attack;
    double fraction = 0.0;
    double final_accuracy = 0.0;
    int final_round = 0;
    int num_clients = 0;
    std::vector<std::pair<int, std::vector<int>>> excluded_per_round;
    std::vector<std::pair<int, double>> accuracy_per_round;
    std::vector<std::pair<int, double>> loss_per_round;
};

int cmd_report(const std::string& dir, const std::string& long_out) {
    std::map<std::string, RunAgg> runs;  // keyed by file + run_id
    bool any_file = false;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        MetricsContent content;
        try {
            content = read_metrics(entry.path().string(), std::cerr);
        } catch (const std::exception& e) {
            std::cerr << "skipping " << entry.path().string() << ": " << e.what() << "\n";
            continue;
        }
        if (content.rows.empty()) continue;
        any_file = true;
        for (const MetricsRow& row : content.rows) {
            RunAgg& agg = runs[entry.path().string() + "#" + row.run_id];
            agg.defense = row.defense;
            agg.attack = row.attack;
            agg.fraction = row.malicious_fraction;
            agg.num_clients = content.num_clients;
            if (row.round >= agg.final_round) {
                agg.final_round = row.round;
                agg.final_accuracy = row.accuracy;
            }
            agg.excluded_per_round.emplace_back(row.round, row.excluded_ids);
            agg.accuracy_per_round.emplace_back(row.round, row.accuracy);
            agg.loss_per_round.emplace_back(row.round, row.loss);
        }
    }
    if (!any_file) {
        std::cerr << "report: no metrics rows found in " << dir << "\n";
        return kEmptyDir;
    }

    // Baseline: clean FedAvg runs (no malicious clients).
    double baseline_sum = 0.0;
    int baseline_count = 0;
    for (const auto& [key, agg] : runs) {
        if (agg.defense == "fedavg" && agg.fraction == 0.0) {
            baseline_sum += agg.final_accuracy;
            ++baseline_count;
        }
    }
    const double baseline =
        baseline_count > 0 ? baseline_sum / baseline_count : std::nan("");

    struct GroupStat {
        std::vector<double> finals;
        int successes = 0;
        int detections = 0;  // fedsv runs that reached full exclusion
        int fedsv_runs = 0;
        double precision_sum = 0.0;
        double recall_sum = 0.0;
        std::map<int, std::pair<double, int>> acc_by_round;
        std::map<int, std::pair<double, int>> loss_by_round;
    };
    std::map<std::string, GroupStat> groups;
    for (const auto& [key, agg] : runs) {
        std::ostringstream label;
        label << agg.defense << "/" << agg.attack << "/f=" << agg.fraction;
        GroupStat& g = groups[label.str()];
        g.finals.push_back(agg.final_accuracy);
        if (!std::isnan(baseline) && agg.final_accuracy >= 0.8 * baseline) ++g.successes;
        for (const auto& [round, acc] : agg.accuracy_per_round) {
            g.acc_by_round[round].first += acc;
            g.acc_by_round[round].second += 1;
        }
        for (const auto& [round, loss] : agg.loss_per_round) {
            g.loss_by_round[round].first += loss;
            g.loss_by_round[round].second += 1;
        }
        if (agg.defense == "fedsv") {
            ++g.fedsv_runs;
            const int n_m = static_cast<int>(std::llround(agg.fraction * agg.num_clients));
            std::set<int> malicious;
            for (int i = 0; i < n_m; ++i) malicious.insert(i);
            bool fully_excluded_at_end = false;
            double final_prec = 1.0, final_rec = malicious.empty() ? 1.0 : 0.0;
            for (const auto& [round, excluded] : agg.excluded_per_round) {
                if (round != agg.final_round) continue;
                int tp = 0;
                for (int id : excluded)
                    if (malicious.count(id)) ++tp;
                final_prec = excluded.empty()
                                 ? 1.0
                                 : static_cast<double>(tp) / static_cast<double>(excluded.size());
                final_rec = malicious.empty()
                                ? 1.0
                                : static_cast<double>(tp) / static_cast<double>(malicious.size());
                fully_excluded_at_end = tp == static_cast<int>(malicious.size());
            }
            g.precision_sum += final_prec;
            g.recall_sum += final_rec;
            if (fully_excluded_at_end) ++g.detections;
        }
    }

    if (!std::isnan(baseline))
        std::cout << "baseline (clean fedavg) final accuracy: " << format_double(baseline)
                  << " over " << baseline_count << " run(s)\n";
    else
        std::cout << "baseline: none (no clean fedavg runs found); success rates not available\n";
    std::cout << "group | runs | final_acc mean+-std | success_rate | detection\n";
    for (const auto& [label, g] : groups) {
        double mean = 0.0;
        for (double v : g.finals) mean += v;
        mean /= static_cast<double>(g.finals.size());
        double var = 0.0;
        for (double v : g.finals) var += (v - mean) * (v - mean);
        const double stddev =
            g.finals.size() > 1 ? std::sqrt(var / static_cast<double>(g.finals.size() - 1)) : 0.0;
        std::cout << label << " | " << g.finals.size() << " | " << format_double(mean) << "+-"
                  << format_double(stddev) << " | ";
        if (std::isnan(baseline))
            std::cout << "n/a";
        else
            std::cout << format_double(static_cast<double>(g.successes) /
                                       static_cast<double>(g.finals.size()));
        std::cout << " | ";
        if (g.fedsv_runs > 0)
            std::cout << "full_exclusion " << g.detections << "/" << g.fedsv_runs
                      << " final_precision "
                      << format_double(g.precision_sum / g.fedsv_runs) << " final_recall "
                      << format_double(g.recall_sum / g.fedsv_runs);
        else
            std::cout << "-";
        std::cout << "\n";
    }

    std::ofstream lf(long_out);
    if (!lf) throw OutputError("report: cannot write " + long_out);
    lf << "round,series,value\n";
    for (const auto& [label, g] : groups) {
        for (const auto& [round, acc] : g.acc_by_round)
            lf << round << ',' << csv_escape(label + "/accuracy") << ','
               << format_double(acc.first / acc.second) << '\n';
        for (const auto& [round, loss] : g.loss_by_round)
            lf << round << ',' << csv_escape(label + "/loss") << ','
               << format_double(loss.first / loss.second) << '\n';
    }
    return kOk;
}

int cmd_config_dump(const CommonOpts& opts, const std::string& out_path) {
    ParsedConfig cfg = load_config(opts);
    const std::string text = dump_config(cfg);
    if (out_path.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(out_path);
        if (!out) throw OutputError("config-dump: cannot write " + out_path);
        out << text;
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fedsv: Shapley-value robust federated learning simulator"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string out_path, out_dir, fractions, report_dir, long_out;
    int reps = 1;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* c = cmd->add_option("--config", opts.config_path, "experiment config file");
        if (config_required) c->required();
        cmd->add_option("--seed", [&](const CLI::results_t& r) {
            opts.seed = std::stoull(r[0]);
            return true;
        }, "override run.master_seed");
        cmd->add_option("--defense", [&](const CLI::results_t& r) {
            opts.defense = r[0];
            return true;
        }, "override defense.kind");
        cmd->add_flag("--quiet", opts.quiet, "suppress progress output");
    };

    CLI::App* c_run = app.add_subcommand("run", "run one experiment and write a metrics file");
    add_common(c_run, true);
    c_run->add_option("--out", out_path, "metrics CSV output path")->required();

    CLI::App* c_sweep =
        app.add_subcommand("sweep", "grid over malicious fractions x repetitions");
    add_common(c_sweep, true);
    c_sweep->add_option("--fractions", fractions, "comma-separated malicious fractions")
        ->required();
    c_sweep->add_option("--reps", reps, "repetitions per fraction")
        ->check(CLI::PositiveNumber);
    c_sweep->add_option("--out-dir", out_dir, "directory for per-cell metrics files")
        ->required();

    CLI::App* c_report = app.add_subcommand("report", "aggregate metrics files in a directory");
    c_report->add_option("--dir", report_dir, "directory of metrics CSV files")->required();
    c_report->add_option("--out", long_out, "long-format table output path");

    CLI::App* c_dump = app.add_subcommand("config-dump", "print the canonical config");
    add_common(c_dump, false);
    c_dump->add_option("--out", out_path, "write to file instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kConfig;
    }

    try {
        if (app.got_subcommand(c_run)) return cmd_run(opts, out_path);
        if (app.got_subcommand(c_sweep)) return cmd_sweep(opts, fractions, reps, out_dir);
        if (app.got_subcommand(c_report)) {
            if (long_out.empty()) long_out = report_dir + "/report_long.csv";
            return cmd_report(report_dir, long_out);
        }
        if (app.got_subcommand(c_dump)) return cmd_config_dump(opts, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return map_exception(e);
    }
    return kRuntime;
}
