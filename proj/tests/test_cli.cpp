#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedsv/config.hpp"
#include "fedsv/errors.hpp"
#include "fedsv/metrics.hpp"
#include "fedsv/orchestrator.hpp"

using namespace fedsv;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("fedsv_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

const char* cli_path() { return std::getenv("FEDSV_CLI"); }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(cli_path()) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

const char* kToyConfig =
    "run.clients = 6\n"
    "run.rounds = 3\n"
    "data.classes = 5\n"
    "data.per_class = 30\n"
    "data.test_per_class = 30\n"
    "data.input_dim = 10\n"
    "train.epochs = 2\n"
    "train.batch_size = 10\n"
    "sv.samples = 8\n"
    "output.wall_time = zero\n";

}  // namespace

TEST_CASE("config: dump/parse is a fixed point") {
    ParsedConfig defaults;
    const std::string once = dump_config(defaults);
    const ParsedConfig reparsed = parse_config_text(once, "mem");
    CHECK(dump_config(reparsed) == once);

    // Same again with every interesting field changed.
    ParsedConfig cfg;
    cfg.run.run_id = "exp-1";
    cfg.run.num_clients = 12;
    cfg.run.num_malicious = 5;
    cfg.run.arch = Arch::Mlp1;
    cfg.run.dataset_kind = DatasetKind::Mnist;
    cfg.run.mnist_dir = "/data/mnist";
    cfg.run.attack.kind = AttackKind::BackdoorLabelFlip;
    cfg.run.defense.kind = DefenseKind::MultiKrum;
    cfg.run.defense.knowledge = Knowledge::Full;
    cfg.run.defense.sv.method = SvMethod::Stratified;
    cfg.run.defense.sv.confidence = ConfidenceSpec{0.05, 0.05, 0.2, 10};
    cfg.run.defense.threshold_form = ThresholdForm::ScaleOneMinusLambda;
    cfg.run.baseline_accuracy = 0.9;
    cfg.run.record_wall_time = false;
    cfg.sweep_defenses = {DefenseKind::FedSv, DefenseKind::FedAvg};
    const std::string text = dump_config(cfg);
    CHECK(dump_config(parse_config_text(text, "mem")) == text);
}

TEST_CASE("config: diagnostics carry the line number") {
    CHECK_THROWS_WITH_AS((void)parse_config_text("run.clients = 4\nbogus.key = 1\n", "f"),
                         "f:2: unknown key 'bogus.key'", ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("run.clients cuatro\n", "f"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("run.clients = cuatro\n", "f"), ConfigError);
    CHECK_THROWS_AS((void)parse_config_text("run.clients =\n", "f"), ConfigError);
    // Comments and blank lines are fine.
    const ParsedConfig ok =
        parse_config_text("# header\n\nrun.clients = 9 # trailing\n", "f");
    CHECK(ok.run.num_clients == 9);
}

TEST_CASE("metrics: csv quoting round-trips") {
    CHECK(csv_escape("plain") == "plain");
    CHECK(csv_escape("a,b") == "\"a,b\"");
    CHECK(csv_escape("say \"hi\"") == "\"say \"\"hi\"\"\"");
    const auto fields = split_csv_line("\"a,b\",2,\"say \"\"hi\"\"\",x");
    REQUIRE(fields.size() == 4);
    CHECK(fields[0] == "a,b");
    CHECK(fields[2] == "say \"hi\"");
    CHECK(fields[3] == "x");
}

TEST_CASE("metrics: writer output parses back, including quoted run ids") {
    TempDir tmp;
    RunConfig cfg;
    cfg.run_id = "unit,run";
    cfg.num_clients = 3;
    cfg.num_malicious = 1;
    cfg.defense.kind = DefenseKind::FedSv;
    cfg.attack.kind = AttackKind::SignFlip;
    const std::string path = (tmp.path / "m.csv").string();
    MetricsWriter writer(path, cfg);
    RoundRecord rec;
    rec.round = 1;
    rec.loss = 1.5;
    rec.accuracy = 0.25;
    rec.selected = {1, 2};
    rec.sv_round = true;
    rec.sv = {-0.5, 0.25, 0.125};
    writer.append(rec);
    rec.round = 2;
    rec.sv_round = false;
    rec.sv.clear();
    writer.append(rec);

    std::ostringstream warn;
    const MetricsContent content = read_metrics(path, warn);
    CHECK(warn.str().empty());
    CHECK(content.num_clients == 3);
    REQUIRE(content.rows.size() == 2);
    CHECK(content.rows[0].run_id == "unit,run");
    CHECK(content.rows[0].excluded_ids == std::vector<int>{0});
    CHECK(content.rows[0].sv == std::vector<double>{-0.5, 0.25, 0.125});
    CHECK(content.rows[0].malicious_fraction == doctest::Approx(1.0 / 3));
    CHECK(content.rows[1].sv.empty());
}

TEST_CASE("config: alpha follows 1 - beta unless given") {
    CHECK(parse_config_text("sv.beta = 0.6\n", "f").run.defense.alpha ==
          doctest::Approx(0.4));
    const ParsedConfig both = parse_config_text("sv.beta = 0.6\nsv.alpha = 0.9\n", "f");
    CHECK(both.run.defense.alpha == 0.9);
}

TEST_CASE("metrics: rows are readable as soon as they are appended") {
    TempDir tmp;
    RunConfig cfg;
    cfg.num_clients = 2;
    const std::string path = (tmp.path / "stream.csv").string();
    MetricsWriter writer(path, cfg);
    RoundRecord rec;
    rec.round = 1;
    rec.selected = {0, 1};
    writer.append(rec);
    std::ostringstream warn;
    CHECK(read_metrics(path, warn).rows.size() == 1);  // flushed, valid prefix
    rec.round = 2;
    writer.append(rec);
    CHECK(read_metrics(path, warn).rows.size() == 2);
}

TEST_CASE("metrics: corrupt rows are skipped with warnings") {
    TempDir tmp;
    const std::string path = (tmp.path / "bad.csv").string();
    {
        std::ofstream out(path);
        out << "run_id,round,defense,attack,malicious_fraction,loss,accuracy,"
               "selected_count,excluded_ids,sv_0,wall_time_s\n";
        out << "r,1,fedavg,none,0,0.5,0.9,1,,,0\n";
        out << "r,2,fedavg,none,0,NOPE,0.9,1,,,0\n";
        out << "half a row\n";
    }
    std::ostringstream warn;
    const MetricsContent content = read_metrics(path, warn);
    CHECK(content.rows.size() == 1);
    CHECK(warn.str().find(":3:") != std::string::npos);
    CHECK(warn.str().find(":4:") != std::string::npos);
}

TEST_CASE("cli binary: run, report, config-dump, error codes") {
    REQUIRE(cli_path() != nullptr);
    TempDir tmp;
    const auto cfg_path = tmp.path / "toy.cfg";
    std::ofstream(cfg_path) << kToyConfig;
    const auto out_csv = tmp.path / "out" / "metrics.csv";
    fs::create_directories(tmp.path / "out");

    SUBCASE("run writes T metrics rows plus a summary footer") {
        CHECK(run_cli("run --config " + cfg_path.string() + " --out " + out_csv.string() +
                      " --quiet") == 0);
        std::ostringstream warn;
        const MetricsContent content = read_metrics(out_csv.string(), warn);
        CHECK(content.rows.size() == 3);
        CHECK(fs::exists(out_csv.string() + ".summary"));

        SUBCASE("and report aggregates the directory") {
            CHECK(run_cli("report --dir " + (tmp.path / "out").string()) == 0);
            CHECK(fs::exists(tmp.path / "out" / "report_long.csv"));
        }
    }
    SUBCASE("same seed twice gives byte-identical metrics") {
        const auto second = tmp.path / "out" / "again.csv";
        CHECK(run_cli("run --config " + cfg_path.string() + " --out " + out_csv.string() +
                      " --seed 5 --quiet") == 0);
        CHECK(run_cli("run --config " + cfg_path.string() + " --out " + second.string() +
                      " --seed 5 --quiet") == 0);
        std::ifstream a(out_csv), b(second);
        std::stringstream sa, sb;
        sa << a.rdbuf();
        sb << b.rdbuf();
        CHECK(sa.str() == sb.str());
    }
    SUBCASE("malformed config exits 2") {
        const auto bad = tmp.path / "bad.cfg";
        std::ofstream(bad) << "run.clients = what\n";
        CHECK(run_cli("run --config " + bad.string() + " --out " + out_csv.string()) == 2);
    }
    SUBCASE("missing config exits 5") {
        CHECK(run_cli("run --config " + (tmp.path / "absent.cfg").string() + " --out " +
                      out_csv.string()) == 5);
    }
    SUBCASE("unwritable out path exits 3") {
        CHECK(run_cli("run --config " + cfg_path.string() + " --out " +
                      (tmp.path / "nodir" / "x.csv").string()) == 3);
    }
    SUBCASE("divergence exits 6") {
        const auto diverge = tmp.path / "div.cfg";
        std::ofstream(diverge) << kToyConfig << "train.learning_rate = 1e12\n"
                               << "train.epochs = 4\n";
        CHECK(run_cli("run --config " + diverge.string() + " --out " + out_csv.string()) == 6);
    }
    SUBCASE("report on an empty directory exits 4") {
        fs::create_directories(tmp.path / "empty");
        CHECK(run_cli("report --dir " + (tmp.path / "empty").string()) == 4);
    }
    SUBCASE("config-dump round-trips through the binary") {
        const auto dumped = tmp.path / "dumped.cfg";
        CHECK(run_cli("config-dump --config " + cfg_path.string() + " --out " +
                      dumped.string()) == 0);
        const ParsedConfig a = parse_config_file(cfg_path.string());
        const ParsedConfig b = parse_config_file(dumped.string());
        CHECK(dump_config(a) == dump_config(b));
    }
}

TEST_CASE("cli binary: sweep grid with aggregate table") {
    REQUIRE(cli_path() != nullptr);
    TempDir tmp;
    const auto cfg_path = tmp.path / "toy.cfg";
    std::ofstream(cfg_path) << kToyConfig << "attack.kind = sign_flip\n"
                            << "sweep.defenses = fedavg,fedsv\n";
    const auto out_dir = (tmp.path / "sweep").string();

    CHECK(run_cli("sweep --config " + cfg_path.string() + " --fractions 0.5 --reps 2" +
                  " --out-dir " + out_dir + " --quiet") == 0);
    int cell_files = 0;
    for (const auto& e : fs::directory_iterator(out_dir))
        if (e.path().extension() == ".csv" && e.path().filename() != "aggregate.csv")
            ++cell_files;
    CHECK(cell_files == 4);  // 2 defenses x 1 fraction x 2 reps
    REQUIRE(fs::exists(fs::path(out_dir) / "aggregate.csv"));
    std::ifstream agg(fs::path(out_dir) / "aggregate.csv");
    std::string line;
    int rows = 0;
    while (std::getline(agg, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);  // header + one row per defense x fraction

    SUBCASE("reps must be positive") {
        CHECK(run_cli("sweep --config " + cfg_path.string() +
                      " --fractions 0.5 --reps 0 --out-dir " + out_dir) == 2);
    }
}
