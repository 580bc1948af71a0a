#include "fedsv/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "fedsv/errors.hpp"
#include "fedsv/metrics.hpp"

namespace fedsv {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + msg);
}

double parse_double(const std::string& v, const std::string& origin, int line) {
    double out;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        fail(origin, line, "expected a number, got '" + v + "'");
    return out;
}

int64_t parse_int(const std::string& v, const std::string& origin, int line) {
    int64_t out;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        fail(origin, line, "expected an integer, got '" + v + "'");
    return out;
}

uint64_t parse_uint(const std::string& v, const std::string& origin, int line) {
    uint64_t out;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        fail(origin, line, "expected an unsigned integer, got '" + v + "'");
    return out;
}

DefenseKind parse_defense(const std::string& v, const std::string& origin, int line) {
    if (v == "fedsv") return DefenseKind::FedSv;
    if (v == "fedavg") return DefenseKind::FedAvg;
    if (v == "coord_median") return DefenseKind::CoordMedian;
    if (v == "trimmed_mean") return DefenseKind::TrimmedMean;
    if (v == "multi_krum") return DefenseKind::MultiKrum;
    fail(origin, line, "unknown defense '" + v + "'");
}

AttackKind parse_attack(const std::string& v, const std::string& origin, int line) {
    if (v == "none") return AttackKind::None;
    if (v == "sign_flip") return AttackKind::SignFlip;
    if (v == "gaussian_noise") return AttackKind::GaussianNoise;
    if (v == "backdoor_label_flip") return AttackKind::BackdoorLabelFlip;
    fail(origin, line, "unknown attack '" + v + "'");
}

SvMethod parse_sv_method(const std::string& v, const std::string& origin, int line) {
    if (v == "exact") return SvMethod::Exact;
    if (v == "mc") return SvMethod::Mc;
    if (v == "antithetic") return SvMethod::Antithetic;
    if (v == "antithetic_truncated") return SvMethod::AntitheticTruncated;
    if (v == "stratified") return SvMethod::Stratified;
    fail(origin, line, "unknown sv method '" + v + "'");
}

const char* sv_method_token(SvMethod m) {
    switch (m) {
        case SvMethod::Exact: return "exact";
        case SvMethod::Mc: return "mc";
        case SvMethod::Antithetic: return "antithetic";
        case SvMethod::AntitheticTruncated: return "antithetic_truncated";
        case SvMethod::Stratified: return "stratified";
    }
    return "?";
}

}  // namespace

ParsedConfig parse_config_text(const std::string& text, const std::string& origin) {
    ParsedConfig cfg;
    RunConfig& r = cfg.run;
    // Confidence keys are gathered and attached only if epsilon shows up.
    bool use_confidence = false;
    ConfidenceSpec conf;
    bool alpha_set = false;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const size_t hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) fail(origin, line_no, "expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) fail(origin, line_no, "empty key");
        if (val.empty()) fail(origin, line_no, "empty value for '" + key + "'");

        if (key == "run.id") r.run_id = val;
        else if (key == "run.clients") r.num_clients = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "run.malicious") r.num_malicious = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "run.rounds") r.rounds = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "run.master_seed") r.master_seed = parse_uint(val, origin, line_no);
        else if (key == "train.learning_rate") r.train.learning_rate = parse_double(val, origin, line_no);
        else if (key == "train.epochs") r.train.epochs = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "train.batch_size") r.train.batch_size = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "model.arch") {
            if (val == "logistic") r.arch = Arch::Logistic;
            else if (val == "mlp") r.arch = Arch::Mlp1;
            else fail(origin, line_no, "unknown arch '" + val + "'");
        }
        else if (key == "model.hidden_dim") r.hidden_dim = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "data.kind") {
            if (val == "synthetic") r.dataset_kind = DatasetKind::Synthetic;
            else if (val == "mnist") r.dataset_kind = DatasetKind::Mnist;
            else fail(origin, line_no, "unknown data kind '" + val + "'");
        }
        else if (key == "data.classes") r.synth.classes = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "data.per_class") r.synth.per_class = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "data.test_per_class") r.synth.test_per_class = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "data.input_dim") r.synth.input_dim = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "data.spread") r.synth.spread = parse_double(val, origin, line_no);
        else if (key == "data.mnist_dir") r.mnist_dir = (val == "none" ? "" : val);
        else if (key == "data.classes_per_client") r.classes_per_client = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "data.validation_fraction") r.validation_fraction = parse_double(val, origin, line_no);
        else if (key == "attack.kind") r.attack.kind = parse_attack(val, origin, line_no);
        else if (key == "attack.noise_sigma") r.attack.noise_sigma = parse_double(val, origin, line_no);
        else if (key == "attack.source_class") r.attack.source_class = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "attack.target_class") r.attack.target_class = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "attack.start_round") r.attack.start_round = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "defense.kind") r.defense.kind = parse_defense(val, origin, line_no);
        else if (key == "defense.trim_count") r.defense.trim_count = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "defense.byzantine_count") r.defense.byzantine_count = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "defense.selection_size") r.defense.selection_size = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "defense.knowledge") {
            if (val == "full") r.defense.knowledge = Knowledge::Full;
            else if (val == "partial") r.defense.knowledge = Knowledge::Partial;
            else fail(origin, line_no, "unknown knowledge '" + val + "'");
        }
        else if (key == "sv.method") r.defense.sv.method = parse_sv_method(val, origin, line_no);
        else if (key == "sv.samples") r.defense.sv.samples = parse_int(val, origin, line_no);
        else if (key == "sv.tol_trunc") r.defense.sv.tol_trunc = parse_double(val, origin, line_no);
        else if (key == "sv.permutation_length") r.defense.sv.permutation_length = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "sv.allocation") {
            if (val == "uniform") r.defense.sv.allocation = StratifiedAllocation::Uniform;
            else if (val == "range") r.defense.sv.allocation = StratifiedAllocation::ProportionalToRange;
            else fail(origin, line_no, "unknown allocation '" + val + "'");
        }
        else if (key == "sv.epsilon") { use_confidence = true; conf.epsilon = parse_double(val, origin, line_no); }
        else if (key == "sv.delta") { use_confidence = true; conf.delta = parse_double(val, origin, line_no); }
        else if (key == "sv.variance_bound") { use_confidence = true; conf.variance_bound = parse_double(val, origin, line_no); }
        else if (key == "sv.strata") { use_confidence = true; conf.strata = static_cast<int>(parse_int(val, origin, line_no)); }
        else if (key == "sv.lambda") r.defense.lambda = parse_double(val, origin, line_no);
        else if (key == "sv.alpha") { alpha_set = true; r.defense.alpha = parse_double(val, origin, line_no); }
        else if (key == "sv.beta") r.defense.beta = parse_double(val, origin, line_no);
        else if (key == "sv.min_spread") r.defense.min_spread = parse_double(val, origin, line_no);
        else if (key == "sv.threshold_form") {
            if (val == "subtract_lambda") r.defense.threshold_form = ThresholdForm::SubtractLambda;
            else if (val == "scale_one_minus_lambda") r.defense.threshold_form = ThresholdForm::ScaleOneMinusLambda;
            else fail(origin, line_no, "unknown threshold form '" + val + "'");
        }
        else if (key == "sv.frequency") r.sv_frequency = static_cast<int>(parse_int(val, origin, line_no));
        else if (key == "baseline.accuracy") {
            r.baseline_accuracy = (val == "none") ? std::nan("") : parse_double(val, origin, line_no);
        }
        else if (key == "output.wall_time") {
            if (val == "real") r.record_wall_time = true;
            else if (val == "zero") r.record_wall_time = false;
            else fail(origin, line_no, "unknown wall_time mode '" + val + "'");
        }
        else if (key == "sweep.defenses") {
            cfg.sweep_defenses.clear();
            std::stringstream ss(val);
            std::string tok;
            while (std::getline(ss, tok, ','))
                cfg.sweep_defenses.push_back(parse_defense(trim(tok), origin, line_no));
            if (cfg.sweep_defenses.empty()) fail(origin, line_no, "empty defense list");
        }
        else fail(origin, line_no, "unknown key '" + key + "'");
    }
    if (use_confidence) r.defense.sv.confidence = conf;
    // alpha defaults to 1 - beta unless given explicitly.
    if (!alpha_set) r.defense.alpha = 1.0 - r.defense.beta;
    return cfg;
}

ParsedConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingFileError("config: cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string dump_config(const ParsedConfig& config) {
    const RunConfig& r = config.run;
    std::ostringstream out;
    out << "run.id = " << r.run_id << "\n";
    out << "run.clients = " << r.num_clients << "\n";
    out << "run.malicious = " << r.num_malicious << "\n";
    out << "run.rounds = " << r.rounds << "\n";
    out << "run.master_seed = " << r.master_seed << "\n";
    out << "train.learning_rate = " << format_double(r.train.learning_rate) << "\n";
    out << "train.epochs = " << r.train.epochs << "\n";
    out << "train.batch_size = " << r.train.batch_size << "\n";
    out << "model.arch = " << (r.arch == Arch::Logistic ? "logistic" : "mlp") << "\n";
    out << "model.hidden_dim = " << r.hidden_dim << "\n";
    out << "data.kind = " << (r.dataset_kind == DatasetKind::Synthetic ? "synthetic" : "mnist") << "\n";
    out << "data.classes = " << r.synth.classes << "\n";
    out << "data.per_class = " << r.synth.per_class << "\n";
    out << "data.test_per_class = " << r.synth.test_per_class << "\n";
    out << "data.input_dim = " << r.synth.input_dim << "\n";
    out << "data.spread = " << format_double(r.synth.spread) << "\n";
    out << "data.mnist_dir = " << (r.mnist_dir.empty() ? "none" : r.mnist_dir) << "\n";
    out << "data.classes_per_client = " << r.classes_per_client << "\n";
    out << "data.validation_fraction = " << format_double(r.validation_fraction) << "\n";
    out << "attack.kind = " << attack_name(r.attack.kind) << "\n";
    out << "attack.noise_sigma = " << format_double(r.attack.noise_sigma) << "\n";
    out << "attack.source_class = " << r.attack.source_class << "\n";
    out << "attack.target_class = " << r.attack.target_class << "\n";
    out << "attack.start_round = " << r.attack.start_round << "\n";
    out << "defense.kind = " << defense_name(r.defense.kind) << "\n";
    out << "defense.trim_count = " << r.defense.trim_count << "\n";
    out << "defense.byzantine_count = " << r.defense.byzantine_count << "\n";
    out << "defense.selection_size = " << r.defense.selection_size << "\n";
    out << "defense.knowledge = "
        << (r.defense.knowledge == Knowledge::Full ? "full" : "partial") << "\n";
    out << "sv.method = " << sv_method_token(r.defense.sv.method) << "\n";
    out << "sv.samples = " << r.defense.sv.samples << "\n";
    if (r.defense.sv.confidence) {
        out << "sv.epsilon = " << format_double(r.defense.sv.confidence->epsilon) << "\n";
        out << "sv.delta = " << format_double(r.defense.sv.confidence->delta) << "\n";
        out << "sv.variance_bound = " << format_double(r.defense.sv.confidence->variance_bound) << "\n";
        out << "sv.strata = " << r.defense.sv.confidence->strata << "\n";
    }
    out << "sv.tol_trunc = " << format_double(r.defense.sv.tol_trunc) << "\n";
    out << "sv.permutation_length = " << r.defense.sv.permutation_length << "\n";
    out << "sv.allocation = "
        << (r.defense.sv.allocation == StratifiedAllocation::Uniform ? "uniform" : "range") << "\n";
    out << "sv.lambda = " << format_double(r.defense.lambda) << "\n";
    out << "sv.alpha = " << format_double(r.defense.alpha) << "\n";
    out << "sv.beta = " << format_double(r.defense.beta) << "\n";
    out << "sv.min_spread = " << format_double(r.defense.min_spread) << "\n";
    out << "sv.threshold_form = "
        << (r.defense.threshold_form == ThresholdForm::SubtractLambda ? "subtract_lambda"
                                                                      : "scale_one_minus_lambda")
        << "\n";
    out << "sv.frequency = " << r.sv_frequency << "\n";
    out << "baseline.accuracy = "
        << (std::isnan(r.baseline_accuracy) ? "none" : format_double(r.baseline_accuracy)) << "\n";
    out << "output.wall_time = " << (r.record_wall_time ? "real" : "zero") << "\n";
    if (!config.sweep_defenses.empty()) {
        out << "sweep.defenses = ";
        for (size_t i = 0; i < config.sweep_defenses.size(); ++i) {
            if (i) out << ",";
            out << defense_name(config.sweep_defenses[i]);
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace fedsv
