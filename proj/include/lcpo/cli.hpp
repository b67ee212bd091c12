#pragma once

// Command-line front end. Subcommands: pairs, train-toy, analyze, report,
// stats. Configuration layers in a fixed order: built-in defaults, then
// entries from the flat key=value file named by --config, then explicit
// flags. The layered result is the single effective configuration; every
// completed run records it in manifest.json next to FNV-1a digests of the
// input files. Timestamps appear in the manifest and nowhere else, so
// re-running a command with the same seed reproduces every other output
// byte for byte.

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "lcpo/convergence.hpp"
#include "lcpo/datapipe.hpp"
#include "lcpo/evalharness.hpp"
#include "lcpo/format.hpp"
#include "lcpo/math.hpp"
#include "lcpo/objectives.hpp"
#include "lcpo/rng.hpp"
#include "lcpo/toylab.hpp"

namespace lcpo::cli {

using json = nlohmann::json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;   // bad input file, bad config, bad flag value
inline constexpr int kExitEmpty = 2;   // structurally valid inputs, nothing to emit

namespace detail {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t hash = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 1099511628211ULL;
    }
    return hash;
}

inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open input " + path);
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    char out[32];
    std::snprintf(out, sizeof(out), "fnv1a64:%016llx",
                  static_cast<unsigned long long>(fnv1a64(buffer.str())));
    return out;
}

inline std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm parts{};
    gmtime_r(&now, &parts);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &parts);
    return buf;
}

inline std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t");
    return s.substr(begin, end - begin + 1);
}

/// Flat key=value file, one entry per line. Blank lines and lines starting
/// with '#' are skipped. Later duplicates win, matching the layer order.
inline std::map<std::string, std::string> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open config " + path);
    }
    std::map<std::string, std::string> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped[0] == '#') continue;
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) {
            throw datapipe::ParseError(line_no, "config expects key=value, got '" + stripped + "'");
        }
        const std::string key = trim(stripped.substr(0, eq));
        if (key.empty()) {
            throw datapipe::ParseError(line_no, "config entry has an empty key");
        }
        entries[key] = trim(stripped.substr(eq + 1));
    }
    return entries;
}

inline double setting_double(const std::map<std::string, std::string>& settings,
                             const std::string& key) {
    const std::string& raw = settings.at(key);
    try {
        std::size_t used = 0;
        const double value = std::stod(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return value;
    } catch (const std::exception&) {
        throw std::invalid_argument("setting " + key + " must be a number, got '" + raw + "'");
    }
}

inline int setting_int(const std::map<std::string, std::string>& settings,
                       const std::string& key) {
    const std::string& raw = settings.at(key);
    try {
        std::size_t used = 0;
        const int value = std::stoi(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return value;
    } catch (const std::exception&) {
        throw std::invalid_argument("setting " + key + " must be an integer, got '" + raw + "'");
    }
}

inline std::uint64_t setting_seed(const std::map<std::string, std::string>& settings,
                                  const std::string& key) {
    const std::string& raw = settings.at(key);
    try {
        std::size_t used = 0;
        const std::uint64_t value = std::stoull(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return value;
    } catch (const std::exception&) {
        throw std::invalid_argument("setting " + key +
                                    " must be a non-negative integer, got '" + raw + "'");
    }
}

inline std::string join(const std::vector<std::string>& parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) out += ",";
        out += parts[i];
    }
    return out;
}

/// Everything one subcommand run accumulates: the effective configuration,
/// digests of the inputs it read, and the output files it wrote. finish()
/// drops the manifest capturing all three.
struct RunContext {
    std::string command;
    std::map<std::string, std::string> effective;
    std::filesystem::path out_dir;
    bool verbose = false;
    std::map<std::string, std::string> input_digests;
    std::vector<std::string> output_names;

    const std::string& get(const std::string& key) const { return effective.at(key); }

    void note_input(const std::string& path) { input_digests[path] = file_digest(path); }

    void write_output(const std::string& name, const std::string& bytes) {
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path target = out_dir / name;
        std::ofstream out(target, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + target.string());
        }
        out << bytes;
        output_names.push_back(name);
        if (verbose) {
            std::cerr << command << ": wrote " << target.string() << "\n";
        }
    }

    void finish() {
        json manifest;
        manifest["command"] = command;
        manifest["created_at"] = utc_timestamp();
        manifest["effective_config"] = effective;
        manifest["inputs"] = input_digests;
        manifest["outputs"] = output_names;
        std::filesystem::create_directories(out_dir);
        const std::filesystem::path target = out_dir / "manifest.json";
        std::ofstream out(target, std::ios::binary);
        if (!out) {
            throw std::runtime_error("cannot write " + target.string());
        }
        out << manifest.dump(2) << "\n";
    }
};

/// Per-subcommand option table. Every key is registered both as a CLI flag
/// and as a defaulted settings entry, so the config file can address any of
/// them and explicit flags win the final overlay.
struct KeyedOptions {
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> defaults;
    std::map<std::string, std::string> flag_values;
    std::map<std::string, CLI::Option*> options;

    void add(const std::string& key, const std::string& flag, const std::string& default_value,
             const std::string& help) {
        defaults[key] = default_value;
        options[key] = sub->add_option(flag, flag_values[key], help);
    }

    /// defaults, then config-file entries, then explicitly passed flags.
    std::map<std::string, std::string> layer(const std::string& config_path) const {
        std::map<std::string, std::string> effective = defaults;
        if (!config_path.empty()) {
            for (const auto& [key, value] : read_config_file(config_path)) {
                if (effective.find(key) == effective.end()) {
                    throw std::invalid_argument("config: unknown key '" + key + "'");
                }
                effective[key] = value;
            }
        }
        for (const auto& [key, option] : options) {
            if (option->count() > 0) effective[key] = flag_values.at(key);
        }
        return effective;
    }
};

}  // namespace detail

inline int cmd_pairs(detail::RunContext& ctx) {
    const std::string rollouts = ctx.get("rollouts");
    if (rollouts.empty()) {
        std::cerr << "pairs: a rollouts file is required (--rollouts)\n";
        return kExitUsage;
    }
    const auto split = datapipe::parse_difficulty(ctx.get("split"));
    if (!split) {
        std::cerr << "pairs: unknown split '" << ctx.get("split") << "'\n";
        return kExitUsage;
    }
    ctx.note_input(rollouts);
    const auto records = datapipe::ingest_rollouts(rollouts);
    std::vector<datapipe::PreferencePair> pairs;
    for (const auto& rec : datapipe::filter_split(records, *split)) {
        pairs.push_back(datapipe::build_pair(rec));
    }
    if (pairs.empty()) {
        std::cerr << "pairs: no " << datapipe::difficulty_name(*split) << " records in "
                  << rollouts << "\n";
        ctx.finish();
        return kExitEmpty;
    }
    if (!ctx.get("limit").empty()) {
        pairs = datapipe::take_first(pairs, detail::setting_int(ctx.effective, "limit"));
    }

    std::ostringstream pairs_os;
    datapipe::write_pairs_jsonl(pairs_os, pairs);
    ctx.write_output("pairs.jsonl", pairs_os.str());
    std::ostringstream stats_os;
    datapipe::write_stats_csv(stats_os, {datapipe::split_stats(pairs, *split)});
    ctx.write_output("stats.csv", stats_os.str());
    ctx.finish();
    std::cout << "pairs: " << pairs.size() << " " << datapipe::difficulty_name(*split)
              << " pairs -> " << (ctx.out_dir / "pairs.jsonl").string() << "\n";
    return kExitOk;
}

inline int cmd_train_toy(detail::RunContext& ctx) {
    const std::string pairs_path = ctx.get("pairs");
    if (pairs_path.empty()) {
        std::cerr << "train-toy: a pairs file is required (--pairs)\n";
        return kExitUsage;
    }
    const auto kind = parse_objective(ctx.get("objective"));
    if (!kind) {
        std::cerr << "train-toy: unknown objective '" << ctx.get("objective")
                  << "' (expected sft, dpo, simpo, simper, orpo, or lcpo)\n";
        return kExitUsage;
    }
    ctx.note_input(pairs_path);
    const auto pairs = datapipe::read_pairs_jsonl(pairs_path);
    if (pairs.empty()) {
        std::cerr << "train-toy: " << pairs_path << " holds no pairs\n";
        ctx.finish();
        return kExitEmpty;
    }

    // Hyperparameters default per objective; the settings overlay only
    // replaces the ones given explicitly. Either way the manifest ends up
    // with concrete numbers.
    ObjectiveSpec spec = ObjectiveSpec::defaults_for(*kind);
    const auto overlay = [&ctx](const std::string& key, double& field) {
        if (ctx.get(key).empty()) {
            ctx.effective[key] = format_fixed(field, 6);
        } else {
            field = detail::setting_double(ctx.effective, key);
        }
    };
    overlay("beta", spec.beta);
    overlay("gamma", spec.gamma);
    overlay("lambda", spec.lambda);
    overlay("margin_epsilon", spec.margin_epsilon);

    int num_classes = 0;
    if (ctx.get("classes").empty()) {
        int max_class = -1;
        for (const auto& p : pairs) {
            if (!p.prompt_class) {
                throw std::invalid_argument("train-toy: pair " + p.question_id +
                                            " carries no prompt_class");
            }
            max_class = std::max(max_class, *p.prompt_class);
        }
        num_classes = max_class + 1;
        ctx.effective["classes"] = std::to_string(num_classes);
    } else {
        num_classes = detail::setting_int(ctx.effective, "classes");
    }

    std::vector<std::pair<int, std::vector<int>>> sequences;
    sequences.reserve(pairs.size() * 2);
    int max_token = 1;
    for (const auto& p : pairs) {
        if (!p.chosen.token_ids || !p.rejected.token_ids) {
            throw std::invalid_argument("train-toy: pair " + p.question_id +
                                        " carries no token_ids");
        }
        const int cls = p.prompt_class ? *p.prompt_class : 0;
        for (const auto* ids : {&*p.chosen.token_ids, &*p.rejected.token_ids}) {
            for (int token : *ids) max_token = std::max(max_token, token);
            sequences.emplace_back(cls, *ids);
        }
    }
    int vocab = 0;
    if (ctx.get("vocab").empty()) {
        vocab = max_token + 1;
        ctx.effective["vocab"] = std::to_string(vocab);
    } else {
        vocab = detail::setting_int(ctx.effective, "vocab");
    }

    const toylab::ToyPolicy initial = toylab::fit_policy(
        num_classes, vocab, sequences, detail::setting_double(ctx.effective, "alpha"));

    toylab::TrainConfig config;
    config.objective = spec;
    config.learning_rate = detail::setting_double(ctx.effective, "learning_rate");
    config.steps = detail::setting_int(ctx.effective, "steps");
    config.batch_size = detail::setting_int(ctx.effective, "batch_size");
    config.seed = detail::setting_seed(ctx.effective, "seed");
    config.temperature = detail::setting_double(ctx.effective, "temperature");
    config.max_sample_length = detail::setting_int(ctx.effective, "max_sample_length");

    const auto [trained, trace] = toylab::train(initial, pairs, config);

    std::ostringstream trace_os;
    toylab::write_trace_csv(trace_os, trace);
    ctx.write_output("trace.csv", trace_os.str());
    std::ostringstream lengths_os;
    toylab::write_lengths_csv(lengths_os, trace.initial_lengths, trace.final_lengths);
    ctx.write_output("lengths.csv", lengths_os.str());
    ctx.write_output("policy.json", toylab::policy_to_json(trained).dump(2) + "\n");
    ctx.finish();
    std::cout << "train-toy: " << objective_name(*kind) << " on " << pairs.size()
              << " pairs for " << config.steps << " steps; mean sampled length "
              << format_fixed(trace.initial_lengths.mean, 2) << " -> "
              << format_fixed(trace.final_lengths.mean, 2) << "\n";
    return kExitOk;
}

inline int cmd_analyze(detail::RunContext& ctx) {
    const double m = detail::setting_double(ctx.effective, "m");
    const int length = detail::setting_int(ctx.effective, "length");
    const int samples = detail::setting_int(ctx.effective, "samples");

    std::ostringstream os;
    os << "objective,quantity,value,satisfied,detail\n";

    convergence::ConvergenceConfig sft_cfg;
    sft_cfg.m = m;
    os << "sft,saturation_threshold," << format_fixed(convergence::sft_saturation_threshold(sft_cfg), 6)
       << ",-,\"sigma(m) at m=" << format_fixed(m, 6) << "\"\n";
    os << "sft,per_token_requirement,"
       << format_fixed(convergence::per_token_requirement(sft_cfg, length), 7)
       << ",-,\"geometric per-token floor for a " << length << "-token response\"\n";

    convergence::ConvergenceConfig dpo_cfg;
    dpo_cfg.m = m;
    dpo_cfg.beta = detail::setting_double(ctx.effective, "dpo_beta");
    os << "dpo,margin_floor," << format_fixed(convergence::dpo_margin_floor(0.0, 0.0, dpo_cfg), 6)
       << ",-,\"equal reference totals; floor = m/beta with beta="
       << format_fixed(dpo_cfg.beta, 6) << "\"\n";

    convergence::ConvergenceConfig simpo_cfg;
    simpo_cfg.m = m;
    simpo_cfg.beta = detail::setting_double(ctx.effective, "simpo_beta");
    simpo_cfg.gamma = detail::setting_double(ctx.effective, "simpo_gamma");
    os << "simpo,margin_floor," << format_fixed(convergence::simpo_margin_floor(simpo_cfg), 6)
       << ",-,\"floor = (gamma+m)/beta with beta=" << format_fixed(simpo_cfg.beta, 6)
       << " gamma=" << format_fixed(simpo_cfg.gamma, 6) << "\"\n";

    for (double lambda : {0.1, 0.2, 0.3}) {
        for (double p_w : {0.01, 0.5, 0.99}) {
            for (double p_l : {0.01, 0.5, 0.99}) {
                convergence::ConvergenceConfig orpo_cfg;
                orpo_cfg.m = m;
                orpo_cfg.lambda = lambda;
                const auto rep = convergence::orpo_condition(p_w, p_l, orpo_cfg);
                os << "orpo,condition lambda=" << format_fixed(lambda, 1)
                   << " p_w=" << format_fixed(p_w, 2) << " p_l=" << format_fixed(p_l, 2) << ","
                   << format_fixed(rep.margin_value, 6) << ","
                   << (rep.satisfied ? "true" : "false") << ",\"" << rep.detail << "\"\n";
            }
        }
    }

    std::uint64_t seed_state = detail::setting_seed(ctx.effective, "seed");
    const std::uint64_t witness_seed = splitmix64_next(seed_state);
    const auto witness = convergence::simper_no_bt_witness(samples, witness_seed);
    os << "simper,no_bt_witness," << format_fixed(witness.value, 6) << ","
       << (witness.found ? "true" : "false") << ",\"avg_chosen="
       << format_fixed(witness.avg_chosen, 6) << " avg_rejected="
       << format_fixed(witness.avg_rejected, 6) << " draws=" << witness.draws_used << "\"\n";

    ctx.write_output("convergence.csv", os.str());
    ctx.finish();
    std::cout << "analyze: wrote " << (ctx.out_dir / "convergence.csv").string() << "\n";
    return kExitOk;
}

inline int cmd_report(detail::RunContext& ctx, const std::vector<std::string>& evals,
                      const std::vector<std::string>& benchmarks,
                      const std::vector<std::string>& baseline_files,
                      const std::vector<double>& baseline_lengths) {
    if (!baseline_files.empty() && !baseline_lengths.empty()) {
        std::cerr << "report: give --baseline files or --baseline-length values, not both\n";
        return kExitUsage;
    }
    if (!baseline_files.empty() && baseline_files.size() != evals.size()) {
        std::cerr << "report: got " << baseline_files.size() << " baselines for "
                  << evals.size() << " eval files\n";
        return kExitUsage;
    }
    if (!baseline_lengths.empty() && baseline_lengths.size() != evals.size()) {
        std::cerr << "report: got " << baseline_lengths.size() << " baseline lengths for "
                  << evals.size() << " eval files\n";
        return kExitUsage;
    }
    if (!benchmarks.empty() && benchmarks.size() != evals.size()) {
        std::cerr << "report: got " << benchmarks.size() << " benchmark names for "
                  << evals.size() << " eval files\n";
        return kExitUsage;
    }
    const std::string& mode_name = ctx.get("length_averaging");
    evalharness::LengthAveraging averaging;
    if (mode_name == "sample") {
        averaging = evalharness::LengthAveraging::PerSample;
    } else if (mode_name == "record") {
        averaging = evalharness::LengthAveraging::PerRecord;
    } else {
        std::cerr << "report: length_averaging must be 'sample' or 'record', got '" << mode_name
                  << "'\n";
        return kExitUsage;
    }

    std::vector<evalharness::NamedReport> rows;
    for (std::size_t i = 0; i < evals.size(); ++i) {
        ctx.note_input(evals[i]);
        const auto records = evalharness::read_eval_jsonl(evals[i]);
        if (records.empty()) {
            std::cerr << "report: " << evals[i] << " holds no eval records\n";
            ctx.finish();
            return kExitEmpty;
        }
        evalharness::MetricsReport metrics =
            evalharness::dataset_metrics(records, std::nullopt, averaging);
        if (!baseline_files.empty()) {
            ctx.note_input(baseline_files[i]);
            const auto baseline_records = evalharness::read_eval_jsonl(baseline_files[i]);
            if (baseline_records.empty()) {
                std::cerr << "report: " << baseline_files[i] << " holds no eval records\n";
                ctx.finish();
                return kExitEmpty;
            }
            metrics = evalharness::compare_to_baseline(
                metrics, evalharness::dataset_metrics(baseline_records, std::nullopt, averaging));
        } else if (!baseline_lengths.empty()) {
            metrics.baseline_length = baseline_lengths[i];
            metrics.reduction_pct =
                evalharness::reduction_percent(baseline_lengths[i], metrics.avg_length);
        }
        const std::string name = benchmarks.empty()
                                     ? std::filesystem::path(evals[i]).stem().string()
                                     : benchmarks[i];
        rows.push_back({name, metrics});
    }

    ctx.write_output("report.md", evalharness::render_report(rows));
    std::ostringstream csv;
    evalharness::write_metrics_csv(csv, rows);
    ctx.write_output("metrics.csv", csv.str());
    ctx.finish();
    std::cout << "report: " << rows.size() << " benchmark" << (rows.size() == 1 ? "" : "s")
              << " -> " << (ctx.out_dir / "report.md").string() << "\n";
    return kExitOk;
}

inline int cmd_stats(detail::RunContext& ctx) {
    const std::string pairs_path = ctx.get("pairs");
    if (pairs_path.empty()) {
        std::cerr << "stats: a pairs file is required (--pairs)\n";
        return kExitUsage;
    }
    ctx.note_input(pairs_path);
    const auto pairs = datapipe::read_pairs_jsonl(pairs_path);
    if (pairs.empty()) {
        std::cerr << "stats: " << pairs_path << " holds no pairs\n";
        ctx.finish();
        return kExitEmpty;
    }
    std::vector<datapipe::SplitStats> rows;
    for (const auto label : {datapipe::Difficulty::Easy, datapipe::Difficulty::Medium,
                             datapipe::Difficulty::Difficult}) {
        std::vector<datapipe::PreferencePair> subset;
        for (const auto& p : pairs) {
            if (p.split_label == label) subset.push_back(p);
        }
        if (!subset.empty()) {
            rows.push_back(datapipe::split_stats(subset, label));
        }
    }
    std::ostringstream os;
    datapipe::write_stats_csv(os, rows);
    ctx.write_output("stats.csv", os.str());
    ctx.finish();
    std::cout << "stats: " << pairs.size() << " pairs across " << rows.size() << " split"
              << (rows.size() == 1 ? "" : "s") << "\n";
    return kExitOk;
}

/// Builds the app, parses, layers the configuration, and dispatches. The
/// seed fan-out is documented here once: train-toy hands the root seed to
/// the trainer (which derives its shuffle and sampling streams from it),
/// and analyze advances one splitmix64 step to seed the witness search.
inline int run(int argc, const char* const* argv) {
    CLI::App app{"desk-scale lab for length-controlled preference optimization"};
    app.require_subcommand(1);

    std::string g_seed;
    std::string g_out;
    std::string g_config;
    bool g_verbose = false;
    auto* seed_opt = app.add_option("--seed", g_seed, "root seed for every sampled artifact");
    auto* out_opt = app.add_option("--out", g_out, "output directory");
    app.add_option("--config", g_config, "flat key=value config file");
    auto* verbose_opt = app.add_flag("--verbose", g_verbose, "narrate file writes on stderr");

    const auto keyed = [&](CLI::App* sub) {
        detail::KeyedOptions opts;
        opts.sub = sub;
        sub->fallthrough();
        opts.defaults["seed"] = "0";
        opts.defaults["out"] = ".";
        opts.defaults["verbose"] = "false";
        return opts;
    };

    auto* pairs_sub = app.add_subcommand("pairs", "filter rollouts and build preference pairs");
    detail::KeyedOptions pairs_opts = keyed(pairs_sub);
    pairs_opts.add("rollouts", "--rollouts", "", "rollout corpus (jsonl)");
    pairs_opts.add("split", "--split", "easy", "difficulty split to keep");
    pairs_opts.add("limit", "--limit", "", "keep only the first N pairs");

    auto* train_sub = app.add_subcommand("train-toy", "fit and train the toy policy on pairs");
    detail::KeyedOptions train_opts = keyed(train_sub);
    train_opts.add("pairs", "--pairs", "", "preference pairs (jsonl)");
    train_opts.add("objective", "--objective", "", "sft, dpo, simpo, simper, orpo, or lcpo");
    train_opts.add("steps", "--steps", "50", "gradient steps");
    train_opts.add("learning_rate", "--learning-rate", "0.5", "plain gradient descent step size");
    train_opts.add("batch_size", "--batch-size", "8", "pairs per step");
    train_opts.add("temperature", "--temperature", "0.6", "sampling temperature for length stats");
    train_opts.add("max_sample_length", "--max-sample-length", "64", "sampled sequence cap");
    train_opts.add("alpha", "--alpha", "0.01", "additive smoothing for the fitted policy");
    train_opts.add("classes", "--classes", "", "prompt class count (default: inferred)");
    train_opts.add("vocab", "--vocab", "", "vocabulary size (default: inferred)");
    train_opts.add("beta", "--beta", "", "objective beta (default per objective)");
    train_opts.add("gamma", "--gamma", "", "objective gamma (default per objective)");
    train_opts.add("lambda", "--lambda", "", "objective lambda (default per objective)");
    train_opts.add("margin_epsilon", "--margin-epsilon", "", "margin offset (default 0)");

    auto* analyze_sub = app.add_subcommand("analyze", "write the convergence condition table");
    detail::KeyedOptions analyze_opts = keyed(analyze_sub);
    analyze_opts.add("m", "--m", "5", "saturation point");
    analyze_opts.add("length", "--length", "1000", "response length for the per-token row");
    analyze_opts.add("samples", "--samples", "10", "draw budget for the witness search");
    analyze_opts.add("dpo_beta", "--dpo-beta", "1", "beta for the dpo floor row");
    analyze_opts.add("simpo_beta", "--simpo-beta", "2", "beta for the simpo floor row");
    analyze_opts.add("simpo_gamma", "--simpo-gamma", "0.5", "gamma for the simpo floor row");

    auto* report_sub = app.add_subcommand("report", "render benchmark metrics tables");
    detail::KeyedOptions report_opts = keyed(report_sub);
    report_opts.add("length_averaging", "--length-averaging", "sample",
                    "average lengths per sample or per record");
    std::vector<std::string> report_evals;
    std::vector<std::string> report_benchmarks;
    std::vector<std::string> report_baselines;
    std::vector<double> report_baseline_lengths;
    report_sub->add_option("--eval", report_evals, "eval dump (jsonl); repeat per benchmark")
        ->required();
    report_sub->add_option("--benchmark", report_benchmarks,
                           "row name; defaults to the eval file stem");
    report_sub->add_option("--baseline", report_baselines, "baseline eval dump (jsonl)");
    report_sub->add_option("--baseline-length", report_baseline_lengths,
                           "known baseline average length");

    auto* stats_sub = app.add_subcommand("stats", "summarize a pairs file per split");
    detail::KeyedOptions stats_opts = keyed(stats_sub);
    stats_opts.add("pairs", "--pairs", "", "preference pairs (jsonl)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    const auto dispatch = [&](const detail::KeyedOptions& opts,
                              const std::string& name) -> detail::RunContext {
        std::map<std::string, std::string> effective = opts.layer(g_config);
        if (seed_opt->count() > 0) effective["seed"] = g_seed;
        if (out_opt->count() > 0) effective["out"] = g_out;
        if (verbose_opt->count() > 0) effective["verbose"] = g_verbose ? "true" : "false";
        detail::RunContext ctx;
        ctx.command = name;
        ctx.out_dir = effective.at("out");
        ctx.verbose = effective.at("verbose") == "true";
        ctx.effective = std::move(effective);
        return ctx;
    };

    try {
        if (pairs_sub->parsed()) {
            auto ctx = dispatch(pairs_opts, "pairs");
            return cmd_pairs(ctx);
        }
        if (train_sub->parsed()) {
            auto ctx = dispatch(train_opts, "train-toy");
            return cmd_train_toy(ctx);
        }
        if (analyze_sub->parsed()) {
            auto ctx = dispatch(analyze_opts, "analyze");
            return cmd_analyze(ctx);
        }
        if (report_sub->parsed()) {
            auto ctx = dispatch(report_opts, "report");
            ctx.effective["eval"] = detail::join(report_evals);
            ctx.effective["benchmark"] = detail::join(report_benchmarks);
            ctx.effective["baseline"] = detail::join(report_baselines);
            std::vector<std::string> rendered_lengths;
            rendered_lengths.reserve(report_baseline_lengths.size());
            for (double v : report_baseline_lengths) {
                rendered_lengths.push_back(format_fixed(v, 6));
            }
            ctx.effective["baseline_length"] = detail::join(rendered_lengths);
            return cmd_report(ctx, report_evals, report_benchmarks, report_baselines,
                              report_baseline_lengths);
        }
        if (stats_sub->parsed()) {
            auto ctx = dispatch(stats_opts, "stats");
            return cmd_stats(ctx);
        }
    } catch (const datapipe::ParseError& e) {
        std::cerr << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << app.get_subcommands().front()->get_name() << ": " << e.what() << "\n";
        return kExitUsage;
    }
    std::cerr << "no subcommand\n";
    return kExitUsage;
}

/// Test-facing entry: args without the program name.
inline int run(const std::vector<std::string>& args) {
    std::vector<std::string> full;
    full.reserve(args.size() + 1);
    full.emplace_back("lcpolab");
    full.insert(full.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    argv.reserve(full.size());
    for (const auto& s : full) argv.push_back(s.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace lcpo::cli
