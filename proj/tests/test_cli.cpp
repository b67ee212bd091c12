#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "json.hpp"
#include "lcpo/cli.hpp"

using lcpo::cli::run;
namespace fs = std::filesystem;

namespace {

using nlohmann::json;

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        const auto stamp =
            std::chrono::steady_clock::now().time_since_epoch().count() % 1000000;
        path = fs::temp_directory_path() /
               ("lcpo_cli_" + std::to_string(stamp) + "_" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

int line_count(const std::string& text) {
    int lines = 0;
    for (char c : text) {
        if (c == '\n') ++lines;
    }
    return lines;
}

std::string write_corpus(const TempDir& dir, int classes = 20) {
    const auto corpus = lcpo::toylab::make_synthetic_corpus(classes, 8, 40, 41);
    const std::string path = dir.file("rollouts.jsonl");
    std::ofstream out(path, std::ios::binary);
    lcpo::datapipe::write_rollouts_jsonl(out, corpus.records);
    return path;
}

std::string strip_timestamp(const std::string& manifest_text) {
    const json j = json::parse(manifest_text);
    json copy = j;
    copy.erase("created_at");
    return copy.dump(2);
}

}  // namespace

TEST_CASE("pairs subcommand builds the easy split", "[cli]") {
    TempDir dir;
    const std::string rollouts = write_corpus(dir);
    const std::string out = dir.file("out");

    REQUIRE(run({"pairs", "--rollouts", rollouts, "--split", "easy", "--out", out}) == 0);

    const auto pairs = lcpo::datapipe::read_pairs_jsonl(out + "/pairs.jsonl");
    REQUIRE(pairs.size() == 14);  // 70% of 20 classes pass every sample
    for (const auto& p : pairs) {
        REQUIRE(p.split_label == lcpo::datapipe::Difficulty::Easy);
        REQUIRE(p.chosen.token_count <= p.rejected.token_count);
        REQUIRE(p.chosen.token_ids.has_value());
        REQUIRE(p.prompt_class.has_value());
    }
    const std::string stats = slurp(out + "/stats.csv");
    REQUIRE(stats.rfind("split,questions,avg_chosen_len,avg_rejected_len\n", 0) == 0);
    REQUIRE(stats.find("easy,14,") != std::string::npos);

    const json manifest = json::parse(slurp(out + "/manifest.json"));
    REQUIRE(manifest["command"] == "pairs");
    REQUIRE(manifest["effective_config"]["split"] == "easy");
    REQUIRE(manifest["effective_config"]["seed"] == "0");
    REQUIRE(manifest["inputs"][rollouts].get<std::string>().rfind("fnv1a64:", 0) == 0);
    REQUIRE(manifest["outputs"] == json({"pairs.jsonl", "stats.csv"}));
    REQUIRE(manifest.contains("created_at"));
}

TEST_CASE("pairs subcommand limit and failure modes", "[cli]") {
    TempDir dir;
    const std::string rollouts = write_corpus(dir);

    SECTION("limit keeps a prefix") {
        const std::string out = dir.file("limited");
        REQUIRE(run({"pairs", "--rollouts", rollouts, "--limit", "5", "--out", out}) == 0);
        REQUIRE(lcpo::datapipe::read_pairs_jsonl(out + "/pairs.jsonl").size() == 5);
    }
    SECTION("empty split exits 2 and still writes the manifest") {
        const std::string out = dir.file("empty");
        REQUIRE(run({"pairs", "--rollouts", rollouts, "--split", "difficult", "--out", out}) == 2);
        REQUIRE_FALSE(fs::exists(out + "/pairs.jsonl"));
        const json manifest = json::parse(slurp(out + "/manifest.json"));
        REQUIRE(manifest["outputs"].empty());
    }
    SECTION("malformed rollouts exit 1") {
        const std::string bad = dir.file("bad.jsonl");
        spit(bad, "{\"question_id\":\"q\"}\n");
        REQUIRE(run({"pairs", "--rollouts", bad, "--out", dir.file("x1")}) == 1);
    }
    SECTION("missing rollouts file exits 1") {
        REQUIRE(run({"pairs", "--rollouts", dir.file("nope.jsonl"), "--out", dir.file("x2")}) == 1);
    }
    SECTION("unknown split exits 1") {
        REQUIRE(run({"pairs", "--rollouts", rollouts, "--split", "hard",
                     "--out", dir.file("x3")}) == 1);
    }
    SECTION("non-numeric limit exits 1") {
        REQUIRE(run({"pairs", "--rollouts", rollouts, "--limit", "many",
                     "--out", dir.file("x4")}) == 1);
    }
    SECTION("rollouts is required") {
        REQUIRE(run({"pairs", "--out", dir.file("x5")}) == 1);
    }
}

TEST_CASE("train-toy subcommand trains and serializes", "[cli]") {
    TempDir dir;
    const std::string rollouts = write_corpus(dir, 10);
    const std::string pairs_out = dir.file("p");
    REQUIRE(run({"pairs", "--rollouts", rollouts, "--out", pairs_out}) == 0);
    const std::string pairs = pairs_out + "/pairs.jsonl";

    SECTION("lcpo run writes trace, lengths, and a loadable policy") {
        const std::string out = dir.file("t");
        REQUIRE(run({"train-toy", "--pairs", pairs, "--objective", "lcpo", "--steps", "5",
                     "--seed", "9", "--out", out}) == 0);
        const std::string trace = slurp(out + "/trace.csv");
        REQUIRE(trace.rfind("step,loss,margin_mean\n", 0) == 0);
        REQUIRE(line_count(trace) == 6);  // header plus one row per step
        const std::string lengths = slurp(out + "/lengths.csv");
        REQUIRE(lengths.rfind("phase,prompt_class,length\n", 0) == 0);
        REQUIRE(lengths.find("pre,") != std::string::npos);
        REQUIRE(lengths.find("post,") != std::string::npos);
        const auto policy = lcpo::toylab::policy_from_json(json::parse(slurp(out + "/policy.json")));
        REQUIRE(policy.vocab_size() == lcpo::toylab::kSyntheticVocab);

        const json manifest = json::parse(slurp(out + "/manifest.json"));
        REQUIRE(manifest["effective_config"]["lambda"] == "0.300000");
        REQUIRE(manifest["effective_config"]["vocab"] == "13");
        REQUIRE(manifest["effective_config"]["steps"] == "5");
    }
    SECTION("zero steps is a valid fit-only run") {
        const std::string out = dir.file("t0");
        REQUIRE(run({"train-toy", "--pairs", pairs, "--objective", "sft", "--steps", "0",
                     "--out", out}) == 0);
        REQUIRE(slurp(out + "/trace.csv") == "step,loss,margin_mean\n");
    }
    SECTION("unknown objective exits 1") {
        REQUIRE(run({"train-toy", "--pairs", pairs, "--objective", "foo",
                     "--out", dir.file("t1")}) == 1);
    }
    SECTION("pairs without token ids exit 1") {
        const std::string bare = dir.file("bare.jsonl");
        spit(bare,
             R"({"question_id":"q","prompt":"p","split_label":"easy",)"
             R"("chosen":{"token_count":2,"correct":true},)"
             R"("rejected":{"token_count":3,"correct":false},"prompt_class":0})"
             "\n");
        REQUIRE(run({"train-toy", "--pairs", bare, "--objective", "lcpo",
                     "--out", dir.file("t2")}) == 1);
    }
    SECTION("empty pairs file exits 2") {
        const std::string empty = dir.file("none.jsonl");
        spit(empty, "");
        REQUIRE(run({"train-toy", "--pairs", empty, "--objective", "lcpo",
                     "--out", dir.file("t3")}) == 2);
    }
}

TEST_CASE("config file layering", "[cli]") {
    TempDir dir;
    const std::string rollouts = write_corpus(dir, 10);
    const std::string pairs_out = dir.file("p");
    REQUIRE(run({"pairs", "--rollouts", rollouts, "--out", pairs_out}) == 0);
    const std::string pairs = pairs_out + "/pairs.jsonl";

    SECTION("file entries override defaults, flags override the file") {
        const std::string cfg = dir.file("run.cfg");
        spit(cfg,
             "# toy run\n"
             "steps = 7\n"
             "learning_rate = 2.5\n"
             "objective = lcpo\n");
        const std::string out = dir.file("cfg_out");
        REQUIRE(run({"train-toy", "--pairs", pairs, "--config", cfg, "--steps", "3",
                     "--out", out}) == 0);
        const json manifest = json::parse(slurp(out + "/manifest.json"));
        REQUIRE(manifest["effective_config"]["steps"] == "3");
        REQUIRE(manifest["effective_config"]["learning_rate"] == "2.5");
        REQUIRE(manifest["effective_config"]["objective"] == "lcpo");
        REQUIRE(line_count(slurp(out + "/trace.csv")) == 4);
    }
    SECTION("unknown config key exits 1") {
        const std::string cfg = dir.file("typo.cfg");
        spit(cfg, "step_count = 7\n");
        REQUIRE(run({"train-toy", "--pairs", pairs, "--objective", "lcpo", "--config", cfg,
                     "--out", dir.file("c1")}) == 1);
    }
    SECTION("config line without equals exits 1") {
        const std::string cfg = dir.file("broken.cfg");
        spit(cfg, "steps\n");
        REQUIRE(run({"train-toy", "--pairs", pairs, "--objective", "lcpo", "--config", cfg,
                     "--out", dir.file("c2")}) == 1);
    }
    SECTION("config file can carry the seed") {
        const std::string cfg = dir.file("seed.cfg");
        spit(cfg, "seed = 77\n");
        const std::string out = dir.file("c3");
        REQUIRE(run({"analyze", "--config", cfg, "--out", out}) == 0);
        const json manifest = json::parse(slurp(out + "/manifest.json"));
        REQUIRE(manifest["effective_config"]["seed"] == "77");
    }
}

TEST_CASE("analyze subcommand writes the condition table", "[cli]") {
    TempDir dir;
    const std::string out = dir.file("a");
    REQUIRE(run({"analyze", "--out", out, "--seed", "7"}) == 0);
    const std::string csv = slurp(out + "/convergence.csv");

    REQUIRE(csv.rfind("objective,quantity,value,satisfied,detail\n", 0) == 0);
    REQUIRE(csv.find("sft,saturation_threshold,0.993307,") != std::string::npos);
    REQUIRE(csv.find("sft,per_token_requirement,0.9999933,") != std::string::npos);
    REQUIRE(csv.find("dpo,margin_floor,5.000000,") != std::string::npos);
    REQUIRE(csv.find("simpo,margin_floor,2.750000,") != std::string::npos);

    int orpo_rows = 0;
    int satisfied_extremes = 0;
    std::istringstream lines(csv);
    std::string line;
    while (std::getline(lines, line)) {
        if (line.rfind("orpo,", 0) == 0) {
            ++orpo_rows;
            if (line.find("p_w=0.99 p_l=0.01") != std::string::npos) {
                REQUIRE(line.find(",true,") != std::string::npos);  // z > m branch
                ++satisfied_extremes;
            }
        }
    }
    REQUIRE(orpo_rows == 27);  // three lambdas, three by three probability grid
    REQUIRE(satisfied_extremes == 3);
    REQUIRE(csv.find("simper,no_bt_witness,-") != std::string::npos);
    REQUIRE(csv.find(",true,\"avg_chosen=") != std::string::npos);
}

TEST_CASE("report subcommand renders metrics", "[cli]") {
    TempDir dir;
    const std::string eval = dir.file("eval.jsonl");
    spit(eval,
         R"({"item_id":"m1","samples":[{"correct":true,"token_count":1800},{"correct":true,"token_count":1826}]})"
         "\n"
         R"({"item_id":"m2","samples":[{"correct":false,"token_count":1813}]})"
         "\n");

    SECTION("numeric baseline reproduces the reduction cell") {
        const std::string out = dir.file("r");
        REQUIRE(run({"report", "--eval", eval, "--benchmark", "MATH-500", "--baseline-length",
                     "4223", "--out", out}) == 0);
        const std::string csv = slurp(out + "/metrics.csv");
        REQUIRE(csv.find("MATH-500,50.00,1813,,-57.07\n") != std::string::npos);
        const std::string md = slurp(out + "/report.md");
        REQUIRE(md.find("| MATH-500 | 50.00 (-) | 1813 (-57.07%) |") != std::string::npos);
    }
    SECTION("baseline file fills both delta columns") {
        const std::string base = dir.file("base.jsonl");
        spit(base,
             R"({"item_id":"m1","samples":[{"correct":true,"token_count":4223}]})"
             "\n"
             R"({"item_id":"m2","samples":[{"correct":true,"token_count":4223}]})"
             "\n");
        const std::string out = dir.file("rb");
        REQUIRE(run({"report", "--eval", eval, "--baseline", base, "--benchmark", "toy",
                     "--out", out}) == 0);
        const std::string csv = slurp(out + "/metrics.csv");
        REQUIRE(csv.find("toy,50.00,1813,-50.00,-57.07\n") != std::string::npos);
    }
    SECTION("eval file stem names the row by default") {
        const std::string out = dir.file("rs");
        REQUIRE(run({"report", "--eval", eval, "--out", out}) == 0);
        REQUIRE(slurp(out + "/metrics.csv").find("eval,50.00,1813,,\n") != std::string::npos);
    }
    SECTION("empty eval file exits 2") {
        const std::string none = dir.file("none.jsonl");
        spit(none, "");
        REQUIRE(run({"report", "--eval", none, "--out", dir.file("r2")}) == 2);
    }
    SECTION("both baseline kinds at once exit 1") {
        REQUIRE(run({"report", "--eval", eval, "--baseline", eval, "--baseline-length", "10",
                     "--out", dir.file("r3")}) == 1);
    }
    SECTION("mismatched benchmark names exit 1") {
        REQUIRE(run({"report", "--eval", eval, "--benchmark", "a", "--benchmark", "b",
                     "--out", dir.file("r4")}) == 1);
    }
    SECTION("eval flag is required") {
        REQUIRE(run({"report", "--out", dir.file("r5")}) == 1);
    }
    SECTION("bad averaging mode exits 1") {
        REQUIRE(run({"report", "--eval", eval, "--length-averaging", "median",
                     "--out", dir.file("r6")}) == 1);
    }
}

TEST_CASE("stats subcommand summarizes splits", "[cli]") {
    TempDir dir;
    const auto corpus = lcpo::toylab::make_synthetic_corpus(20, 8, 40, 41);
    std::vector<lcpo::datapipe::PreferencePair> pairs;
    for (const auto& rec : corpus.records) {
        pairs.push_back(lcpo::datapipe::build_pair(rec));
    }
    const std::string pairs_path = dir.file("pairs.jsonl");
    std::ofstream pairs_out(pairs_path, std::ios::binary);
    lcpo::datapipe::write_pairs_jsonl(pairs_out, pairs);
    pairs_out.close();

    SECTION("one row per split present in the file") {
        const std::string out = dir.file("s");
        REQUIRE(run({"stats", "--pairs", pairs_path, "--out", out}) == 0);
        const std::string csv = slurp(out + "/stats.csv");
        REQUIRE(csv.find("easy,14,") != std::string::npos);
        REQUIRE(csv.find("medium,6,") != std::string::npos);
        REQUIRE(csv.find("difficult,") == std::string::npos);
    }
    SECTION("empty pairs file exits 2") {
        const std::string none = dir.file("none.jsonl");
        spit(none, "");
        REQUIRE(run({"stats", "--pairs", none, "--out", dir.file("s2")}) == 2);
    }
}

TEST_CASE("same seed reruns are byte identical", "[cli]") {
    TempDir dir;
    const std::string rollouts = write_corpus(dir, 10);
    const std::string out = dir.file("redo");

    const auto run_all = [&]() {
        REQUIRE(run({"pairs", "--rollouts", rollouts, "--out", out}) == 0);
        REQUIRE(run({"train-toy", "--pairs", out + "/pairs.jsonl", "--objective", "lcpo",
                     "--steps", "10", "--seed", "123", "--out", out}) == 0);
        REQUIRE(run({"analyze", "--seed", "7", "--out", out}) == 0);
        const std::string eval = dir.file("eval.jsonl");
        spit(eval, R"({"item_id":"m","samples":[{"correct":true,"token_count":483}]})" "\n");
        REQUIRE(run({"report", "--eval", eval, "--baseline-length", "558", "--out", out}) == 0);
    };

    run_all();
    const std::vector<std::string> artifacts = {"pairs.jsonl", "stats.csv",   "trace.csv",
                                                "lengths.csv", "policy.json", "convergence.csv",
                                                "report.md",   "metrics.csv"};
    std::map<std::string, std::string> first;
    for (const auto& name : artifacts) first[name] = slurp(out + "/" + name);
    const std::string first_manifest = strip_timestamp(slurp(out + "/manifest.json"));

    run_all();
    for (const auto& name : artifacts) {
        INFO(name);
        REQUIRE(slurp(out + "/" + name) == first.at(name));
    }
    REQUIRE(strip_timestamp(slurp(out + "/manifest.json")) == first_manifest);
}

TEST_CASE("top-level parse behavior", "[cli]") {
    SECTION("a subcommand is required") {
        REQUIRE(run(std::vector<std::string>{}) == 1);
    }
    SECTION("unknown subcommand exits 1") {
        REQUIRE(run({"frobnicate"}) == 1);
    }
    SECTION("help exits 0") {
        REQUIRE(run({"--help"}) == 0);
    }
}
