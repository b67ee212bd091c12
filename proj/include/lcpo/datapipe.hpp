#pragma once

// Rollout ingestion and preference-pair construction. A rollout corpus is
// one JSON object per line, k sampled outputs per question; records are
// labeled by exact pass-rate counts and turned into shortest-chosen /
// longest-rejected pairs, with per-split statistics as CSV.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcpo/format.hpp"

namespace lcpo::datapipe {

using nlohmann::json;

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_no, const std::string& what)
        : std::runtime_error("line " + std::to_string(line_no) + ": " + what),
          line(line_no) {}
};

struct OutputSample {
    std::optional<std::string> text;
    int token_count{};
    bool correct{};
    std::optional<std::vector<double>> token_logprobs;
    // Toy-vocabulary corpora carry explicit token ids so the toy policy can
    // score the response; absent for plain text corpora.
    std::optional<std::vector<int>> token_ids;
};

struct RolloutRecord {
    std::string question_id;
    std::string prompt;
    std::vector<OutputSample> outputs;  // sorted ascending by token_count
    double pass_rate{};                 // correct count / k, exact
    std::optional<int> prompt_class;    // toy-corpus conditioning context
};

enum class Difficulty { Easy, Medium, Difficult };

inline const char* difficulty_name(Difficulty d) {
    switch (d) {
        case Difficulty::Easy: return "easy";
        case Difficulty::Medium: return "medium";
        case Difficulty::Difficult: return "difficult";
    }
    return "unknown";
}

inline std::optional<Difficulty> parse_difficulty(std::string_view name) {
    if (name == "easy") return Difficulty::Easy;
    if (name == "medium") return Difficulty::Medium;
    if (name == "difficult") return Difficulty::Difficult;
    return std::nullopt;
}

struct PreferencePair {
    std::string question_id;
    std::string prompt;
    OutputSample chosen;
    OutputSample rejected;
    Difficulty split_label{};
    std::optional<int> prompt_class;
};

struct SplitStats {
    Difficulty split{};
    int question_count{};
    double avg_chosen_length{};
    double avg_rejected_length{};
    bool empty{};
};

inline int correct_count(const std::vector<OutputSample>& outputs) {
    return static_cast<int>(
        std::count_if(outputs.begin(), outputs.end(), [](const OutputSample& o) {
            return o.correct;
        }));
}

inline double pass_rate(const std::vector<OutputSample>& outputs) {
    if (outputs.empty()) {
        throw std::invalid_argument("pass_rate: output list is empty");
    }
    return static_cast<double>(correct_count(outputs)) /
           static_cast<double>(outputs.size());
}

/// Labels by the exact boundary cases: saturated pass rate is easy, zero
/// is difficult, anything strictly between is medium. Stored pass rates
/// are exact count/k ratios, so the equality comparisons are safe.
inline Difficulty difficulty_label(double s) {
    if (!(s >= 0.0 && s <= 1.0)) {
        throw std::domain_error("difficulty_label: pass rate must lie in [0, 1]");
    }
    if (s == 1.0) return Difficulty::Easy;
    if (s == 0.0) return Difficulty::Difficult;
    return Difficulty::Medium;
}

/// Same labeling from integer counts, bypassing floats entirely.
inline Difficulty record_label(const RolloutRecord& record) {
    const int correct = correct_count(record.outputs);
    const int k = static_cast<int>(record.outputs.size());
    if (correct == k && k > 0) return Difficulty::Easy;
    if (correct == 0) return Difficulty::Difficult;
    return Difficulty::Medium;
}

/// Builds a record from unsorted outputs: stable-sorts ascending by token
/// count and derives the pass rate from the correctness flags.
inline RolloutRecord make_record(std::string question_id, std::string prompt,
                                 std::vector<OutputSample> outputs) {
    if (outputs.empty()) {
        throw std::invalid_argument("make_record: record has zero outputs");
    }
    std::stable_sort(outputs.begin(), outputs.end(),
                     [](const OutputSample& a, const OutputSample& b) {
                         return a.token_count < b.token_count;
                     });
    RolloutRecord rec;
    rec.question_id = std::move(question_id);
    rec.prompt = std::move(prompt);
    rec.pass_rate = pass_rate(outputs);
    rec.outputs = std::move(outputs);
    return rec;
}

/// Shortest output becomes chosen, longest becomes rejected; correctness
/// plays no role in the selection. Ties go to the earliest stored sample,
/// which under the stable sort is the earliest sample in the input.
inline PreferencePair build_pair(const RolloutRecord& record) {
    if (record.outputs.size() < 2) {
        throw std::invalid_argument("build_pair: need at least two outputs, got " +
                                    std::to_string(record.outputs.size()));
    }
    size_t min_i = 0;
    size_t max_i = 0;
    for (size_t i = 1; i < record.outputs.size(); ++i) {
        if (record.outputs[i].token_count < record.outputs[min_i].token_count) min_i = i;
        if (record.outputs[i].token_count > record.outputs[max_i].token_count) max_i = i;
    }
    PreferencePair pair;
    pair.question_id = record.question_id;
    pair.prompt = record.prompt;
    pair.chosen = record.outputs[min_i];
    pair.rejected = record.outputs[max_i];
    pair.split_label = record_label(record);
    pair.prompt_class = record.prompt_class;
    return pair;
}

inline std::vector<RolloutRecord> filter_split(const std::vector<RolloutRecord>& records,
                                               Difficulty label) {
    std::vector<RolloutRecord> out;
    for (const auto& rec : records) {
        if (record_label(rec) == label) out.push_back(rec);
    }
    return out;
}

/// Aggregates one split's pairs. The split label is passed explicitly so
/// an empty split still knows its own name; mixed-label input is rejected.
inline SplitStats split_stats(const std::vector<PreferencePair>& pairs, Difficulty split) {
    SplitStats stats;
    stats.split = split;
    stats.question_count = static_cast<int>(pairs.size());
    if (pairs.empty()) {
        stats.empty = true;
        return stats;
    }
    double chosen_sum = 0.0;
    double rejected_sum = 0.0;
    for (const auto& p : pairs) {
        if (p.split_label != split) {
            throw std::invalid_argument("split_stats: pair labeled " +
                                        std::string(difficulty_name(p.split_label)) +
                                        " in the " + difficulty_name(split) + " split");
        }
        chosen_sum += p.chosen.token_count;
        rejected_sum += p.rejected.token_count;
    }
    stats.avg_chosen_length = chosen_sum / static_cast<double>(pairs.size());
    stats.avg_rejected_length = rejected_sum / static_cast<double>(pairs.size());
    return stats;
}

/// Deterministic prefix, for reproducing small-budget training runs.
inline std::vector<PreferencePair> take_first(const std::vector<PreferencePair>& pairs,
                                              int n) {
    if (n < 1) {
        throw std::invalid_argument("take_first: n must be >= 1");
    }
    const size_t count = std::min(pairs.size(), static_cast<size_t>(n));
    return {pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(count)};
}

namespace detail {

inline OutputSample parse_output(const json& j, int line_no) {
    if (!j.is_object()) throw ParseError(line_no, "output entry is not an object");
    OutputSample out;
    if (j.contains("text")) {
        if (!j["text"].is_string()) throw ParseError(line_no, "output text must be a string");
        out.text = j["text"].get<std::string>();
    }
    if (!j.contains("token_count") || !j["token_count"].is_number_integer()) {
        throw ParseError(line_no, "output missing integer token_count");
    }
    out.token_count = j["token_count"].get<int>();
    if (out.token_count < 1) throw ParseError(line_no, "token_count must be >= 1");
    if (!j.contains("correct") || !j["correct"].is_boolean()) {
        throw ParseError(line_no, "output missing boolean correct");
    }
    out.correct = j["correct"].get<bool>();
    if (j.contains("token_logprobs")) {
        if (!j["token_logprobs"].is_array()) {
            throw ParseError(line_no, "token_logprobs must be an array");
        }
        std::vector<double> lps;
        for (const auto& v : j["token_logprobs"]) {
            if (!v.is_number()) throw ParseError(line_no, "token_logprobs entries must be numbers");
            lps.push_back(v.get<double>());
        }
        if (static_cast<int>(lps.size()) != out.token_count) {
            throw ParseError(line_no, "token_logprobs length " + std::to_string(lps.size()) +
                                          " does not match token_count " +
                                          std::to_string(out.token_count));
        }
        out.token_logprobs = std::move(lps);
    }
    if (j.contains("token_ids")) {
        if (!j["token_ids"].is_array()) {
            throw ParseError(line_no, "token_ids must be an array");
        }
        std::vector<int> ids;
        for (const auto& v : j["token_ids"]) {
            if (!v.is_number_integer() || v.get<int>() < 0) {
                throw ParseError(line_no, "token_ids entries must be non-negative integers");
            }
            ids.push_back(v.get<int>());
        }
        if (static_cast<int>(ids.size()) != out.token_count) {
            throw ParseError(line_no, "token_ids length " + std::to_string(ids.size()) +
                                          " does not match token_count " +
                                          std::to_string(out.token_count));
        }
        out.token_ids = std::move(ids);
    }
    return out;
}

inline json output_to_json(const OutputSample& o) {
    json j;
    if (o.text) j["text"] = *o.text;
    j["token_count"] = o.token_count;
    j["correct"] = o.correct;
    if (o.token_logprobs) j["token_logprobs"] = *o.token_logprobs;
    if (o.token_ids) j["token_ids"] = *o.token_ids;
    return j;
}

}  // namespace detail

/// Reads a rollout corpus. Outputs come back sorted ascending by token
/// count; the pass rate is recomputed from the correctness flags and
/// cross-checked against the file's value when one is present.
inline std::vector<RolloutRecord> ingest_rollouts(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("ingest_rollouts: cannot open " + path);
    }
    std::vector<RolloutRecord> records;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw ParseError(line_no, "record is not an object");
        if (!j.contains("question_id") || !j["question_id"].is_string()) {
            throw ParseError(line_no, "record missing string question_id");
        }
        if (!j.contains("prompt") || !j["prompt"].is_string()) {
            throw ParseError(line_no, "record missing string prompt");
        }
        if (!j.contains("outputs") || !j["outputs"].is_array() || j["outputs"].empty()) {
            throw ParseError(line_no, "record has zero outputs");
        }
        std::vector<OutputSample> outputs;
        for (const auto& oj : j["outputs"]) {
            outputs.push_back(detail::parse_output(oj, line_no));
        }
        RolloutRecord rec = make_record(j["question_id"].get<std::string>(),
                                        j["prompt"].get<std::string>(), std::move(outputs));
        if (j.contains("prompt_class")) {
            if (!j["prompt_class"].is_number_integer() || j["prompt_class"].get<int>() < 0) {
                throw ParseError(line_no, "prompt_class must be a non-negative integer");
            }
            rec.prompt_class = j["prompt_class"].get<int>();
        }
        if (j.contains("pass_rate")) {
            if (!j["pass_rate"].is_number()) {
                throw ParseError(line_no, "pass_rate must be a number");
            }
            const double given = j["pass_rate"].get<double>();
            if (std::abs(given - rec.pass_rate) > 1e-9) {
                throw ParseError(line_no, "pass_rate " + std::to_string(given) +
                                              " does not match recomputed " +
                                              std::to_string(rec.pass_rate));
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline void write_pairs_jsonl(std::ostream& os, const std::vector<PreferencePair>& pairs) {
    for (const auto& p : pairs) {
        json j;
        j["question_id"] = p.question_id;
        j["prompt"] = p.prompt;
        j["chosen"] = detail::output_to_json(p.chosen);
        j["rejected"] = detail::output_to_json(p.rejected);
        j["split_label"] = difficulty_name(p.split_label);
        if (p.prompt_class) j["prompt_class"] = *p.prompt_class;
        os << j.dump() << '\n';
    }
}

inline void write_rollouts_jsonl(std::ostream& os, const std::vector<RolloutRecord>& records) {
    for (const auto& rec : records) {
        json j;
        j["question_id"] = rec.question_id;
        j["prompt"] = rec.prompt;
        if (rec.prompt_class) j["prompt_class"] = *rec.prompt_class;
        j["pass_rate"] = rec.pass_rate;
        json outs = json::array();
        for (const auto& o : rec.outputs) outs.push_back(detail::output_to_json(o));
        j["outputs"] = std::move(outs);
        os << j.dump() << '\n';
    }
}

inline std::vector<PreferencePair> read_pairs_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_pairs_jsonl: cannot open " + path);
    }
    std::vector<PreferencePair> pairs;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
        }
        PreferencePair p;
        if (!j.contains("question_id") || !j["question_id"].is_string() ||
            !j.contains("prompt") || !j["prompt"].is_string() || !j.contains("chosen") ||
            !j.contains("rejected") || !j.contains("split_label") ||
            !j["split_label"].is_string()) {
            throw ParseError(line_no, "pair record missing required fields");
        }
        p.question_id = j["question_id"].get<std::string>();
        p.prompt = j["prompt"].get<std::string>();
        p.chosen = detail::parse_output(j["chosen"], line_no);
        p.rejected = detail::parse_output(j["rejected"], line_no);
        const auto label = parse_difficulty(j["split_label"].get<std::string>());
        if (!label) throw ParseError(line_no, "unknown split_label");
        p.split_label = *label;
        if (j.contains("prompt_class")) {
            if (!j["prompt_class"].is_number_integer() || j["prompt_class"].get<int>() < 0) {
                throw ParseError(line_no, "prompt_class must be a non-negative integer");
            }
            p.prompt_class = j["prompt_class"].get<int>();
        }
        if (p.chosen.token_count > p.rejected.token_count) {
            throw ParseError(line_no, "chosen is longer than rejected");
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

/// One row per split, average lengths rounded to the nearest integer.
inline void write_stats_csv(std::ostream& os, const std::vector<SplitStats>& rows) {
    os << "split,questions,avg_chosen_len,avg_rejected_len\n";
    for (const auto& s : rows) {
        os << difficulty_name(s.split) << ',' << s.question_count << ','
           << std::llround(s.avg_chosen_length) << ','
           << std::llround(s.avg_rejected_length) << '\n';
    }
}

}  // namespace lcpo::datapipe
