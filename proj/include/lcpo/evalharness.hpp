#pragma once

// Benchmark metric aggregation: per-item pass@1 over repeated samples,
// corpus accuracy, average generation length, and the length-reduction
// ratio against a baseline, plus the report table renderers.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "lcpo/datapipe.hpp"
#include "lcpo/format.hpp"

namespace lcpo::evalharness {

using json = nlohmann::json;
using datapipe::ParseError;

/// One scored generation: whether it matched the reference answer and how
/// many tokens it spent.
struct EvalSample {
    bool correct = false;
    int token_count = 0;
};

/// All sampled generations for one benchmark item.
struct EvalRecord {
    std::string item_id;
    std::vector<EvalSample> samples;
};

namespace detail {

/// Signed twin of format_fixed; a value that rounds to zero keeps the
/// plus sign so reruns cannot flip between "+0.00" and "-0.00".
inline std::string format_signed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%+.*f", decimals, value);
    std::string out(buf);
    if (out[0] == '-' && out.find_first_not_of("-0.") == std::string::npos) {
        out[0] = '+';
    }
    return out;
}

inline void require_record(const EvalRecord& record) {
    if (record.samples.empty()) {
        throw std::invalid_argument("eval record " + record.item_id + " has no samples");
    }
    for (const EvalSample& sample : record.samples) {
        if (sample.token_count < 1) {
            throw std::invalid_argument("eval record " + record.item_id +
                                        " has a sample with a non-positive token count");
        }
    }
}

}  // namespace detail

/// Fraction of the record's samples that were scored correct.
inline double pass_at_1_avg(const EvalRecord& record) {
    detail::require_record(record);
    double correct = 0.0;
    for (const EvalSample& sample : record.samples) {
        if (sample.correct) correct += 1.0;
    }
    return correct / static_cast<double>(record.samples.size());
}

/// Percentage by which the measured length falls below the baseline.
/// Positive when generations got shorter.
inline double reduction_percent(double baseline_length, double measured_length) {
    if (!(baseline_length > 0.0)) {
        throw std::invalid_argument("reduction_percent: baseline must be positive");
    }
    return 100.0 * (baseline_length - measured_length) / baseline_length;
}

/// How avg_length aggregates multi-sample items: a flat mean over every
/// sample, or a mean of per-item means. Sample-weighted is the default.
enum class LengthAveraging { PerSample, PerRecord };

struct MetricsReport {
    double accuracy = 0.0;  // fraction in [0, 1]
    double avg_length = 0.0;
    std::optional<double> baseline_length;
    std::optional<double> reduction_pct;
    std::optional<double> delta_accuracy;  // fraction, measured minus baseline
};

/// Aggregates a benchmark: accuracy is the mean of per-item pass@1 and
/// avg_length averages token counts. The reduction column appears only
/// when a baseline length is supplied.
inline MetricsReport dataset_metrics(const std::vector<EvalRecord>& records,
                                     std::optional<double> baseline_length = std::nullopt,
                                     LengthAveraging averaging = LengthAveraging::PerSample) {
    if (records.empty()) {
        throw std::invalid_argument("dataset_metrics: records must be non-empty");
    }
    MetricsReport report;
    double acc_sum = 0.0;
    double flat_len_sum = 0.0;
    double record_len_sum = 0.0;
    std::size_t sample_count = 0;
    for (const EvalRecord& record : records) {
        acc_sum += pass_at_1_avg(record);
        double len_sum = 0.0;
        for (const EvalSample& sample : record.samples) {
            len_sum += static_cast<double>(sample.token_count);
        }
        flat_len_sum += len_sum;
        record_len_sum += len_sum / static_cast<double>(record.samples.size());
        sample_count += record.samples.size();
    }
    report.accuracy = acc_sum / static_cast<double>(records.size());
    report.avg_length = averaging == LengthAveraging::PerSample
                            ? flat_len_sum / static_cast<double>(sample_count)
                            : record_len_sum / static_cast<double>(records.size());
    if (baseline_length) {
        report.baseline_length = *baseline_length;
        report.reduction_pct = reduction_percent(*baseline_length, report.avg_length);
    }
    return report;
}

/// Fills the delta columns of a measured report from a baseline run of the
/// same benchmark.
inline MetricsReport compare_to_baseline(MetricsReport measured, const MetricsReport& baseline) {
    measured.baseline_length = baseline.avg_length;
    measured.reduction_pct = reduction_percent(baseline.avg_length, measured.avg_length);
    measured.delta_accuracy = measured.accuracy - baseline.accuracy;
    return measured;
}

/// One benchmark row of a rendered report.
struct NamedReport {
    std::string benchmark;
    MetricsReport metrics;
};

/// Footer aggregates: Total sums the accuracy deltas in percentage points,
/// Avg is the mean signed length-change ratio. Each is absent when no row
/// carries the corresponding baseline.
struct ReportSummary {
    std::optional<double> total_delta_accuracy;
    std::optional<double> avg_length_change_pct;
};

inline ReportSummary summarize(const std::vector<NamedReport>& rows) {
    ReportSummary summary;
    double acc_total = 0.0;
    int acc_rows = 0;
    double change_sum = 0.0;
    int change_rows = 0;
    for (const NamedReport& row : rows) {
        if (row.metrics.delta_accuracy) {
            acc_total += 100.0 * *row.metrics.delta_accuracy;
            ++acc_rows;
        }
        if (row.metrics.reduction_pct) {
            change_sum += -*row.metrics.reduction_pct;
            ++change_rows;
        }
    }
    if (acc_rows > 0) summary.total_delta_accuracy = acc_total;
    if (change_rows > 0) summary.avg_length_change_pct = change_sum / change_rows;
    return summary;
}

/// Markdown table with one row per benchmark and a Total / Avg footer.
/// Accuracy cells show the percentage with the signed delta in parens; the
/// length cells show the rounded token count with the signed change ratio.
/// Delta cells render as "-" when the row has no baseline. Values round to
/// two decimals in the table only; nothing upstream is rounded.
inline std::string render_report(const std::vector<NamedReport>& rows) {
    std::ostringstream os;
    os << "| Benchmark | Acc (Δ) | Len (Δ%) |\n";
    os << "| --- | --- | --- |\n";
    for (const NamedReport& row : rows) {
        const MetricsReport& m = row.metrics;
        os << "| " << row.benchmark << " | " << format_fixed(100.0 * m.accuracy, 2);
        if (m.delta_accuracy) {
            os << " (" << detail::format_signed(100.0 * *m.delta_accuracy, 2) << ")";
        } else {
            os << " (-)";
        }
        os << " | " << std::llround(m.avg_length);
        if (m.reduction_pct) {
            os << " (" << detail::format_signed(-*m.reduction_pct, 2) << "%)";
        } else {
            os << " (-)";
        }
        os << " |\n";
    }
    const ReportSummary summary = summarize(rows);
    os << "| Total / Avg | "
       << (summary.total_delta_accuracy
               ? detail::format_signed(*summary.total_delta_accuracy, 2)
               : std::string("-"))
       << " | "
       << (summary.avg_length_change_pct
               ? detail::format_signed(*summary.avg_length_change_pct, 2) + "%"
               : std::string("-"))
       << " |\n";
    return os.str();
}

/// Flat csv twin of the rendered table. Delta columns are left empty when
/// the row has no baseline.
inline void write_metrics_csv(std::ostream& os, const std::vector<NamedReport>& rows) {
    os << "benchmark,acc,len,delta_acc,delta_len_pct\n";
    for (const NamedReport& row : rows) {
        const MetricsReport& m = row.metrics;
        os << row.benchmark << "," << format_fixed(100.0 * m.accuracy, 2) << ","
           << std::llround(m.avg_length) << ",";
        if (m.delta_accuracy) os << format_fixed(100.0 * *m.delta_accuracy, 2);
        os << ",";
        if (m.reduction_pct) os << format_fixed(-*m.reduction_pct, 2);
        os << "\n";
    }
}

/// Reads an evaluation dump, one item per line:
///   {"item_id": str, "samples": [{"correct": bool, "token_count": int}]}
inline std::vector<EvalRecord> read_eval_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("read_eval_jsonl: cannot open " + path);
    }
    std::vector<EvalRecord> records;
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
        if (!j.contains("item_id") || !j["item_id"].is_string()) {
            throw ParseError(line_no, "record missing string item_id");
        }
        if (!j.contains("samples") || !j["samples"].is_array() || j["samples"].empty()) {
            throw ParseError(line_no, "record has zero samples");
        }
        EvalRecord record;
        record.item_id = j["item_id"].get<std::string>();
        for (const auto& sj : j["samples"]) {
            if (!sj.is_object() || !sj.contains("correct") || !sj["correct"].is_boolean()) {
                throw ParseError(line_no, "sample missing boolean correct");
            }
            if (!sj.contains("token_count") || !sj["token_count"].is_number_integer() ||
                sj["token_count"].get<int>() < 1) {
                throw ParseError(line_no, "sample token_count must be a positive integer");
            }
            record.samples.push_back({sj["correct"].get<bool>(), sj["token_count"].get<int>()});
        }
        records.push_back(std::move(record));
    }
    return records;
}

}  // namespace lcpo::evalharness
