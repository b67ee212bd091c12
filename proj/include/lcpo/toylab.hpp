#pragma once

// A desk-scale differentiable sequence policy and the descent loop that
// optimizes the preference objectives on it. The policy is an order-1
// conditional table (next-token logits per prompt class and previous
// token), so every gradient is hand-derivable and the finite-difference
// suite can hold the backprop to tight tolerances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lcpo/datapipe.hpp"
#include "lcpo/format.hpp"
#include "lcpo/objectives.hpp"
#include "lcpo/rng.hpp"

namespace lcpo::toylab {

using nlohmann::json;

/// Tabular policy with one logit row per (prompt_class, previous_token)
/// context. Token 0 is the end-of-sequence marker and doubles as the
/// start-of-sequence context.
class ToyPolicy {
public:
    static constexpr int kEos = 0;
    static constexpr int kMaxVocab = 64;

    ToyPolicy(int num_classes, int vocab_size)
        : num_classes_(num_classes), vocab_size_(vocab_size) {
        if (num_classes < 1) {
            throw std::invalid_argument("ToyPolicy: num_classes must be >= 1");
        }
        if (vocab_size < 2 || vocab_size > kMaxVocab) {
            throw std::invalid_argument("ToyPolicy: vocab_size must lie in [2, 64]");
        }
        logits_.assign(static_cast<std::size_t>(num_classes) * vocab_size * vocab_size, 0.0);
    }

    int num_classes() const noexcept { return num_classes_; }
    int vocab_size() const noexcept { return vocab_size_; }
    int param_count() const noexcept { return static_cast<int>(logits_.size()); }

    double param(int i) const { return logits_.at(static_cast<std::size_t>(i)); }
    double& param(int i) { return logits_.at(static_cast<std::size_t>(i)); }

    int row_offset(int prompt_class, int prev_token) const {
        check_context(prompt_class, prev_token);
        return (prompt_class * vocab_size_ + prev_token) * vocab_size_;
    }

    /// Temperature-scaled next-token distribution; sums to 1 within 1e-12.
    std::vector<double> probs(int prompt_class, int prev_token, double temperature = 1.0) const {
        if (!(temperature > 0.0)) {
            throw std::invalid_argument("ToyPolicy: temperature must be > 0");
        }
        const int row = row_offset(prompt_class, prev_token);
        const double hi = row_max(row);
        std::vector<double> out(static_cast<std::size_t>(vocab_size_));
        double sum = 0.0;
        for (int v = 0; v < vocab_size_; ++v) {
            out[static_cast<std::size_t>(v)] =
                std::exp((logits_[static_cast<std::size_t>(row + v)] - hi) / temperature);
            sum += out[static_cast<std::size_t>(v)];
        }
        for (double& p : out) p /= sum;
        return out;
    }

    /// Log-probabilities at temperature 1. The max-shift pins the largest
    /// exponent at exactly 1, so the log-sum is non-negative and every
    /// returned entry is <= 0, which is what LogProbSeq requires.
    std::vector<double> log_softmax(int prompt_class, int prev_token) const {
        const int row = row_offset(prompt_class, prev_token);
        const double hi = row_max(row);
        double sum = 0.0;
        for (int v = 0; v < vocab_size_; ++v) {
            sum += std::exp(logits_[static_cast<std::size_t>(row + v)] - hi);
        }
        const double lse = hi + std::log(sum);
        std::vector<double> out(static_cast<std::size_t>(vocab_size_));
        for (int v = 0; v < vocab_size_; ++v) {
            out[static_cast<std::size_t>(v)] = logits_[static_cast<std::size_t>(row + v)] - lse;
        }
        return out;
    }

private:
    void check_context(int prompt_class, int prev_token) const {
        if (prompt_class < 0 || prompt_class >= num_classes_) {
            throw std::out_of_range("ToyPolicy: prompt_class out of range");
        }
        if (prev_token < 0 || prev_token >= vocab_size_) {
            throw std::out_of_range("ToyPolicy: token out of range");
        }
    }

    double row_max(int row) const {
        double hi = logits_[static_cast<std::size_t>(row)];
        for (int v = 1; v < vocab_size_; ++v) {
            hi = std::max(hi, logits_[static_cast<std::size_t>(row + v)]);
        }
        return hi;
    }

    int num_classes_;
    int vocab_size_;
    std::vector<double> logits_;
};

namespace detail {

inline void require_sequence(const ToyPolicy& policy, int prompt_class,
                             const std::vector<int>& tokens, const char* fn) {
    if (prompt_class < 0 || prompt_class >= policy.num_classes()) {
        throw std::out_of_range(std::string(fn) + ": prompt_class out of range");
    }
    if (tokens.empty()) {
        throw std::invalid_argument(std::string(fn) + ": token sequence is empty");
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const int t = tokens[i];
        if (t < 0 || t >= policy.vocab_size()) {
            throw std::out_of_range(std::string(fn) + ": token out of vocabulary");
        }
        if (t == ToyPolicy::kEos && i + 1 != tokens.size()) {
            throw std::invalid_argument(std::string(fn) +
                                        ": end token before the final position");
        }
    }
    if (tokens.back() != ToyPolicy::kEos) {
        throw std::invalid_argument(std::string(fn) + ": sequence must end with the end token");
    }
}

inline std::vector<int> sample_walk(const ToyPolicy& policy, int prompt_class,
                                    double temperature, std::mt19937_64& rng, int max_length) {
    std::vector<int> out;
    int prev = ToyPolicy::kEos;
    while (static_cast<int>(out.size()) < max_length) {
        const auto p = policy.probs(prompt_class, prev, temperature);
        const double u = uniform53(rng);
        int pick = policy.vocab_size() - 1;
        double acc = 0.0;
        for (int v = 0; v < policy.vocab_size(); ++v) {
            acc += p[static_cast<std::size_t>(v)];
            if (u < acc) {
                pick = v;
                break;
            }
        }
        out.push_back(pick);
        if (pick == ToyPolicy::kEos) break;
        prev = pick;
    }
    return out;
}

}  // namespace detail

/// Per-token log-probabilities of a complete response under the policy's
/// chain rule. The sequence must end with the end token and contain it
/// nowhere else.
inline LogProbSeq score_sequence(const ToyPolicy& policy, int prompt_class,
                                 const std::vector<int>& tokens) {
    detail::require_sequence(policy, prompt_class, tokens, "score_sequence");
    std::vector<double> lps;
    lps.reserve(tokens.size());
    int prev = ToyPolicy::kEos;
    for (int t : tokens) {
        lps.push_back(policy.log_softmax(prompt_class, prev)[static_cast<std::size_t>(t)]);
        prev = t;
    }
    return LogProbSeq(std::move(lps));
}

/// Ancestral sampling with temperature-scaled softmax, hard-truncated at
/// max_length tokens. A truncated sequence simply lacks the end token; a
/// completed one counts the end token in its length.
inline std::vector<int> sample(const ToyPolicy& policy, int prompt_class, double temperature,
                               std::uint64_t seed, int max_length = 64) {
    if (max_length < 1) {
        throw std::invalid_argument("sample: max_length must be >= 1");
    }
    std::mt19937_64 rng(seed);
    return detail::sample_walk(policy, prompt_class, temperature, rng, max_length);
}

/// Count-based initial policy: logits are log(count + alpha) over the
/// transitions of the given (prompt_class, tokens) sequences, making each
/// row's softmax the additive-smoothed empirical bigram distribution.
inline ToyPolicy fit_policy(int num_classes, int vocab_size,
                            const std::vector<std::pair<int, std::vector<int>>>& sequences,
                            double alpha = 0.01) {
    if (!(alpha > 0.0)) {
        throw std::invalid_argument("fit_policy: alpha must be > 0");
    }
    ToyPolicy policy(num_classes, vocab_size);
    std::vector<double> counts(static_cast<std::size_t>(policy.param_count()), alpha);
    for (const auto& [cls, tokens] : sequences) {
        detail::require_sequence(policy, cls, tokens, "fit_policy");
        int prev = ToyPolicy::kEos;
        for (int t : tokens) {
            counts[static_cast<std::size_t>(policy.row_offset(cls, prev) + t)] += 1.0;
            prev = t;
        }
    }
    for (int i = 0; i < policy.param_count(); ++i) {
        policy.param(i) = std::log(counts[static_cast<std::size_t>(i)]);
    }
    return policy;
}

struct ClassLengths {
    int prompt_class{};
    std::vector<int> lengths;
};

/// Sampled-length summary: population mean/variance over every sample,
/// counts binned as [i*bin_width, (i+1)*bin_width), and the raw per-class
/// lengths for external plotting.
struct LengthHistogram {
    double mean{};
    double variance{};
    int bin_width{1};
    std::vector<int> bins;
    int total{};
    std::vector<ClassLengths> per_class;
};

/// Samples samples_per_class sequences per prompt class and aggregates
/// their lengths. Each class owns an independent generator derived from
/// the seed, so results do not depend on class listing order.
inline LengthHistogram length_distribution(const ToyPolicy& policy,
                                           const std::vector<int>& prompt_classes,
                                           int samples_per_class, std::uint64_t seed,
                                           double temperature = 1.0, int max_length = 64,
                                           int bin_width = 1) {
    if (prompt_classes.empty()) {
        throw std::invalid_argument("length_distribution: need at least one prompt class");
    }
    if (samples_per_class < 1) {
        throw std::invalid_argument("length_distribution: samples_per_class must be >= 1");
    }
    if (max_length < 1) {
        throw std::invalid_argument("length_distribution: max_length must be >= 1");
    }
    if (bin_width < 1) {
        throw std::invalid_argument("length_distribution: bin_width must be >= 1");
    }
    LengthHistogram hist;
    hist.bin_width = bin_width;
    for (int cls : prompt_classes) {
        std::uint64_t state =
            seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(cls) + 1);
        std::mt19937_64 rng(splitmix64_next(state));
        ClassLengths cl;
        cl.prompt_class = cls;
        for (int s = 0; s < samples_per_class; ++s) {
            const auto tokens = detail::sample_walk(policy, cls, temperature, rng, max_length);
            cl.lengths.push_back(static_cast<int>(tokens.size()));
        }
        hist.per_class.push_back(std::move(cl));
    }
    double sum = 0.0;
    for (const auto& cl : hist.per_class) {
        for (int len : cl.lengths) {
            ++hist.total;
            sum += len;
            const std::size_t bin = static_cast<std::size_t>(len / bin_width);
            if (hist.bins.size() <= bin) hist.bins.resize(bin + 1, 0);
            ++hist.bins[bin];
        }
    }
    hist.mean = sum / static_cast<double>(hist.total);
    double sq = 0.0;
    for (const auto& cl : hist.per_class) {
        for (int len : cl.lengths) {
            const double d = len - hist.mean;
            sq += d * d;
        }
    }
    hist.variance = sq / static_cast<double>(hist.total);
    return hist;
}

/// Fraction of sampled responses that terminate with the expected answer
/// token immediately before the end token. Truncated samples count as
/// incorrect. Seeding follows length_distribution's per-class scheme, so
/// the two measurements see the same draws.
inline double evaluate_accuracy(const ToyPolicy& policy, const std::vector<int>& prompt_classes,
                                const std::vector<int>& answers, int samples_per_class,
                                std::uint64_t seed, double temperature = 1.0,
                                int max_length = 64) {
    if (prompt_classes.empty() || prompt_classes.size() != answers.size()) {
        throw std::invalid_argument("evaluate_accuracy: prompt_classes and answers must align");
    }
    if (samples_per_class < 1) {
        throw std::invalid_argument("evaluate_accuracy: samples_per_class must be >= 1");
    }
    long correct = 0;
    long total = 0;
    for (std::size_t i = 0; i < prompt_classes.size(); ++i) {
        const int cls = prompt_classes[i];
        const int ans = answers[i];
        if (ans <= 0 || ans >= policy.vocab_size()) {
            throw std::invalid_argument("evaluate_accuracy: answer token out of vocabulary");
        }
        std::uint64_t state =
            seed + 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(cls) + 1);
        std::mt19937_64 rng(splitmix64_next(state));
        for (int s = 0; s < samples_per_class; ++s) {
            const auto tokens = detail::sample_walk(policy, cls, temperature, rng, max_length);
            ++total;
            if (tokens.size() >= 2 && tokens.back() == ToyPolicy::kEos &&
                tokens[tokens.size() - 2] == ans) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(total);
}

/// Descent-loop settings. Defaults mirror the published regime: 50 steps,
/// equivalent batch 8, sampling temperature 0.6. steps = 0 is allowed and
/// leaves the policy untouched.
struct TrainConfig {
    ObjectiveSpec objective{};
    double learning_rate{0.5};
    int steps{50};
    int batch_size{8};
    std::uint64_t seed{0};
    double temperature{0.6};
    int max_sample_length{64};

    void validate() const {
        objective.validate();
        if (!(learning_rate > 0.0)) {
            throw std::invalid_argument("TrainConfig: learning_rate must be > 0");
        }
        if (steps < 0) {
            throw std::invalid_argument("TrainConfig: steps must be >= 0");
        }
        if (batch_size < 1) {
            throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
        }
        if (!(temperature > 0.0)) {
            throw std::invalid_argument("TrainConfig: temperature must be > 0");
        }
        if (max_sample_length < 1) {
            throw std::invalid_argument("TrainConfig: max_sample_length must be >= 1");
        }
    }
};

struct TrainTrace {
    std::vector<double> losses;
    std::vector<double> margin_means;
    LengthHistogram initial_lengths;
    LengthHistogram final_lengths;
};

namespace detail {

/// Adds scale * d(log p of the sequence)/d(logits) to grad. Each visited
/// row receives scale * (one_hot(next) - softmax(row)).
inline void accumulate_sequence_grad(const ToyPolicy& policy, int prompt_class,
                                     const std::vector<int>& tokens, double scale,
                                     std::vector<double>& grad) {
    int prev = ToyPolicy::kEos;
    for (int t : tokens) {
        const auto pi = policy.probs(prompt_class, prev);
        const std::size_t row = static_cast<std::size_t>(policy.row_offset(prompt_class, prev));
        for (int v = 0; v < policy.vocab_size(); ++v) {
            grad[row + static_cast<std::size_t>(v)] +=
                scale * ((v == t ? 1.0 : 0.0) - pi[static_cast<std::size_t>(v)]);
        }
        prev = t;
    }
}

/// DPO differentiates the summed log-probability, the others the average.
inline double loss_token_scale(const ObjectiveSpec& spec, double grad_wrt_seq, int length) {
    return spec.kind == ObjectiveKind::Dpo ? grad_wrt_seq
                                           : grad_wrt_seq / static_cast<double>(length);
}

/// The per-pair quantity traced as "margin": the argument of each
/// objective's preference sigmoid where one exists, the odds reward for
/// plain NLL, and the probability gap for the one objective without a
/// sigmoid form.
inline double trace_margin(const ObjectiveSpec& spec, const LossResult& res) {
    switch (spec.kind) {
        case ObjectiveKind::Sft:
            return logit(res.aux.at("p_w"));
        case ObjectiveKind::SimPer:
            return res.aux.at("p_w") - res.aux.at("p_l");
        case ObjectiveKind::Orpo:
            return res.aux.at("z");
        default:
            return res.aux.at("margin");
    }
}

inline void fisher_yates(std::vector<int>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const std::size_t j =
            static_cast<std::size_t>(uniform53(rng) * static_cast<double>(i));
        std::swap(order[i - 1], order[j]);
    }
}

}  // namespace detail

/// Plain gradient descent over the configured objective. Mini-batch order
/// is a seeded permutation refreshed each epoch; when batch_size covers
/// the corpus the order is fixed and every step is full-batch. DPO scores
/// its reference sequences once against a frozen copy of the initial
/// policy. Initial and final length statistics reuse the same derived
/// seed, so steps = 0 reproduces identical histograms.
inline std::pair<ToyPolicy, TrainTrace> train(const ToyPolicy& policy,
                                              const std::vector<datapipe::PreferencePair>& pairs,
                                              const TrainConfig& config) {
    config.validate();
    if (pairs.empty()) {
        throw std::invalid_argument("train: need at least one pair");
    }

    struct Item {
        int cls;
        std::vector<int> chosen;
        std::vector<int> rejected;
    };
    std::vector<Item> items;
    items.reserve(pairs.size());
    std::vector<int> classes;
    for (const auto& p : pairs) {
        if (!p.chosen.token_ids || !p.rejected.token_ids) {
            throw std::invalid_argument("train: pairs must carry token_ids on both responses");
        }
        if (!p.prompt_class) {
            throw std::invalid_argument("train: pairs must carry prompt_class");
        }
        Item it{*p.prompt_class, *p.chosen.token_ids, *p.rejected.token_ids};
        detail::require_sequence(policy, it.cls, it.chosen, "train");
        detail::require_sequence(policy, it.cls, it.rejected, "train");
        classes.push_back(it.cls);
        items.push_back(std::move(it));
    }
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

    std::uint64_t seed_state = config.seed;
    const std::uint64_t shuffle_seed = splitmix64_next(seed_state);
    const std::uint64_t stats_seed = splitmix64_next(seed_state);

    constexpr int kStatsSamplesPerClass = 64;
    TrainTrace trace;
    trace.initial_lengths =
        length_distribution(policy, classes, kStatsSamplesPerClass, stats_seed,
                            config.temperature, config.max_sample_length);

    const bool is_dpo = config.objective.kind == ObjectiveKind::Dpo;
    std::vector<LogProbSeq> ref_chosen;
    std::vector<LogProbSeq> ref_rejected;
    if (is_dpo) {
        ref_chosen.reserve(items.size());
        ref_rejected.reserve(items.size());
        for (const auto& it : items) {
            ref_chosen.push_back(score_sequence(policy, it.cls, it.chosen));
            ref_rejected.push_back(score_sequence(policy, it.cls, it.rejected));
        }
    }

    ToyPolicy current = policy;
    const int n = static_cast<int>(items.size());
    const int batch = std::min(config.batch_size, n);
    const bool full_batch = batch == n;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(shuffle_seed);
    int cursor = n;

    std::vector<double> grad(static_cast<std::size_t>(current.param_count()));
    for (int step = 0; step < config.steps; ++step) {
        if (!full_batch && cursor + batch > n) {
            detail::fisher_yates(order, shuffle_rng);
            cursor = 0;
        }
        std::fill(grad.begin(), grad.end(), 0.0);
        double loss_sum = 0.0;
        double margin_sum = 0.0;
        for (int b = 0; b < batch; ++b) {
            const int src = order[static_cast<std::size_t>(full_batch ? b : cursor + b)];
            const Item& it = items[static_cast<std::size_t>(src)];
            const LogProbSeq chosen = score_sequence(current, it.cls, it.chosen);
            const LogProbSeq rejected = score_sequence(current, it.cls, it.rejected);
            const LossResult res =
                is_dpo ? evaluate_objective(config.objective, chosen, rejected,
                                            &ref_chosen[static_cast<std::size_t>(src)],
                                            &ref_rejected[static_cast<std::size_t>(src)])
                       : evaluate_objective(config.objective, chosen, rejected);
            loss_sum += res.value;
            margin_sum += detail::trace_margin(config.objective, res);
            detail::accumulate_sequence_grad(
                current, it.cls, it.chosen,
                detail::loss_token_scale(config.objective, res.grad_chosen, chosen.length()),
                grad);
            if (res.grad_rejected) {
                detail::accumulate_sequence_grad(
                    current, it.cls, it.rejected,
                    detail::loss_token_scale(config.objective, *res.grad_rejected,
                                             rejected.length()),
                    grad);
            }
        }
        const double inv = 1.0 / static_cast<double>(batch);
        for (int i = 0; i < current.param_count(); ++i) {
            current.param(i) -= config.learning_rate * grad[static_cast<std::size_t>(i)] * inv;
        }
        trace.losses.push_back(loss_sum * inv);
        trace.margin_means.push_back(margin_sum * inv);
        if (!full_batch) cursor += batch;
    }

    trace.final_lengths =
        length_distribution(current, classes, kStatsSamplesPerClass, stats_seed,
                            config.temperature, config.max_sample_length);
    return {std::move(current), std::move(trace)};
}

/// Compares the analytic parameter gradient of one pair's loss against
/// central finite differences on every parameter the pair touches, i.e.
/// every entry of every (class, previous-token) row either sequence
/// visits. Returns the maximum relative error with the scale floored at
/// 1e-3, so near-zero gradients are compared absolutely. The floor sits
/// above the difference-quotient noise of total-based losses: when a
/// transition cancels exactly between the two sequences the true gradient
/// is 0, while re-evaluating the loss leaves rounding residue of order
/// 1e-15 that the division by 2h inflates to ~1e-9.
inline double finite_diff_check(const ToyPolicy& policy, const datapipe::PreferencePair& pair,
                                const ObjectiveSpec& objective, double h = 1e-6) {
    if (!(h > 1e-8 && h < 1e-3)) {
        throw std::invalid_argument("finite_diff_check: h must lie in (1e-8, 1e-3)");
    }
    objective.validate();
    if (!pair.chosen.token_ids || !pair.rejected.token_ids || !pair.prompt_class) {
        throw std::invalid_argument(
            "finite_diff_check: pair must carry token_ids and prompt_class");
    }
    const int cls = *pair.prompt_class;
    const std::vector<int>& chosen = *pair.chosen.token_ids;
    const std::vector<int>& rejected = *pair.rejected.token_ids;
    detail::require_sequence(policy, cls, chosen, "finite_diff_check");
    detail::require_sequence(policy, cls, rejected, "finite_diff_check");

    const bool is_dpo = objective.kind == ObjectiveKind::Dpo;
    std::optional<LogProbSeq> ref_c;
    std::optional<LogProbSeq> ref_r;
    if (is_dpo) {
        ref_c = score_sequence(policy, cls, chosen);
        ref_r = score_sequence(policy, cls, rejected);
    }
    const auto loss_at = [&](const ToyPolicy& p) {
        const LogProbSeq c = score_sequence(p, cls, chosen);
        const LogProbSeq r = score_sequence(p, cls, rejected);
        return (is_dpo ? evaluate_objective(objective, c, r, &*ref_c, &*ref_r)
                       : evaluate_objective(objective, c, r))
            .value;
    };

    std::vector<double> grad(static_cast<std::size_t>(policy.param_count()), 0.0);
    {
        const LogProbSeq c = score_sequence(policy, cls, chosen);
        const LogProbSeq r = score_sequence(policy, cls, rejected);
        const LossResult res = is_dpo
                                   ? evaluate_objective(objective, c, r, &*ref_c, &*ref_r)
                                   : evaluate_objective(objective, c, r);
        detail::accumulate_sequence_grad(
            policy, cls, chosen,
            detail::loss_token_scale(objective, res.grad_chosen, c.length()), grad);
        if (res.grad_rejected) {
            detail::accumulate_sequence_grad(
                policy, cls, rejected,
                detail::loss_token_scale(objective, *res.grad_rejected, r.length()), grad);
        }
    }

    // The softmax couples every entry of a visited row, so all vocab_size
    // entries of each such row are candidates.
    std::set<int> rows;
    for (const auto* seq : {&chosen, &rejected}) {
        int prev = ToyPolicy::kEos;
        for (int t : *seq) {
            rows.insert(policy.row_offset(cls, prev));
            prev = t;
        }
    }

    double worst = 0.0;
    ToyPolicy probe = policy;
    for (int row : rows) {
        for (int v = 0; v < policy.vocab_size(); ++v) {
            const int i = row + v;
            const double saved = probe.param(i);
            probe.param(i) = saved + h;
            const double up = loss_at(probe);
            probe.param(i) = saved - h;
            const double down = loss_at(probe);
            probe.param(i) = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = grad[static_cast<std::size_t>(i)];
            const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
            worst = std::max(worst, std::abs(analytic - numeric) / scale);
        }
    }
    return worst;
}

inline constexpr int kSyntheticVocab = 13;  // end token + 4 answers + two 4-token filler cycles
inline constexpr int kSyntheticAnswerCount = 4;
inline constexpr int kSyntheticFillerBase = 5;

/// Ground truth bundled with generated rollouts: answers[c] is the token a
/// correct response for prompt class c emits right before the end token.
struct SyntheticCorpus {
    std::vector<datapipe::RolloutRecord> records;
    std::vector<int> answers;
};

/// Rollout corpus with a short and a long response family per prompt.
/// The short family walks the direct filler cycle 5,6,7,8 once or twice
/// before answering; the long family loops the disjoint cycle 9,10,11,12
/// many times first. Both families are near-deterministic token paths, so
/// a fitted policy assigns them high per-token probability, and the long
/// family's higher length-normalized probability gives the odds-reward
/// margin its characteristic negative starting point. 70% of the classes
/// answer correctly on every sample and land in the easy split; the rest
/// alternate correct and incorrect answers across both families, giving
/// intermediate pass rates. Every class contains at least one short
/// correct and one long correct response. Lengths jitter by up to two
/// tokens around the requested family size.
inline SyntheticCorpus make_synthetic_corpus(int prompt_classes, int short_len, int long_len,
                                             std::uint64_t seed, int samples_per_class = 16) {
    if (prompt_classes < 1) {
        throw std::invalid_argument("make_synthetic_corpus: prompt_classes must be >= 1");
    }
    if (short_len < 2) {
        throw std::invalid_argument("make_synthetic_corpus: short_len must be >= 2");
    }
    if (!(short_len < long_len)) {
        throw std::invalid_argument("make_synthetic_corpus: short_len must be < long_len");
    }
    if (samples_per_class < 4) {
        throw std::invalid_argument("make_synthetic_corpus: need >= 4 samples per class");
    }

    std::mt19937_64 rng(seed);
    SyntheticCorpus corpus;
    corpus.records.reserve(static_cast<std::size_t>(prompt_classes));
    for (int c = 0; c < prompt_classes; ++c) {
        const int answer = 1 + c % kSyntheticAnswerCount;
        corpus.answers.push_back(answer);
        const bool all_correct = c % 10 < 7;
        std::vector<datapipe::OutputSample> outputs;
        outputs.reserve(static_cast<std::size_t>(samples_per_class));
        for (int j = 0; j < samples_per_class; ++j) {
            const bool take_short = j % 2 == 0;
            const bool correct = all_correct || j % 4 < 2;
            const int base = take_short ? short_len : long_len;
            const int jitter = static_cast<int>(uniform53(rng) * 5.0) - 2;
            const int len = std::max(2, base + jitter);
            const int cycle_base = kSyntheticFillerBase + (take_short ? 0 : 4);
            std::vector<int> tokens;
            tokens.reserve(static_cast<std::size_t>(len));
            for (int t = 0; t + 2 < len; ++t) {
                tokens.push_back(cycle_base + t % 4);
            }
            int emitted = answer;
            if (!correct) {
                const int shift = 1 + static_cast<int>(uniform53(rng) * 3.0);
                emitted = 1 + (c + shift) % kSyntheticAnswerCount;
            }
            tokens.push_back(emitted);
            tokens.push_back(ToyPolicy::kEos);
            datapipe::OutputSample out;
            out.token_count = len;
            out.correct = correct;
            out.token_ids = std::move(tokens);
            outputs.push_back(std::move(out));
        }
        datapipe::RolloutRecord rec = datapipe::make_record(
            "q-" + std::to_string(c), "class " + std::to_string(c), std::move(outputs));
        rec.prompt_class = c;
        corpus.records.push_back(std::move(rec));
    }
    return corpus;
}

inline json policy_to_json(const ToyPolicy& policy) {
    json j;
    j["num_classes"] = policy.num_classes();
    j["vocab_size"] = policy.vocab_size();
    json table = json::array();
    for (int i = 0; i < policy.param_count(); ++i) {
        table.push_back(policy.param(i));
    }
    j["logits"] = std::move(table);
    return j;
}

inline ToyPolicy policy_from_json(const json& j) {
    if (!j.is_object() || !j.contains("num_classes") || !j["num_classes"].is_number_integer() ||
        !j.contains("vocab_size") || !j["vocab_size"].is_number_integer() ||
        !j.contains("logits") || !j["logits"].is_array()) {
        throw std::invalid_argument("policy_from_json: malformed policy document");
    }
    ToyPolicy policy(j["num_classes"].get<int>(), j["vocab_size"].get<int>());
    const auto& table = j["logits"];
    if (static_cast<int>(table.size()) != policy.param_count()) {
        throw std::invalid_argument("policy_from_json: logits size does not match shape");
    }
    for (int i = 0; i < policy.param_count(); ++i) {
        const auto& v = table[static_cast<std::size_t>(i)];
        if (!v.is_number()) {
            throw std::invalid_argument("policy_from_json: logits entries must be numbers");
        }
        policy.param(i) = v.get<double>();
    }
    return policy;
}

inline void write_trace_csv(std::ostream& os, const TrainTrace& trace) {
    os << "step,loss,margin_mean\n";
    for (std::size_t i = 0; i < trace.losses.size(); ++i) {
        os << (i + 1) << ',' << format_fixed(trace.losses[i], 6) << ','
           << format_fixed(trace.margin_means[i], 6) << '\n';
    }
}

inline void write_lengths_csv(std::ostream& os, const LengthHistogram& pre,
                              const LengthHistogram& post) {
    os << "phase,prompt_class,length\n";
    const auto emit = [&os](const char* phase, const LengthHistogram& hist) {
        for (const auto& cl : hist.per_class) {
            for (int len : cl.lengths) {
                os << phase << ',' << cl.prompt_class << ',' << len << '\n';
            }
        }
    };
    emit("pre", pre);
    emit("post", post);
}

}  // namespace lcpo::toylab
