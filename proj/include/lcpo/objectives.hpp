#pragma once

// Loss values and analytic gradients for six preference-optimization
// objectives, all expressed over sequence log-probabilities.
//
// Conventions used throughout:
//   a(y)  average per-token log-probability of a response
//   p(y)  clamp(exp(a(y)))        sequence-level probability
//   r(y)  logit(p(y))             odds reward of a response
//
// DPO consumes total (summed) log-probabilities and its gradients are with
// respect to those totals. Every other objective consumes a(y) and reports
// gradients with respect to a(y); the per-token gradient is the reported
// value scaled by 1/|y|.

#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "lcpo/math.hpp"

namespace lcpo {

enum class ObjectiveKind { Sft, Dpo, SimPo, SimPer, Orpo, Lcpo };

inline const char* objective_name(ObjectiveKind kind) {
    switch (kind) {
        case ObjectiveKind::Sft: return "sft";
        case ObjectiveKind::Dpo: return "dpo";
        case ObjectiveKind::SimPo: return "simpo";
        case ObjectiveKind::SimPer: return "simper";
        case ObjectiveKind::Orpo: return "orpo";
        case ObjectiveKind::Lcpo: return "lcpo";
    }
    return "unknown";
}

inline std::optional<ObjectiveKind> parse_objective(std::string_view name) {
    if (name == "sft") return ObjectiveKind::Sft;
    if (name == "dpo") return ObjectiveKind::Dpo;
    if (name == "simpo") return ObjectiveKind::SimPo;
    if (name == "simper") return ObjectiveKind::SimPer;
    if (name == "orpo") return ObjectiveKind::Orpo;
    if (name == "lcpo") return ObjectiveKind::Lcpo;
    return std::nullopt;
}

/// Per-token natural-log probabilities of one sampled response. Sequences
/// are non-empty and every entry is <= 0; both are enforced on construction.
class LogProbSeq {
public:
    explicit LogProbSeq(std::vector<double> token_logprobs)
        : logprobs_(std::move(token_logprobs)) {
        if (logprobs_.empty()) {
            throw std::domain_error("LogProbSeq: sequence must contain at least one token");
        }
        for (double lp : logprobs_) {
            if (!(lp <= 0.0)) {  // the negated form also rejects NaN
                throw std::domain_error("LogProbSeq: token log-probabilities must be <= 0");
            }
        }
    }

    const std::vector<double>& token_logprobs() const noexcept { return logprobs_; }
    int length() const noexcept { return static_cast<int>(logprobs_.size()); }

private:
    std::vector<double> logprobs_;
};

inline double total_logprob(const LogProbSeq& seq) {
    const auto& lp = seq.token_logprobs();
    return std::accumulate(lp.begin(), lp.end(), 0.0);
}

inline double avg_logprob(const LogProbSeq& seq) {
    return total_logprob(seq) / static_cast<double>(seq.length());
}

/// Sequence probability p(y) = exp(a(y)), clamped away from {0, 1}.
inline double seq_prob(const LogProbSeq& seq) {
    return clamp_prob(std::exp(avg_logprob(seq)));
}

/// Odds reward r(y) = log(p / (1 - p)) of the sequence probability.
inline double odds_reward(const LogProbSeq& seq) {
    return logit(seq_prob(seq));
}

/// Hyper-parameters for one objective. Only the fields the chosen kind
/// reads are meaningful; defaults_for() fills in the published weights.
struct ObjectiveSpec {
    ObjectiveKind kind{ObjectiveKind::Lcpo};
    double beta{1.0};
    double gamma{0.0};
    double lambda{0.3};
    double margin_epsilon{0.0};

    bool needs_reference() const { return kind == ObjectiveKind::Dpo; }

    void validate() const {
        if (!(beta > 0.0)) {
            throw std::invalid_argument("ObjectiveSpec: beta must be > 0");
        }
        if (!(lambda > 0.0)) {
            throw std::invalid_argument("ObjectiveSpec: lambda must be > 0");
        }
        if (!(gamma >= 0.0)) {
            throw std::invalid_argument("ObjectiveSpec: gamma must be >= 0");
        }
        if (!std::isfinite(margin_epsilon)) {
            throw std::invalid_argument("ObjectiveSpec: margin_epsilon must be finite");
        }
    }

    static ObjectiveSpec defaults_for(ObjectiveKind kind) {
        ObjectiveSpec spec;
        spec.kind = kind;
        switch (kind) {
            case ObjectiveKind::Sft:
                break;
            case ObjectiveKind::Dpo:
                spec.beta = 1.0;
                break;
            case ObjectiveKind::SimPo:
                spec.beta = 2.0;
                spec.gamma = 0.5;
                break;
            case ObjectiveKind::SimPer:
                break;
            case ObjectiveKind::Orpo:
                spec.lambda = 0.2;
                break;
            case ObjectiveKind::Lcpo:
                spec.lambda = 0.3;
                break;
        }
        return spec;
    }
};

/// One loss evaluation. Gradients follow the normalization convention in
/// the header comment: with respect to total log-probabilities for DPO,
/// with respect to average log-probabilities otherwise. `aux` carries the
/// named intermediates (p_w, p_l, r_w, r_l, z, margin) each kind produces.
struct LossResult {
    double value{};
    double grad_chosen{};
    std::optional<double> grad_rejected{};
    std::map<std::string, double> aux{};
};

namespace detail {

inline void require_kind(const ObjectiveSpec& spec, ObjectiveKind expected,
                         const char* fn) {
    if (spec.kind != expected) {
        throw std::invalid_argument(std::string(fn) + ": spec.kind does not match");
    }
    spec.validate();
}

}  // namespace detail

/// -a(y_w): negative average log-probability of the chosen response,
/// equivalently -log(p_w) up to clamping.
inline LossResult sft_loss(const LogProbSeq& chosen) {
    LossResult out;
    out.value = -avg_logprob(chosen);
    out.grad_chosen = -1.0;
    out.aux["p_w"] = seq_prob(chosen);
    return out;
}

/// -log(sigmoid(beta * (policy margin - reference margin))) over total
/// log-probabilities. Gradients are with respect to the policy totals.
inline LossResult dpo_loss(const LogProbSeq& chosen, const LogProbSeq& rejected,
                           const LogProbSeq& ref_chosen, const LogProbSeq& ref_rejected,
                           const ObjectiveSpec& spec) {
    detail::require_kind(spec, ObjectiveKind::Dpo, "dpo_loss");
    const double policy_gap = total_logprob(chosen) - total_logprob(rejected);
    const double ref_gap = total_logprob(ref_chosen) - total_logprob(ref_rejected);
    const double margin = spec.beta * (policy_gap - ref_gap);

    LossResult out;
    out.value = neg_log_sigmoid(margin);
    const double slope = spec.beta * sigmoid(-margin);
    out.grad_chosen = -slope;
    out.grad_rejected = slope;
    out.aux["margin"] = margin;
    return out;
}

/// beta * (log p_policy(y) - log p_ref(y)) over totals: the implicit reward
/// DPO assigns a single response.
inline double dpo_implicit_reward(const LogProbSeq& policy, const LogProbSeq& reference,
                                  double beta) {
    if (!(beta > 0.0)) {
        throw std::invalid_argument("dpo_implicit_reward: beta must be > 0");
    }
    return beta * (total_logprob(policy) - total_logprob(reference));
}

/// -log(sigmoid(beta * a_w - beta * a_l - gamma)): reference-free margin
/// loss over average log-probabilities.
inline LossResult simpo_loss(const LogProbSeq& chosen, const LogProbSeq& rejected,
                             const ObjectiveSpec& spec) {
    detail::require_kind(spec, ObjectiveKind::SimPo, "simpo_loss");
    const double margin = spec.beta * (avg_logprob(chosen) - avg_logprob(rejected)) - spec.gamma;

    LossResult out;
    out.value = neg_log_sigmoid(margin);
    const double slope = spec.beta * sigmoid(-margin);
    out.grad_chosen = -slope;
    out.grad_rejected = slope;
    out.aux["margin"] = margin;
    return out;
}

/// -exp(a_w) + exp(a_l) = -p_w + p_l. The one objective here with no
/// log-sigmoid form; its value goes negative once p_w > p_l.
inline LossResult simper_loss(const LogProbSeq& chosen, const LogProbSeq& rejected) {
    const double p_w = seq_prob(chosen);
    const double p_l = seq_prob(rejected);

    LossResult out;
    out.value = -p_w + p_l;
    out.grad_chosen = -p_w;
    out.grad_rejected = p_l;
    out.aux["p_w"] = p_w;
    out.aux["p_l"] = p_l;
    return out;
}

namespace detail {

struct OddsPair {
    double p_w, p_l, r_w, r_l, z;
};

inline OddsPair odds_pair(const LogProbSeq& chosen, const LogProbSeq& rejected) {
    OddsPair o;
    o.p_w = seq_prob(chosen);
    o.p_l = seq_prob(rejected);
    o.r_w = logit(o.p_w);
    o.r_l = logit(o.p_l);
    o.z = o.r_w - o.r_l;
    return o;
}

inline void stamp(LossResult& out, const OddsPair& o) {
    out.aux["p_w"] = o.p_w;
    out.aux["p_l"] = o.p_l;
    out.aux["r_w"] = o.r_w;
    out.aux["r_l"] = o.r_l;
    out.aux["z"] = o.z;
}

}  // namespace detail

/// -log(p_w) + lambda * (-log(sigmoid(z))) with z = r_w - r_l: supervised
/// term plus odds-ratio penalty. Decomposes exactly into sft_loss plus
/// lcpo_loss at the same lambda (and margin_epsilon 0) because all three
/// share the same p / r computations.
inline LossResult orpo_loss(const LogProbSeq& chosen, const LogProbSeq& rejected,
                            const ObjectiveSpec& spec) {
    detail::require_kind(spec, ObjectiveKind::Orpo, "orpo_loss");
    const auto o = detail::odds_pair(chosen, rejected);

    LossResult out;
    out.value = -std::log(o.p_w) + spec.lambda * neg_log_sigmoid(o.z);
    // d r / d a = 1 / (1 - p) via the chain rule through p = exp(a).
    const double pen = spec.lambda * sigmoid(-o.z);
    out.grad_chosen = -1.0 - pen / (1.0 - o.p_w);
    out.grad_rejected = pen / (1.0 - o.p_l);
    detail::stamp(out, o);
    return out;
}

/// lambda * (-log(sigmoid(r_w - r_l + margin_epsilon))): the odds-reward
/// preference loss alone, without any supervised term.
inline LossResult lcpo_loss(const LogProbSeq& chosen, const LogProbSeq& rejected,
                            const ObjectiveSpec& spec) {
    detail::require_kind(spec, ObjectiveKind::Lcpo, "lcpo_loss");
    const auto o = detail::odds_pair(chosen, rejected);
    const double margin = o.z + spec.margin_epsilon;

    LossResult out;
    out.value = spec.lambda * neg_log_sigmoid(margin);
    const double pen = spec.lambda * sigmoid(-margin);
    out.grad_chosen = -pen / (1.0 - o.p_w);
    out.grad_rejected = pen / (1.0 - o.p_l);
    detail::stamp(out, o);
    out.aux["margin"] = margin;
    return out;
}

/// Both sides of the identity -log(sigmoid(logit(p))) == -log(p) evaluated
/// on one sequence. It is what lets a plain NLL term be read as a
/// Bradley-Terry preference against an implicit empty alternative.
struct NllBtValue {
    double bt_side;   // -log(sigmoid(odds_reward))
    double nll_side;  // -log(seq_prob)
};

inline NllBtValue nll_bt_value(const LogProbSeq& seq) {
    const double p = seq_prob(seq);
    return NllBtValue{neg_log_sigmoid(logit(p)), -std::log(p)};
}

/// Dispatch on spec.kind. Reference sequences are only read for DPO and
/// must be present there; SFT reads only the chosen side.
inline LossResult evaluate_objective(const ObjectiveSpec& spec, const LogProbSeq& chosen,
                                     const LogProbSeq& rejected,
                                     const LogProbSeq* ref_chosen = nullptr,
                                     const LogProbSeq* ref_rejected = nullptr) {
    switch (spec.kind) {
        case ObjectiveKind::Sft:
            return sft_loss(chosen);
        case ObjectiveKind::Dpo:
            if (ref_chosen == nullptr || ref_rejected == nullptr) {
                throw std::invalid_argument(
                    "evaluate_objective: dpo requires reference sequences");
            }
            return dpo_loss(chosen, rejected, *ref_chosen, *ref_rejected, spec);
        case ObjectiveKind::SimPo:
            return simpo_loss(chosen, rejected, spec);
        case ObjectiveKind::SimPer:
            return simper_loss(chosen, rejected);
        case ObjectiveKind::Orpo:
            return orpo_loss(chosen, rejected, spec);
        case ObjectiveKind::Lcpo:
            return lcpo_loss(chosen, rejected, spec);
    }
    throw std::invalid_argument("evaluate_objective: unknown objective kind");
}

}  // namespace lcpo
