#pragma once

// Convergence analysis for the six objectives, viewed through a common
// Bradley-Terry lens. A preference loss of the form -log(sigmoid(M)) is
// saturated once its margin M exceeds a chosen point m with sigma(m) ~ 1;
// each function here extracts that margin or the condition it implies.

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "lcpo/format.hpp"
#include "lcpo/math.hpp"
#include "lcpo/objectives.hpp"
#include "lcpo/rng.hpp"

namespace lcpo::convergence {

struct ConvergenceConfig {
    double m{5.0};  // saturation point: sigma(m) ~ 0.993
    double lambda{0.3};
    double beta{1.0};
    double gamma{0.5};

    void validate() const {
        if (!(m > 0.0)) {
            throw std::invalid_argument("ConvergenceConfig: m must be > 0");
        }
        if (!(lambda > 0.0)) {
            throw std::invalid_argument("ConvergenceConfig: lambda must be > 0");
        }
        if (!(beta > 0.0)) {
            throw std::invalid_argument("ConvergenceConfig: beta must be > 0");
        }
        if (!(gamma >= 0.0)) {
            throw std::invalid_argument("ConvergenceConfig: gamma must be >= 0");
        }
    }
};

struct ConvergenceReport {
    ObjectiveKind objective{};
    double margin_value{};
    double threshold{};
    bool satisfied{};
    std::string detail;
};

/// Log-probability tuple for bt_margin. Only the pieces the requested
/// objective reads need to be present.
struct MarginInputs {
    LogProbSeq chosen;
    std::optional<LogProbSeq> rejected;
    std::optional<LogProbSeq> ref_chosen;
    std::optional<LogProbSeq> ref_rejected;
};

/// The argument of the sigmoid in the objective's -log(sigmoid(.)) form:
///   SFT    logit(p_w)
///   DPO    beta * (policy total gap - reference total gap)
///   SimPO  beta * a_w - beta * a_l - gamma
///   ORPO   z = r_w - r_l, the argument inside the penalty's sigmoid
///   LCPO   r_w - r_l + margin_epsilon
/// SimPER has no such form (its value can be negative, see
/// simper_no_bt_witness) and is rejected here.
inline double bt_margin(const ObjectiveSpec& objective, const MarginInputs& inputs) {
    objective.validate();
    const auto need_rejected = [&]() -> const LogProbSeq& {
        if (!inputs.rejected) {
            throw std::invalid_argument("bt_margin: rejected sequence required");
        }
        return *inputs.rejected;
    };
    switch (objective.kind) {
        case ObjectiveKind::Sft:
            return odds_reward(inputs.chosen);
        case ObjectiveKind::Dpo: {
            if (!inputs.ref_chosen || !inputs.ref_rejected) {
                throw std::invalid_argument("bt_margin: dpo requires reference sequences");
            }
            const double policy_gap =
                total_logprob(inputs.chosen) - total_logprob(need_rejected());
            const double ref_gap =
                total_logprob(*inputs.ref_chosen) - total_logprob(*inputs.ref_rejected);
            return objective.beta * (policy_gap - ref_gap);
        }
        case ObjectiveKind::SimPo:
            return objective.beta * avg_logprob(inputs.chosen) -
                   objective.beta * avg_logprob(need_rejected()) - objective.gamma;
        case ObjectiveKind::SimPer:
            throw std::domain_error(
                "bt_margin: simper has no log-sigmoid margin (its value can be negative)");
        case ObjectiveKind::Orpo:
            return odds_reward(inputs.chosen) - odds_reward(need_rejected());
        case ObjectiveKind::Lcpo:
            return odds_reward(inputs.chosen) - odds_reward(need_rejected()) +
                   objective.margin_epsilon;
    }
    throw std::invalid_argument("bt_margin: unknown objective kind");
}

/// sigma(m): the minimum sequence-level probability at which a plain NLL
/// term, read as a BT preference, counts as saturated.
inline double sft_saturation_threshold(const ConvergenceConfig& cfg) {
    cfg.validate();
    return sigmoid(cfg.m);
}

/// sigma(m)^(1/length): the geometric-mean per-token probability a
/// length-token response needs for its cumulative product to clear the
/// saturation threshold.
inline double per_token_requirement(const ConvergenceConfig& cfg, int length) {
    cfg.validate();
    if (length < 1) {
        throw std::domain_error("per_token_requirement: length must be >= 1");
    }
    return std::pow(sigmoid(cfg.m), 1.0 / static_cast<double>(length));
}

/// Saturation condition for the odds-ratio penalty:
///   2 * p_w^(1/lambda) > sigma(-m) * (1 - 2*sigma(z - m)),  z = logit gap.
/// Once z > m the right side is negative and the condition holds for any
/// p_w, which is how the penalty can saturate while the chosen response is
/// still under-fit.
inline ConvergenceReport orpo_condition(double p_w, double p_l, const ConvergenceConfig& cfg) {
    cfg.validate();
    if (!(p_w > 0.0 && p_w < 1.0 && p_l > 0.0 && p_l < 1.0)) {
        throw std::domain_error("orpo_condition: probabilities must lie in (0, 1)");
    }
    const double z = logit(p_w) - logit(p_l);
    const double lhs = 2.0 * std::pow(p_w, 1.0 / cfg.lambda);
    const double rhs = sigmoid(-cfg.m) * (1.0 - 2.0 * sigmoid(z - cfg.m));

    ConvergenceReport rep;
    rep.objective = ObjectiveKind::Orpo;
    rep.margin_value = lhs;
    rep.threshold = rhs;
    rep.satisfied = lhs > rhs;

    std::string detail = "z=" + format_fixed(z, 6) + " lhs=2*p_w^(1/lambda)=" +
                         format_fixed(lhs, 6) + " rhs=sigma(-m)*(1-2*sigma(z-m))=" +
                         format_fixed(rhs, 6);
    if (z > cfg.m) {
        detail += "; z > m: rhs negative, holds for any p_w in (0,1)";
    } else {
        detail += "; z <= m: rhs positive, needs p_w > (rhs/2)^lambda = " +
                  format_fixed(std::pow(rhs / 2.0, cfg.lambda), 6);
    }
    detail += "; under-fit branch: (sf/(1+e^m))^(1/lambda) < p_w < p_l, sf in (0,1) free";
    rep.detail = std::move(detail);
    return rep;
}

/// Policy total-log-prob gap DPO needs before its margin reaches m:
/// reference gap plus m / beta.
inline double dpo_margin_floor(double ref_chosen_total, double ref_rejected_total,
                               const ConvergenceConfig& cfg) {
    cfg.validate();
    return (ref_chosen_total - ref_rejected_total) + cfg.m / cfg.beta;
}

/// Average-log-prob gap SimPO needs before its margin reaches m:
/// (gamma + m) / beta.
inline double simpo_margin_floor(const ConvergenceConfig& cfg) {
    cfg.validate();
    return (cfg.gamma + cfg.m) / cfg.beta;
}

struct SimperWitness {
    bool found{};
    double avg_chosen{};
    double avg_rejected{};
    double value{};
    int draws_used{};
};

/// Seeded search for a pair of average log-probs where the SimPER value is
/// negative. -log(sigmoid(.)) is strictly positive, so one negative value
/// witnesses that no margin rewrite of SimPER exists. Any draw with
/// a_w > a_l qualifies, so about half the sample space does.
inline SimperWitness simper_no_bt_witness(int samples, uint64_t seed) {
    if (samples < 1) {
        throw std::invalid_argument("simper_no_bt_witness: samples must be >= 1");
    }
    std::mt19937_64 rng(seed);
    SimperWitness w;
    for (int i = 0; i < samples; ++i) {
        const double a_w = -3.0 + 2.95 * uniform53(rng);
        const double a_l = -3.0 + 2.95 * uniform53(rng);
        const LossResult out = simper_loss(LogProbSeq{{a_w}}, LogProbSeq{{a_l}});
        w.draws_used = i + 1;
        if (out.value < 0.0) {
            w.found = true;
            w.avg_chosen = a_w;
            w.avg_rejected = a_l;
            w.value = out.value;
            break;
        }
    }
    return w;
}

inline void write_reports_csv(std::ostream& os, const std::vector<ConvergenceReport>& rows) {
    os << "objective,margin,threshold,satisfied\n";
    for (const auto& r : rows) {
        os << objective_name(r.objective) << ',' << format_fixed(r.margin_value, 6) << ','
           << format_fixed(r.threshold, 6) << ',' << (r.satisfied ? "true" : "false") << '\n';
    }
}

}  // namespace lcpo::convergence
