#pragma once

// Central-finite-difference checks for the analytic gradients, shared by
// the Catch2 suite and the acceptance gate. Average-based objectives are
// perturbed on every token at once (so the average moves by h); DPO is
// perturbed on a single token (so the total moves by h).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lcpo/objectives.hpp"

namespace gradcheck {

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// the ratio meaningful when both sides sit in round-off territory.
inline double relative_error(double analytic, double numeric, double floor = 1e-4) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / scale;
}

struct Tuple {
    std::vector<double> chosen;
    std::vector<double> rejected;
    std::vector<double> ref_chosen;
    std::vector<double> ref_rejected;
};

inline std::vector<double> random_tokens(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> len(1, 8);
    std::uniform_real_distribution<double> val(-3.0, -0.02);
    std::vector<double> out(static_cast<size_t>(len(rng)));
    for (double& x : out) x = val(rng);
    return out;
}

inline Tuple random_tuple(std::mt19937_64& rng, bool with_reference) {
    Tuple t;
    t.chosen = random_tokens(rng);
    t.rejected = random_tokens(rng);
    if (with_reference) {
        t.ref_chosen = random_tokens(rng);
        t.ref_rejected = random_tokens(rng);
    }
    return t;
}

inline lcpo::LossResult evaluate(const lcpo::ObjectiveSpec& spec, const Tuple& t) {
    lcpo::LogProbSeq chosen{t.chosen};
    lcpo::LogProbSeq rejected{t.rejected};
    if (spec.kind == lcpo::ObjectiveKind::Dpo) {
        lcpo::LogProbSeq ref_c{t.ref_chosen};
        lcpo::LogProbSeq ref_r{t.ref_rejected};
        return lcpo::evaluate_objective(spec, chosen, rejected, &ref_c, &ref_r);
    }
    return lcpo::evaluate_objective(spec, chosen, rejected);
}

// Shifts the scalar the gradient is taken against by +-h: all tokens for
// average-based objectives, one token for total-based DPO.
inline std::vector<double> perturbed(const std::vector<double>& tokens, double h,
                                     bool totals_mode) {
    std::vector<double> out = tokens;
    if (totals_mode) {
        out[0] += h;
    } else {
        for (double& x : out) x += h;
    }
    return out;
}

struct Report {
    int tuples = 0;
    int gradients = 0;
    double worst = 0.0;
};

/// Draws `tuples` random input tuples and compares every analytic gradient
/// the objective reports against (L(x+h) - L(x-h)) / 2h.
inline Report check_gradients(const lcpo::ObjectiveSpec& spec, int tuples, uint64_t seed,
                              double h = 1e-6) {
    std::mt19937_64 rng(seed);
    const bool totals_mode = spec.kind == lcpo::ObjectiveKind::Dpo;
    const bool chosen_only = spec.kind == lcpo::ObjectiveKind::Sft;

    Report rep;
    for (int i = 0; i < tuples; ++i) {
        Tuple t = random_tuple(rng, totals_mode);
        const lcpo::LossResult full = evaluate(spec, t);

        Tuple plus = t;
        Tuple minus = t;
        plus.chosen = perturbed(t.chosen, h, totals_mode);
        minus.chosen = perturbed(t.chosen, -h, totals_mode);
        const double num_chosen =
            (evaluate(spec, plus).value - evaluate(spec, minus).value) / (2.0 * h);
        rep.worst = std::max(rep.worst, relative_error(full.grad_chosen, num_chosen));
        ++rep.gradients;

        if (!chosen_only) {
            plus = t;
            minus = t;
            plus.rejected = perturbed(t.rejected, h, totals_mode);
            minus.rejected = perturbed(t.rejected, -h, totals_mode);
            const double num_rejected =
                (evaluate(spec, plus).value - evaluate(spec, minus).value) / (2.0 * h);
            rep.worst =
                std::max(rep.worst, relative_error(full.grad_rejected.value(), num_rejected));
            ++rep.gradients;
        }
        ++rep.tuples;
    }
    return rep;
}

}  // namespace gradcheck
