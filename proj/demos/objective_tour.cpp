// Walks one preference pair through all six objectives and prints the
// loss values, gradients, and the saturation conditions each objective
// implies. A compact tour of the library surface.

#include <cstdio>

#include "lcpo/convergence.hpp"
#include "lcpo/objectives.hpp"

using namespace lcpo;

int main() {
    // A terse chosen response against a rambling rejected one, as
    // per-token natural-log probabilities.
    const LogProbSeq chosen({-0.2, -0.3, -0.1});
    const LogProbSeq rejected({-0.2, -0.25, -0.3, -0.2, -0.25, -0.3, -0.2, -0.25});

    std::printf("avg logprob: chosen %.4f rejected %.4f\n", avg_logprob(chosen),
                avg_logprob(rejected));
    std::printf("odds reward: chosen %.4f rejected %.4f\n\n", odds_reward(chosen),
                odds_reward(rejected));

    for (const auto kind : {ObjectiveKind::Sft, ObjectiveKind::Dpo, ObjectiveKind::SimPo,
                            ObjectiveKind::SimPer, ObjectiveKind::Orpo, ObjectiveKind::Lcpo}) {
        const ObjectiveSpec spec = ObjectiveSpec::defaults_for(kind);
        // The frozen policy doubles as its own reference, the usual
        // starting state for DPO.
        const LossResult out = evaluate_objective(spec, chosen, rejected, &chosen, &rejected);
        std::printf("%-6s value %9.6f grad_w %9.6f", objective_name(kind), out.value,
                    out.grad_chosen);
        if (out.grad_rejected) std::printf(" grad_l %9.6f", *out.grad_rejected);
        std::printf("\n");
        for (const auto& [key, value] : out.aux) {
            std::printf("       aux %s = %.6f\n", key.c_str(), value);
        }
    }

    convergence::ConvergenceConfig cfg;
    std::printf("\nsaturation at m=%.1f:\n", cfg.m);
    std::printf("  sft needs sequence probability > %.6f\n", sft_saturation_threshold(cfg));
    std::printf("  a 1000-token response needs per-token probability > %.7f\n",
                convergence::per_token_requirement(cfg, 1000));
    std::printf("  simpo (beta=2, gamma=0.5) needs an average-logprob gap > %.4f\n",
                convergence::simpo_margin_floor({cfg.m, cfg.lambda, 2.0, 0.5}));

    const auto witness = convergence::simper_no_bt_witness(10, 7);
    if (witness.found) {
        std::printf("  simper value %.6f < 0 at (%.4f, %.4f): no -log(sigmoid) form exists\n",
                    witness.value, witness.avg_chosen, witness.avg_rejected);
    }
    return 0;
}
