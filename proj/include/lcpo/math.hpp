#pragma once

// Scalar kernels shared by the preference objectives and the convergence
// analysis. Everything is IEEE double; the identity tests in this project
// assert at 1e-12, which these formulations are chosen to survive.

#include <algorithm>
#include <cmath>

namespace lcpo {

// Sequence-level probabilities are clamped to [kProbClamp, 1 - kProbClamp]
// so log-odds stay finite. Saturation is deterministic and documented
// instead of propagating infinities.
inline constexpr double kProbClamp = 1e-12;

/// log(1 + e^x) with the usual overflow-safe branch.
inline double softplus(double x) {
    if (x > 0.0) {
        return x + std::log1p(std::exp(-x));
    }
    return std::log1p(std::exp(x));
}

/// -log(sigmoid(x)), computed as softplus(-x). The naive form underflows
/// once |x| passes ~37 in double precision.
inline double neg_log_sigmoid(double x) { return softplus(-x); }

inline double sigmoid(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// log(p / (1 - p)). The log(p) - log1p(-p) split keeps the
/// -log(sigmoid(logit(p))) == -log(p) identity tight across (1e-6, 1-1e-6).
inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double clamp_prob(double p) {
    return std::clamp(p, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace lcpo
