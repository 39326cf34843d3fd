#pragma once

#include <cstdint>
#include <string>

#include "elberto/objectives.hpp"

namespace elberto::gradcheck {

struct GradCheckResult {
    double max_rel_error = 0.0;
    int n_checked = 0;
    std::string worst_tensor;
    int worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    double loss = 0.0;
};

// Central finite differences against the analytic gradient of the full joint
// loss (all six heads), double precision, dropout off. Samples n_samples
// parameters uniformly across every tensor. Relative error uses
// |a - f| / max(|a|, |f|, 1e-5); the floor sits above the h=1e-5 rounding
// noise so zero-gradient parameters compare as zero.
GradCheckResult run(const model::EncoderConfig& config, const objectives::LossWeights& weights,
                    uint64_t seed, int n_samples, double h);

// The 2-layer d_model=16 configuration the gradcheck CLI defaults to.
model::EncoderConfig toy_config();

}  // namespace elberto::gradcheck
