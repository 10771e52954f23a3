#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdat/experiments/model_config.hpp"

namespace mdat::experiments {

/// Small configurations used for finite-difference checks.
model::MdatConfig gradcheck_mdat_config();
baseline::BaselineConfig gradcheck_baseline_config();

/// Analytic 64-bit and 32-bit gradients against extended-precision central
/// differences. err64/err32 are the worst per-tensor relative errors
/// ||a - n|| / (||a|| + ||n||); the entry_* fields give the worst single
/// entry, which is unbounded for entries whose true gradient is near zero.
struct GradientCase {
  std::string name;
  double err64 = 0.0;
  double err32 = 0.0;
  std::string worst_tensor;
  double entry64 = 0.0;
  double entry32 = 0.0;
  std::size_t entries = 0;
  std::size_t kinks_skipped = 0;
};

inline constexpr double kGradEps = 1e-4;
inline constexpr double kTol64 = 1e-5;
inline constexpr double kTol32 = 1e-3;

/// Cross-entropy (plus penalty) of one random input and label, drawn from
/// `seed`, with parameters initialized from `seed`; dropout off.
GradientCase check_model_gradients(const std::string& name, const ModelConfig& config,
                                   std::uint64_t seed);

/// Ablation models 1-7 at the small check dimensions, keeping the attention
/// settings (co-attention mode, slope, masking) of `style`.
std::vector<GradientCase> ablation_gradient_checks(const model::MdatConfig& style,
                                                   std::uint64_t seed, std::size_t jobs = 1);

/// Models 1-7 with default settings, then the baseline.
std::vector<GradientCase> run_gradient_suite(std::uint64_t seed, std::size_t jobs = 1);

bool passes(const GradientCase& c);

}  // namespace mdat::experiments
