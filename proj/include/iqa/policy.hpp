// SPDX-License-Identifier: Apache-2.0
//
// Linear-softmax policy over the 40-token action vocabulary.
//
// Flat parameter layout (stable, layout_version 1): the 40x52 weight matrix
// W in row-major order (row = action, column = feature) followed by the 40
// biases b, 2120 scalars in total. logits = W * features + b.
#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iqa/rng.hpp"

namespace iqa {

inline constexpr int kNumActions = 40;
inline constexpr int kFeatureDim = 52;
inline constexpr int kNumParams = kNumActions * kFeatureDim + kNumActions;
inline constexpr int kLayoutVersion = 1;

using Features = std::array<double, kFeatureDim>;
using Logits = std::array<double, kNumActions>;

struct PolicyParams {
  std::vector<double> flat = std::vector<double>(kNumParams, 0.0);

  double& weight(int action, int feature) {
    return flat[static_cast<std::size_t>(action) * kFeatureDim + feature];
  }
  double weight(int action, int feature) const {
    return flat[static_cast<std::size_t>(action) * kFeatureDim + feature];
  }
  double& bias(int action) {
    return flat[static_cast<std::size_t>(kNumActions) * kFeatureDim + action];
  }
  double bias(int action) const {
    return flat[static_cast<std::size_t>(kNumActions) * kFeatureDim + action];
  }

  bool all_finite() const;

  friend bool operator==(const PolicyParams&, const PolicyParams&) = default;
};

/// W * features + b. Throws Error(kNonFinite) on non-finite input.
Logits logits(const PolicyParams& params, const Features& features);

Logits log_softmax(const Logits& z);
Logits softmax(const Logits& z);

struct ActionDraw {
  int action = 0;
  double logprob = 0.0;
};

/// Categorical draw from softmax(logits) (temperature 1, top-p 1).
ActionDraw sample(const PolicyParams& params, const Features& features,
                  Rng& rng);
ActionDraw sample_from_logits(const Logits& z, Rng& rng);

/// Argmax decoding; exact ties are broken uniformly with `tie_rng`, which is
/// only consumed when a tie occurs.
ActionDraw greedy(const PolicyParams& params, const Features& features,
                  Rng& tie_rng);

double logprob(const PolicyParams& params, const Features& features,
               int action);

/// d log pi(action | features) / d theta, in the flat layout.
std::vector<double> grad_logprob(const PolicyParams& params,
                                 const Features& features, int action);

/// out += scale * d log pi(action | features) / d theta.
void accumulate_grad_logprob(const PolicyParams& params,
                             const Features& features, int action,
                             double scale, std::span<double> out);

/// KL(softmax(p) || softmax(q)) computed in log space.
double kl_logits(const Logits& p, const Logits& q);

/// KL(pi_p(.|features) || pi_q(.|features)).
double kl_exact(const PolicyParams& params_p, const PolicyParams& params_q,
                const Features& features);

/// out += scale * d KL(pi_theta || pi_ref) / d theta at `features`.
void accumulate_grad_kl(const PolicyParams& params,
                        const PolicyParams& reference,
                        const Features& features, double scale,
                        std::span<double> out);

struct Checkpoint {
  PolicyParams params;
  int step = 0;
  std::string rng_state;
};

/// JSON {layout_version, dims, flat_params, step, rng_state}.
std::string checkpoint_to_json(const Checkpoint& checkpoint);
/// Throws Error(kVersionMismatch) on layout/dims mismatch and Error(kIo) on
/// malformed JSON.
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace iqa
