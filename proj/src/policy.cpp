// SPDX-License-Identifier: Apache-2.0
#include "iqa/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iqa/error.hpp"

namespace iqa {

namespace {

constexpr std::size_t kBiasOffset =
    static_cast<std::size_t>(kNumActions) * kFeatureDim;

double log_sum_exp(const Logits& z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

bool PolicyParams::all_finite() const {
  return std::all_of(flat.begin(), flat.end(),
                     [](double v) { return std::isfinite(v); });
}

Logits logits(const PolicyParams& params, const Features& features) {
  for (double f : features) {
    if (!std::isfinite(f)) {
      throw Error(ErrorCode::kNonFinite, "non-finite policy input feature");
    }
  }
  Logits z{};
  for (int a = 0; a < kNumActions; ++a) {
    const double* row = params.flat.data() + static_cast<std::size_t>(a) *
                                                 kFeatureDim;
    double acc = params.flat[kBiasOffset + a];
    for (int j = 0; j < kFeatureDim; ++j) acc += row[j] * features[j];
    z[a] = acc;
  }
  return z;
}

Logits log_softmax(const Logits& z) {
  const double lse = log_sum_exp(z);
  Logits out{};
  for (int a = 0; a < kNumActions; ++a) out[a] = z[a] - lse;
  return out;
}

Logits softmax(const Logits& z) {
  Logits out = log_softmax(z);
  for (double& v : out) v = std::exp(v);
  return out;
}

ActionDraw sample_from_logits(const Logits& z, Rng& rng) {
  const Logits lp = log_softmax(z);
  const double u = uniform01(rng);
  double cum = 0.0;
  int chosen = kNumActions - 1;
  for (int a = 0; a < kNumActions; ++a) {
    cum += std::exp(lp[a]);
    if (u < cum) {
      chosen = a;
      break;
    }
  }
  // Rounding can leave cum slightly below 1; fall back to the last action
  // with non-negligible mass.
  if (cum <= u) {
    for (int a = kNumActions - 1; a >= 0; --a) {
      if (std::exp(lp[a]) > 0.0) {
        chosen = a;
        break;
      }
    }
  }
  return {chosen, lp[chosen]};
}

ActionDraw sample(const PolicyParams& params, const Features& features,
                  Rng& rng) {
  return sample_from_logits(logits(params, features), rng);
}

ActionDraw greedy(const PolicyParams& params, const Features& features,
                  Rng& tie_rng) {
  const Logits z = logits(params, features);
  const double best = *std::max_element(z.begin(), z.end());
  std::vector<int> ties;
  for (int a = 0; a < kNumActions; ++a) {
    if (z[a] == best) ties.push_back(a);
  }
  int chosen = ties.front();
  if (ties.size() > 1) {
    chosen = ties[tie_rng() % ties.size()];
  }
  return {chosen, log_softmax(z)[chosen]};
}

double logprob(const PolicyParams& params, const Features& features,
               int action) {
  return log_softmax(logits(params, features))[action];
}

void accumulate_grad_logprob(const PolicyParams& params,
                             const Features& features, int action,
                             double scale, std::span<double> out) {
  const Logits p = softmax(logits(params, features));
  for (int a = 0; a < kNumActions; ++a) {
    const double delta = scale * ((a == action ? 1.0 : 0.0) - p[a]);
    if (delta == 0.0) continue;
    double* row = out.data() + static_cast<std::size_t>(a) * kFeatureDim;
    for (int j = 0; j < kFeatureDim; ++j) row[j] += delta * features[j];
    out[kBiasOffset + a] += delta;
  }
}

std::vector<double> grad_logprob(const PolicyParams& params,
                                 const Features& features, int action) {
  std::vector<double> g(kNumParams, 0.0);
  accumulate_grad_logprob(params, features, action, 1.0, g);
  return g;
}

double kl_logits(const Logits& p, const Logits& q) {
  const Logits lp = log_softmax(p);
  const Logits lq = log_softmax(q);
  double kl = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    kl += std::exp(lp[a]) * (lp[a] - lq[a]);
  }
  return std::max(kl, 0.0);
}

double kl_exact(const PolicyParams& params_p, const PolicyParams& params_q,
                const Features& features) {
  return kl_logits(logits(params_p, features), logits(params_q, features));
}

void accumulate_grad_kl(const PolicyParams& params,
                        const PolicyParams& reference,
                        const Features& features, double scale,
                        std::span<double> out) {
  // dKL/dz_j = p_j * (log p_j - log q_j - KL).
  const Logits lp = log_softmax(logits(params, features));
  const Logits lq = log_softmax(logits(reference, features));
  double kl = 0.0;
  for (int a = 0; a < kNumActions; ++a) kl += std::exp(lp[a]) * (lp[a] - lq[a]);
  for (int a = 0; a < kNumActions; ++a) {
    const double delta = scale * std::exp(lp[a]) * (lp[a] - lq[a] - kl);
    if (delta == 0.0) continue;
    double* row = out.data() + static_cast<std::size_t>(a) * kFeatureDim;
    for (int j = 0; j < kFeatureDim; ++j) row[j] += delta * features[j];
    out[kBiasOffset + a] += delta;
  }
}

std::string checkpoint_to_json(const Checkpoint& checkpoint) {
  nlohmann::json j;
  j["layout_version"] = kLayoutVersion;
  j["dims"] = {{"actions", kNumActions}, {"features", kFeatureDim}};
  j["flat_params"] = checkpoint.params.flat;
  j["step"] = checkpoint.step;
  j["rng_state"] = checkpoint.rng_state;
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed checkpoint: ") +
                                    e.what());
  }
  try {
    if (j.at("layout_version").get<int>() != kLayoutVersion) {
      throw Error(ErrorCode::kVersionMismatch,
                  "checkpoint layout_version " +
                      j.at("layout_version").dump() + " != " +
                      std::to_string(kLayoutVersion));
    }
    const auto& dims = j.at("dims");
    if (dims.at("actions").get<int>() != kNumActions ||
        dims.at("features").get<int>() != kFeatureDim) {
      throw Error(ErrorCode::kVersionMismatch,
                  "checkpoint dims mismatch: " + dims.dump());
    }
    Checkpoint c;
    c.params.flat = j.at("flat_params").get<std::vector<double>>();
    if (c.params.flat.size() != static_cast<std::size_t>(kNumParams)) {
      throw Error(ErrorCode::kVersionMismatch,
                  "checkpoint has " + std::to_string(c.params.flat.size()) +
                      " parameters, expected " + std::to_string(kNumParams));
    }
    c.step = j.at("step").get<int>();
    c.rng_state = j.at("rng_state").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kIo, std::string("malformed checkpoint: ") +
                                    e.what());
  }
}

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::kIo, "cannot write " + path);
  os << checkpoint_to_json(checkpoint) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return checkpoint_from_json(ss.str());
}

}  // namespace iqa
