// SPDX-License-Identifier: Apache-2.0
//
// Independent reference implementations used as test oracles. They share no
// code with the library beyond plain data types and favour obviousness over
// speed (long double, quadratic loops).
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "iqa/grpo.hpp"
#include "iqa/synthenv.hpp"
#include "iqa/trajectory.hpp"

namespace oracle {

using ld = long double;

inline ld pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  ld mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  ld sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

// Rank of v[i] = 1 + #(smaller) + (#(equal) - 1) / 2.
inline std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    int less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1.0 + less + (equal - 1) / 2.0;
  }
  return r;
}

inline ld spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

inline double acc_loc(const std::vector<iqa::BBox>& crops,
                      const std::vector<iqa::DistortionPatch>& gt) {
  bool in_gt[iqa::kImageSize][iqa::kImageSize] = {};
  bool in_crop[iqa::kImageSize][iqa::kImageSize] = {};
  for (const auto& p : gt) {
    if (p.intensity <= 0) continue;
    for (int y = p.bbox.y0; y < p.bbox.y1; ++y)
      for (int x = p.bbox.x0; x < p.bbox.x1; ++x) in_gt[y][x] = true;
  }
  for (const auto& b : crops) {
    for (int y = b.y0; y < b.y1; ++y)
      for (int x = b.x0; x < b.x1; ++x) in_crop[y][x] = true;
  }
  int total = 0, hit = 0;
  for (int y = 0; y < iqa::kImageSize; ++y) {
    for (int x = 0; x < iqa::kImageSize; ++x) {
      total += in_gt[y][x];
      hit += in_gt[y][x] && in_crop[y][x];
    }
  }
  return crops.empty() ? 0.0 : static_cast<double>(hit) / total;
}

inline std::vector<ld> logits(const iqa::PolicyParams& p,
                              const iqa::Features& f) {
  std::vector<ld> z(iqa::kNumActions);
  for (int a = 0; a < iqa::kNumActions; ++a) {
    ld acc = p.flat[iqa::kNumActions * iqa::kFeatureDim + a];
    for (int j = 0; j < iqa::kFeatureDim; ++j) {
      acc += static_cast<ld>(p.flat[a * iqa::kFeatureDim + j]) * f[j];
    }
    z[a] = acc;
  }
  return z;
}

inline std::vector<ld> log_softmax(const std::vector<ld>& z) {
  ld m = *std::max_element(z.begin(), z.end());
  ld s = 0;
  for (ld v : z) s += std::exp(v - m);
  std::vector<ld> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = z[i] - m - std::log(s);
  return out;
}

inline ld logprob(const iqa::PolicyParams& p, const iqa::Features& f, int a) {
  return log_softmax(oracle::logits(p, f))[a];
}

inline ld kl(const iqa::PolicyParams& p, const iqa::PolicyParams& q,
             const iqa::Features& f) {
  const auto lp = log_softmax(oracle::logits(p, f));
  const auto lq = log_softmax(oracle::logits(q, f));
  ld s = 0;
  for (std::size_t a = 0; a < lp.size(); ++a) {
    s += std::exp(lp[a]) * (lp[a] - lq[a]);
  }
  return s;
}

// Straight-line evaluation of the masked clipped objective.
inline ld objective(const iqa::PolicyParams& theta,
                    const iqa::PolicyParams& ref, const iqa::GroupBatch& batch,
                    double eps, double beta, bool by_masked = false) {
  const std::size_t g = batch.trajectories.size();
  ld surrogate = 0;
  ld kl_sum = 0;
  long kl_count = 0;
  for (std::size_t i = 0; i < g; ++i) {
    const auto& traj = batch.trajectories[i];
    const ld adv = batch.advantages[i];
    ld inner = 0;
    int generated = 0;
    int masked = 0;
    for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
      const auto& tok = traj.tokens[t];
      if (tok.role == iqa::Role::kObservation) continue;
      ++generated;
      kl_sum += oracle::kl(theta, ref, tok.state_features);
      ++kl_count;
      if (!batch.masks[i].mask[t]) continue;
      ++masked;
      const ld r = std::exp(oracle::logprob(theta, tok.state_features, tok.action_id) -
                            static_cast<ld>(*tok.logprob_old));
      const ld clipped = std::clamp<ld>(r, 1 - eps, 1 + eps);
      inner += std::min(r * adv, clipped * adv);
    }
    const int denom = by_masked ? masked : generated;
    if (denom > 0) surrogate += inner / denom;
  }
  surrogate /= g;
  const ld kl_mean = kl_count > 0 ? kl_sum / kl_count : 0;
  return surrogate - beta * kl_mean;
}

// Central differences of f at x with step h, one coordinate at a time.
inline std::vector<double> fd_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
inline double max_rel_error(const std::vector<double>& a,
                            const std::vector<double>& b,
                            double floor = 1e-6) {
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    const double s = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, d / s);
  }
  return worst;
}

}  // namespace oracle
