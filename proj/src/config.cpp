// SPDX-License-Identifier: Apache-2.0
#include "iqa/config.hpp"

#include <fstream>
#include <limits>
#include <sstream>
#include <type_traits>

#include "json.hpp"

#include "iqa/error.hpp"

namespace iqa {

namespace {

using nlohmann::json;

// Each configuration struct lists its fields once; the same list drives
// serialization, parsing and key lookup.
template <class F> void visit_fields(RewardSchedule& s, F&& f) {
  f("k_min", s.k_min);
  f("k_max", s.k_max);
  f("tau", s.tau);
  f("steepness", s.steepness);
  f("total_steps", s.total_steps);
}

template <class F> void visit_fields(RewardConfig& r, F&& f) {
  f("shape", r.shape);
  f("epsilon", r.epsilon);
  f("lambda_fmt", r.lambda_fmt);
  f("k_fixed", r.k_fixed);
  f("binary_threshold", r.binary_threshold);
  f("rank_weight", r.rank_weight);
  f("schedule", r.schedule);
}

template <class F> void visit_fields(TrainConfig& t, F&& f) {
  f("clip_eps", t.clip_eps);
  f("beta_kl", t.beta_kl);
  f("lr", t.lr);
  f("epochs", t.epochs);
  f("steps_per_epoch", t.steps_per_epoch);
  f("group_size", t.group_size);
  f("reward", t.reward);
  f("egf_enabled", t.egf_enabled);
  f("k_pct", t.k_pct);
  f("always_pivot_score", t.always_pivot_score);
  f("normalize_by_masked", t.normalize_by_masked);
  f("perturb_samples", t.perturb_samples);
  f("max_len", t.max_len);
  f("hidden_layer", t.hidden_layer);
  f("max_patches", t.max_patches);
  f("eval_images", t.eval_images);
  f("parallel_rollouts", t.parallel_rollouts);
}

template <class F> void visit_fields(EvalSection& e, F&& f) {
  f("n_images", e.n_images);
  f("perturb", e.perturb);
  f("min_patches", e.min_patches);
  f("max_patches", e.max_patches);
}

template <class F> void visit_fields(RewardSurfaceSection& r, F&& f) {
  f("t_points", r.t_points);
  f("e_points", r.e_points);
  f("e_max", r.e_max);
  f("total_steps", r.total_steps);
}

template <class F> void visit_fields(DependencySection& d, F&& f) {
  f("n_trajectories", d.n_trajectories);
  f("bins", d.bins);
  f("bin_width", d.bin_width);
  f("threshold", d.threshold);
  f("min_patches", d.min_patches);
  f("max_patches", d.max_patches);
}

template <class F> void visit_fields(PigSection& p, F&& f) {
  f("k", p.k);
  f("stop_threshold", p.stop_threshold);
  f("strength", p.strength);
  f("n_images", p.n_images);
  f("clean_images", p.clean_images);
  f("min_patches", p.min_patches);
  f("max_patches", p.max_patches);
  f("threshold_images", p.threshold_images);
  f("threshold_quantile", p.threshold_quantile);
  f("dump_pgm", p.dump_pgm);
  f("dump_images", p.dump_images);
}

template <class F> void visit_fields(AblateSection& a, F&& f) {
  f("seeds", a.seeds);
  f("shapes", a.shapes);
  f("egf", a.egf);
}

template <class F> void visit_fields(LoggingSection& l, F&& f) {
  f("trajectory_every", l.trajectory_every);
  f("epoch_checkpoints", l.epoch_checkpoints);
}

template <class F> void visit_fields(RunConfig& c, F&& f) {
  f("seed", c.seed);
  f("output_dir", c.output_dir);
  f("train", c.train);
  f("eval", c.eval);
  f("reward_surface", c.reward_surface);
  f("dependency_histogram", c.dependency_histogram);
  f("pig", c.pig);
  f("ablate", c.ablate);
  f("logging", c.logging);
}

template <class T>
concept Section = requires(T& t) {
  visit_fields(t, [](const char*, auto&) {});
};

[[noreturn]] void config_error(const std::string& path,
                               const std::string& what) {
  throw Error(ErrorCode::kConfig, "config key '" + path + "': " + what);
}

std::string join(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

// --- encoding --------------------------------------------------------------

template <class T> json encode(T& value);

json encode_scalar(RewardShape s) { return to_string(s); }

template <class T> json encode(T& value) {
  if constexpr (Section<T>) {
    json j = json::object();
    visit_fields(value, [&](const char* key, auto& field) {
      j[key] = encode(field);
    });
    return j;
  } else if constexpr (std::is_same_v<T, RewardShape>) {
    return encode_scalar(value);
  } else if constexpr (std::is_same_v<T, std::vector<RewardShape>>) {
    json j = json::array();
    for (auto s : value) j.push_back(to_string(s));
    return j;
  } else {
    return json(value);
  }
}

// --- decoding --------------------------------------------------------------

template <class T> void decode(const json& j, T& out, const std::string& path);

void decode_scalar(const json& j, double& out, const std::string& path) {
  if (!j.is_number()) config_error(path, "expected a number");
  out = j.get<double>();
}

void decode_scalar(const json& j, int& out, const std::string& path) {
  if (!j.is_number_integer()) config_error(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() ||
      v > std::numeric_limits<int>::max()) {
    config_error(path, "integer out of range");
  }
  out = static_cast<int>(v);
}

void decode_scalar(const json& j, std::uint64_t& out, const std::string& path) {
  if (j.is_number_unsigned()) {
    out = j.get<std::uint64_t>();
    return;
  }
  if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(j.get<std::int64_t>());
    return;
  }
  config_error(path, "expected a non-negative integer");
}

void decode_scalar(const json& j, bool& out, const std::string& path) {
  if (!j.is_boolean()) config_error(path, "expected true or false");
  out = j.get<bool>();
}

void decode_scalar(const json& j, std::string& out, const std::string& path) {
  if (!j.is_string()) config_error(path, "expected a string");
  out = j.get<std::string>();
}

void decode_scalar(const json& j, RewardShape& out, const std::string& path) {
  if (!j.is_string()) config_error(path, "expected a reward shape name");
  try {
    out = reward_shape_from_string(j.get<std::string>());
  } catch (const Error&) {
    config_error(path, "unknown reward shape '" + j.get<std::string>() +
                           "' (sigmoid, exponential, binary, fixed_gauss)");
  }
}

template <class T> void decode(const json& j, T& out, const std::string& path) {
  if constexpr (Section<T>) {
    if (!j.is_object()) config_error(path, "expected an object");
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      visit_fields(out, [&](const char* name, auto&) { known |= key == name; });
      if (!known) config_error(join(path, key.c_str()), "unknown key");
    }
    visit_fields(out, [&](const char* key, auto& field) {
      if (auto it = j.find(key); it != j.end()) {
        decode(*it, field, join(path, key));
      }
    });
  } else if constexpr (requires { typename T::value_type; } &&
                       !std::is_same_v<T, std::string>) {
    if (!j.is_array()) config_error(path, "expected an array");
    T values;
    for (std::size_t i = 0; i < j.size(); ++i) {
      typename T::value_type v{};
      decode_scalar(j[i], v, path + "[" + std::to_string(i) + "]");
      values.push_back(v);
    }
    out = std::move(values);
  } else {
    decode_scalar(j, out, path);
  }
}

void collect_leaves(const json& j, const std::string& path,
                    std::vector<std::string>& out) {
  if (j.is_object()) {
    for (const auto& [key, value] : j.items()) {
      collect_leaves(value, join(path, key.c_str()), out);
    }
  } else {
    out.push_back(path);
  }
}

std::string leaf_name(const std::string& path) {
  const auto dot = path.rfind('.');
  return dot == std::string::npos ? path : path.substr(dot + 1);
}

}  // namespace

void RunConfig::validate() const {
  auto check = [](bool ok, const char* key, const char* what) {
    if (!ok) config_error(key, what);
  };
  train.validate();
  auto patch_range = [&](int lo, int hi, const char* key) {
    check(0 <= lo && lo <= hi && hi <= kMaxPatches, key,
          "patch range must satisfy 0 <= min_patches <= max_patches <= 4");
  };
  check(eval.n_images >= 0, "eval.n_images", "must be >= 0");
  patch_range(eval.min_patches, eval.max_patches, "eval.min_patches");
  check(reward_surface.t_points >= 1, "reward_surface.t_points", "must be >= 1");
  check(reward_surface.e_points >= 2, "reward_surface.e_points", "must be >= 2");
  check(reward_surface.e_max > 0.0, "reward_surface.e_max", "must be > 0");
  check(reward_surface.total_steps >= 1, "reward_surface.total_steps",
        "must be >= 1");
  check(dependency_histogram.n_trajectories >= 1,
        "dependency_histogram.n_trajectories", "must be >= 1");
  check(dependency_histogram.bins >= 1, "dependency_histogram.bins",
        "must be >= 1");
  check(dependency_histogram.bin_width > 0.0, "dependency_histogram.bin_width",
        "must be > 0");
  check(dependency_histogram.threshold >= 0.0, "dependency_histogram.threshold",
        "must be >= 0");
  patch_range(dependency_histogram.min_patches,
              dependency_histogram.max_patches,
              "dependency_histogram.min_patches");
  check(pig.k >= 1, "pig.k", "must be >= 1");
  check(pig.strength > 0.0 && pig.strength <= 1.0, "pig.strength",
        "must be in (0, 1]");
  check(pig.n_images >= 0, "pig.n_images", "must be >= 0");
  check(pig.clean_images >= 0, "pig.clean_images", "must be >= 0");
  patch_range(pig.min_patches, pig.max_patches, "pig.min_patches");
  check(pig.threshold_images >= 1, "pig.threshold_images", "must be >= 1");
  check(pig.threshold_quantile >= 0.0 && pig.threshold_quantile <= 1.0,
        "pig.threshold_quantile", "must be in [0, 1]");
  check(pig.dump_images >= 0, "pig.dump_images", "must be >= 0");
  check(!ablate.seeds.empty(), "ablate.seeds", "must not be empty");
  check(!ablate.shapes.empty(), "ablate.shapes", "must not be empty");
  check(!ablate.egf.empty(), "ablate.egf", "must not be empty");
  check(logging.trajectory_every >= 0, "logging.trajectory_every",
        "must be >= 0");
}

std::string config_to_json(const RunConfig& config) {
  RunConfig copy = config;
  return encode(copy).dump(2);
}

RunConfig config_from_json(std::string_view text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::kConfig, "config is not valid JSON");
  }
  RunConfig config;
  decode(j, config, "");
  return config;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfig, "cannot read config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  RunConfig config = config_from_json(buf.str());
  config.validate();
  return config;
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw Error(ErrorCode::kConfig, "override '" + std::string(assignment) +
                                        "' is not of the form key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  if (key == "steps") {
    int steps = 0;
    decode_scalar(value, steps, "steps");
    if (steps < 0) config_error("steps", "must be >= 0");
    config.train.epochs = 1;
    config.train.steps_per_epoch = steps;
    return;
  }

  const json tree = encode(config);
  std::vector<std::string> leaves;
  collect_leaves(tree, "", leaves);
  std::string path;
  if (key.find('.') != std::string::npos) {
    for (const auto& leaf : leaves) {
      if (leaf == key) path = leaf;
    }
    if (path.empty()) config_error(key, "unknown key");
  } else {
    std::vector<std::string> matches;
    for (const auto& leaf : leaves) {
      if (leaf_name(leaf) == key) matches.push_back(leaf);
    }
    if (matches.empty()) config_error(key, "unknown key");
    if (matches.size() > 1) {
      std::string all;
      for (const auto& m : matches) all += (all.empty() ? "" : ", ") + m;
      config_error(key, "ambiguous; use one of " + all);
    }
    path = matches.front();
  }

  // Wrap the value in the nested objects of its path and decode that patch
  // over the current configuration.
  json patch = value;
  std::string rest = path;
  while (true) {
    const auto dot = rest.rfind('.');
    const std::string name =
        dot == std::string::npos ? rest : rest.substr(dot + 1);
    patch = json{{name, patch}};
    if (dot == std::string::npos) break;
    rest = rest.substr(0, dot);
  }
  decode(patch, config, "");
}

}  // namespace iqa
