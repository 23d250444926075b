// SPDX-License-Identifier: Apache-2.0
#include "iqa/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>

#include "json.hpp"

#include "iqa/egf.hpp"
#include "iqa/error.hpp"
#include "iqa/io.hpp"
#include "iqa/metrics.hpp"
#include "iqa/pig.hpp"
#include "iqa/reward.hpp"
#include "iqa/rng.hpp"
#include "iqa/trajectory.hpp"

namespace iqa {

namespace {

using nlohmann::json;
using io::CsvWriter;
using io::join_path;

json eval_json(const EvalReport& r) {
  return {{"plcc", r.plcc},
          {"srcc", r.srcc},
          {"acc_loc", r.acc_loc},
          {"n", r.n},
          {"n_loc", r.n_loc},
          {"n_malformed", r.n_malformed},
          {"correlation_defined", r.correlation_defined}};
}

json mean_or_null(const std::vector<double>& xs) {
  if (xs.empty()) return nullptr;
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

std::string cells_text(const std::vector<int>& cells) {
  std::string out;
  for (int c : cells) out += (out.empty() ? "" : ";") + std::to_string(c);
  return out;
}

json trajectory_json(int step, int member, const Trajectory& traj,
                     const GroupBatch& batch) {
  json tokens = json::array();
  const auto& mask = batch.masks[member].mask;
  for (std::size_t i = 0; i < traj.tokens.size(); ++i) {
    const auto& t = traj.tokens[i];
    json tok = {{"id", t.action_id},
                {"role", to_string(t.role)},
                {"mask", t.loss_mask ? 1 : 0},
                {"pivotal", mask[i]}};
    if (t.logprob_old) tok["logprob"] = *t.logprob_old;
    if (t.observation) tok["observation"] = *t.observation;
    tokens.push_back(std::move(tok));
  }
  json j = {{"seed", traj.rollout_seed},
            {"step", step},
            {"member", member},
            {"image_seed", traj.image->seed},
            {"y", true_score(*traj.image)},
            {"y_hat", traj.predicted_score ? json(*traj.predicted_score)
                                           : json(nullptr)},
            {"reward", traj.reward},
            {"advantage", batch.advantages[member]},
            {"k_t", traj.k_t},
            {"tool_calls", traj.tool_calls},
            {"tokens", std::move(tokens)}};
  return j;
}

void write_per_image_csv(const std::string& path, const EvalReport& report) {
  CsvWriter csv{"index", "image_seed", "y", "y_hat", "scored", "n_cells",
                "cells", "acc_loc"};
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const auto& r = report.records[i];
    csv.field(static_cast<long long>(i))
        .field(std::to_string(r.image_seed))
        .field(r.y)
        .field(r.y_hat)
        .field(r.scored ? 1 : 0)
        .field(static_cast<int>(r.cells.size()))
        .field(cells_text(r.cells));
    if (r.acc_loc >= 0.0) {
      csv.field(r.acc_loc);
    } else {
      csv.field(std::string_view(""));
    }
    csv.end_row();
  }
  io::write_file(path, csv.text());
}

Checkpoint make_checkpoint(const PolicyParams& params, std::uint64_t seed,
                           int step) {
  Checkpoint ck;
  ck.params = params;
  ck.step = step;
  // State of the rollout stream the next step would start from.
  ck.rng_state = rng_state_string(Rng(derive_seed(seed, "rollout", step)));
  return ck;
}

}  // namespace

TrainOutcome run_train(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  io::ensure_dir(out_dir);
  const TrainConfig& tc = config.train;
  const bool epoch_ck = config.logging.epoch_checkpoints && tc.steps_per_epoch > 0;
  if (epoch_ck && tc.epochs > 0) {
    io::ensure_dir(join_path(out_dir, "checkpoints"));
  }

  CsvWriter curves{"step", "k_t", "mean_reward", "mean_e", "frac_tool_use",
                   "objective"};
  std::string trajectories;
  PolicyParams last_params;
  int completed = 0;

  TrainHooks hooks;
  hooks.on_step = [&](const StepLog& log, const PolicyParams& params,
                      const GroupBatch& batch) {
    curves.field(log.step)
        .field(log.k_t)
        .field(log.mean_reward)
        .field(log.mean_e)
        .field(log.frac_tool_use)
        .field(log.objective);
    curves.end_row();
    const int every = config.logging.trajectory_every;
    if (every > 0 && log.step % every == 0) {
      for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
        trajectories += trajectory_json(log.step, static_cast<int>(i),
                                        batch.trajectories[i], batch)
                            .dump();
        trajectories += '\n';
      }
    }
    last_params = params;
    completed = log.step + 1;
    if (epoch_ck && completed % tc.steps_per_epoch == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%03d.json",
                    completed / tc.steps_per_epoch);
      save_checkpoint(make_checkpoint(params, config.seed, completed),
                      join_path(join_path(out_dir, "checkpoints"), name));
    }
  };

  TrainingReport report;
  try {
    report = train(tc, config.seed, hooks);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNonFinite) {
      io::write_file(join_path(out_dir, "curves.csv"), curves.text());
      json dump = {
          {"error", e.what()},
          {"completed_steps", completed},
          {"last_finite_checkpoint",
           json::parse(checkpoint_to_json(
               make_checkpoint(last_params, config.seed, completed)))}};
      io::write_file(join_path(out_dir, "nan_dump.json"), dump.dump(2) + "\n");
    }
    throw;
  }

  io::write_file(join_path(out_dir, "curves.csv"), curves.text());
  if (config.logging.trajectory_every > 0) {
    io::write_file(join_path(out_dir, "trajectories.jsonl"), trajectories);
  }
  save_checkpoint(make_checkpoint(report.params, config.seed, report.steps),
                  join_path(out_dir, "checkpoint_final.json"));

  json summary = {{"seed", config.seed},
                  {"steps", report.steps},
                  {"checkpoint", "checkpoint_final.json"}};
  if (tc.eval_images > 0) {
    summary["untrained"] = eval_json(report.untrained);
    if (report.steps > 0) {
      summary["trained"] = eval_json(report.trained);
      summary["srcc_gain"] = report.trained.srcc - report.untrained.srcc;
    }
  }
  const std::string text = summary.dump(2) + "\n";
  io::write_file(join_path(out_dir, "summary.json"), text);
  return {text, report.params};
}

std::string run_eval(const RunConfig& config, const PolicyParams& params,
                     const std::string& out_dir) {
  config.validate();
  io::ensure_dir(out_dir);
  const auto& ec = config.eval;
  const auto images = heldout_images(derive_seed(config.seed, "eval"),
                                     ec.n_images, ec.min_patches,
                                     ec.max_patches);
  EvalOptions eo;
  eo.max_len = config.train.max_len;
  eo.strict = true;
  const std::uint64_t decode_seed = derive_seed(config.seed, "eval-decode");

  EvalReport clean;
  std::optional<EvalReport> perturbed;
  if (ec.perturb) {
    auto [c, p] = evidence_perturb_eval(params, images, decode_seed, eo);
    clean = std::move(c);
    perturbed = std::move(p);
  } else {
    clean = evaluate(params, images, decode_seed, eo);
  }

  json report = eval_json(clean);
  report["acc_loc_random"] = random_tool_acc_loc(
      clean, images, derive_seed(config.seed, "random-tools"));
  if (perturbed) {
    report["clean_vs_perturbed"] = {
        {"clean", eval_json(clean)},
        {"perturbed", eval_json(*perturbed)},
        {"srcc_drop", clean.srcc - perturbed->srcc}};
  } else {
    report["clean_vs_perturbed"] = nullptr;
  }
  write_per_image_csv(join_path(out_dir, "eval_images.csv"), clean);
  if (perturbed) {
    write_per_image_csv(join_path(out_dir, "eval_images_perturbed.csv"),
                        *perturbed);
  }
  const std::string text = report.dump(2) + "\n";
  io::write_file(join_path(out_dir, "eval.json"), text);
  return text;
}

std::string run_reward_surface(const RunConfig& config,
                               const std::string& out_dir) {
  config.validate();
  io::ensure_dir(out_dir);
  const auto& rs = config.reward_surface;
  RewardConfig rc = config.train.reward;
  rc.schedule.total_steps = rs.total_steps;

  auto with_shape = [&](RewardShape s) {
    RewardConfig c = rc;
    c.shape = s;
    return c;
  };
  const RewardConfig sig = with_shape(RewardShape::kSigmoid);
  const RewardConfig ex = with_shape(RewardShape::kExponential);
  const RewardConfig bin = with_shape(RewardShape::kBinary);
  const RewardConfig gauss = with_shape(RewardShape::kFixedGauss);

  CsvWriter csv{"t", "e", "R_sigmoid", "R_exp", "R_binary", "k_t",
                "R_fixed_gauss"};
  json ks = json::array();
  for (int i = 0; i < rs.t_points; ++i) {
    const int t = rs.t_points == 1
                      ? 0
                      : static_cast<int>(std::lround(
                            static_cast<double>(i) * rs.total_steps /
                            (rs.t_points - 1)));
    const double k = sharpness(rc.schedule, t);
    ks.push_back({{"t", t}, {"k_t", k}});
    for (int j = 0; j < rs.e_points; ++j) {
      const double e = rs.e_max * j / (rs.e_points - 1);
      csv.field(t)
          .field(e)
          .field(score_reward_at(sig, k, e))
          .field(score_reward_at(ex, k, e))
          .field(score_reward_at(bin, k, e))
          .field(k)
          .field(score_reward_at(gauss, rc.k_fixed, e));
      csv.end_row();
    }
  }
  io::write_file(join_path(out_dir, "reward_surface.csv"), csv.text());
  json summary = {{"rows", rs.t_points * rs.e_points}, {"sharpness", ks}};
  return summary.dump(2) + "\n";
}

std::string run_dependency_histogram(const RunConfig& config,
                                     const PolicyParams& params,
                                     const std::string& out_dir) {
  config.validate();
  io::ensure_dir(out_dir);
  const auto& dc = config.dependency_histogram;
  const auto images = heldout_images(derive_seed(config.seed, "dependency"),
                                     dc.n_trajectories, dc.min_patches,
                                     dc.max_patches);
  EgfOptions egf;
  egf.perturb_samples = config.train.perturb_samples;
  RolloutOptions ro;
  ro.max_len = config.train.max_len;

  std::vector<long long> counts(dc.bins, 0);
  long long total = 0;
  long long above = 0;
  double sum = 0.0;
  PhaseScores phases;
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto img = std::make_shared<const SynthImage>(images[i]);
    Rng rng(derive_seed(config.seed, "dependency-rollout", i));
    const Trajectory traj = rollout(params, img, rng, ro);
    const DependencyProfile profile = dependency_scores(
        params, traj, *img, derive_seed(config.seed, "dependency-perturb", i),
        egf);
    for (double s : profile.scores) {
      const auto bin = static_cast<std::size_t>(std::min<double>(
          std::floor(s / dc.bin_width), static_cast<double>(dc.bins - 1)));
      ++counts[bin];
      ++total;
      sum += s;
      if (s >= dc.threshold) ++above;
    }
    split_by_phase(traj, profile, phases);
  }

  CsvWriter csv{"score_bin", "count", "fraction"};
  for (int b = 0; b < dc.bins; ++b) {
    csv.field(b * dc.bin_width)
        .field(counts[b])
        .field(total > 0 ? static_cast<double>(counts[b]) / total : 0.0);
    csv.end_row();
  }
  io::write_file(join_path(out_dir, "dependency_histogram.csv"), csv.text());

  json summary = {
      {"n_trajectories", dc.n_trajectories},
      {"n_tokens", total},
      {"threshold", dc.threshold},
      {"fraction_above_threshold",
       total > 0 ? static_cast<double>(above) / total : 0.0},
      {"mean_score", total > 0 ? sum / total : 0.0},
      {"post_observation_mean", mean_or_null(phases.post_observation)},
      {"pre_tool_mean", mean_or_null(phases.pre_tool)},
      {"n_post_observation", phases.post_observation.size()},
      {"n_pre_tool", phases.pre_tool.size()}};
  const std::string text = summary.dump(2) + "\n";
  io::write_file(join_path(out_dir, "dependency_histogram.json"), text);
  return text;
}

std::string run_pig(const RunConfig& config, const PolicyParams& params,
                    const std::string& out_dir) {
  config.validate();
  io::ensure_dir(out_dir);
  const auto& pc = config.pig;
  PigOptions po;
  po.k = pc.k;
  po.stop_threshold = pc.stop_threshold;
  po.strength = pc.strength;
  po.max_len = config.train.max_len;
  po.artifact_threshold =
      artifact_threshold(derive_seed(config.seed, "artifact"),
                         pc.threshold_images, pc.threshold_quantile);

  const auto images = heldout_images(derive_seed(config.seed, "pig"),
                                     pc.n_images, pc.min_patches,
                                     pc.max_patches);
  const std::string pgm_dir = join_path(out_dir, "pgm");
  if (pc.dump_pgm && pc.dump_images > 0) io::ensure_dir(pgm_dir);

  CsvWriter csv{"image", "iter", "y_true", "y_hat", "n_flagged", "verdict",
                "edited", "y_after"};
  std::vector<double> by_iter(pc.k + 1, 0.0);
  int failed = 0;
  int max_edits = 0;
  long long total_edits = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::uint64_t tie_root = derive_seed(config.seed, "pig-tie", i);
    Critic critic = [&](const SynthImage& img, int round) {
      return diagnose(params, img, po, derive_seed(tie_root, "round", round));
    };
    std::vector<SynthImage> stages{images[i]};
    Editor editor = [&](const SynthImage& img, const EditInstruction& ins) {
      stages.push_back(edit(img, ins));
      return stages.back();
    };
    const RefineResult res =
        refine_loop(critic, editor, images[i], pc.k, pc.strength);
    failed += res.critic_failed ? 1 : 0;
    max_edits = std::max(max_edits, res.edits);
    total_edits += res.edits;

    double y = true_score(images[i]);
    by_iter[0] += y;
    for (int r = 1; r <= pc.k; ++r) {
      if (r <= static_cast<int>(res.history.size())) {
        y = res.history[r - 1].y_after;
      }
      by_iter[r] += y;
    }
    for (std::size_t r = 0; r < res.history.size(); ++r) {
      const auto& rec = res.history[r];
      csv.field(static_cast<long long>(i))
          .field(static_cast<int>(r + 1))
          .field(rec.y_before)
          .field(rec.diagnosis.y_hat)
          .field(static_cast<int>(rec.diagnosis.flagged_cells.size()))
          .field(rec.diagnosis.verdict == Verdict::kSatisfactory
                     ? std::string_view("satisfactory")
                     : std::string_view("needs_edit"))
          .field(rec.instruction ? 1 : 0)
          .field(rec.y_after);
      csv.end_row();
    }
    if (res.critic_failed) {
      const double y_now = true_score(res.final_image);
      csv.field(static_cast<long long>(i))
          .field(static_cast<int>(res.history.size() + 1))
          .field(y_now)
          .field(std::numeric_limits<double>::quiet_NaN())
          .field(0)
          .field(std::string_view("unusable"))
          .field(0)
          .field(y_now);
      csv.end_row();
    }

    if (pc.dump_pgm && static_cast<int>(i) < pc.dump_images) {
      json meta = json::array();
      for (std::size_t s = 0; s < stages.size(); ++s) {
        char name[48];
        std::snprintf(name, sizeof name, "image_%03zu_iter_%zu.pgm", i, s);
        io::write_pgm(join_path(pgm_dir, name), stages[s].pixels);
        json patches = json::array();
        for (const auto& p : stages[s].patches) {
          patches.push_back({{"bbox", {p.bbox.x0, p.bbox.y0, p.bbox.x1, p.bbox.y1}},
                             {"kind", to_string(p.kind)},
                             {"intensity", p.intensity}});
        }
        meta.push_back({{"iter", s},
                        {"file", name},
                        {"y_true", true_score(stages[s])},
                        {"patches", std::move(patches)}});
      }
      char name[32];
      std::snprintf(name, sizeof name, "image_%03zu.json", i);
      io::write_file(join_path(pgm_dir, name), meta.dump(2) + "\n");
    }
  }

  const double n = images.empty() ? 1.0 : static_cast<double>(images.size());
  json means = json::array();
  bool nondecreasing = true;
  for (int r = 0; r <= pc.k; ++r) {
    means.push_back(by_iter[r] / n);
    if (r > 0 && by_iter[r] < by_iter[r - 1]) nondecreasing = false;
  }

  const auto clean = heldout_images(derive_seed(config.seed, "pig-clean"),
                                    pc.clean_images, 0, 0);
  int satisfied = 0;
  int clean_failed = 0;
  for (std::size_t i = 0; i < clean.size(); ++i) {
    try {
      const Diagnosis d =
          diagnose(params, clean[i], po,
                   derive_seed(derive_seed(config.seed, "pig-clean-tie", i),
                               "round", 1));
      if (d.verdict == Verdict::kSatisfactory) ++satisfied;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kCriticUnusable) throw;
      ++clean_failed;
    }
  }

  io::write_file(join_path(out_dir, "pig.csv"), csv.text());
  json summary = {
      {"artifact_threshold", po.artifact_threshold},
      {"k", pc.k},
      {"n_images", images.size()},
      {"n_critic_failed", failed},
      {"max_edits", max_edits},
      {"mean_edits", static_cast<double>(total_edits) / n},
      {"mean_true_score_by_iter", means},
      {"mean_initial", by_iter.front() / n},
      {"mean_final", by_iter.back() / n},
      {"gain", (by_iter.back() - by_iter.front()) / n},
      {"nondecreasing", nondecreasing},
      {"clean",
       {{"n", clean.size()},
        {"satisfactory_first", satisfied},
        {"n_critic_failed", clean_failed},
        {"fraction_satisfactory_first",
         clean.empty() ? 0.0
                       : static_cast<double>(satisfied) / clean.size()}}}};
  const std::string text = summary.dump(2) + "\n";
  io::write_file(join_path(out_dir, "pig.json"), text);
  return text;
}

std::string run_ablate(const RunConfig& config, const std::string& out_dir) {
  config.validate();
  io::ensure_dir(out_dir);
  const auto& ac = config.ablate;
  CsvWriter csv{"shape", "egf", "seed", "srcc", "plcc", "acc_loc",
                "untrained_srcc"};
  json arms = json::array();
  for (RewardShape shape : ac.shapes) {
    for (bool egf : ac.egf) {
      TrainConfig tc = config.train;
      tc.reward.shape = shape;
      tc.egf_enabled = egf;
      double srcc_sum = 0.0;
      double plcc_sum = 0.0;
      double loc_sum = 0.0;
      for (std::uint64_t seed : ac.seeds) {
        const TrainingReport rep = train(tc, seed);
        csv.field(to_string(shape))
            .field(egf ? 1 : 0)
            .field(std::to_string(seed))
            .field(rep.trained.srcc)
            .field(rep.trained.plcc)
            .field(rep.trained.acc_loc)
            .field(rep.untrained.srcc);
        csv.end_row();
        srcc_sum += rep.trained.srcc;
        plcc_sum += rep.trained.plcc;
        loc_sum += rep.trained.acc_loc;
      }
      const double n = static_cast<double>(ac.seeds.size());
      csv.field(to_string(shape))
          .field(egf ? 1 : 0)
          .field(std::string_view("mean"))
          .field(srcc_sum / n)
          .field(plcc_sum / n)
          .field(loc_sum / n)
          .field(std::string_view(""));
      csv.end_row();
      arms.push_back({{"shape", to_string(shape)},
                      {"egf", egf},
                      {"mean_srcc", srcc_sum / n},
                      {"mean_plcc", plcc_sum / n},
                      {"mean_acc_loc", loc_sum / n}});
    }
  }
  io::write_file(join_path(out_dir, "ablate.csv"), csv.text());
  json summary = {{"seeds", ac.seeds}, {"arms", std::move(arms)}};
  const std::string text = summary.dump(2) + "\n";
  io::write_file(join_path(out_dir, "ablate.json"), text);
  return text;
}

}  // namespace iqa
