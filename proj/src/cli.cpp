// SPDX-License-Identifier: Apache-2.0

#include "trajpred/cli.hpp"

#include "trajpred/cache.hpp"
#include "trajpred/checkpoint.hpp"
#include "trajpred/errors.hpp"
#include "trajpred/synthetic.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>

namespace trajpred {

namespace fs = std::filesystem;
using J = nlohmann::json;

SceneSplit resolve_split(const RunConfig& cfg) {
  SceneSplit s;
  if (cfg.get_string("dataset") == "sdd") {
    const std::string manifest = cfg.get_string("split_manifest");
    if (manifest.empty()) throw ConfigError("dataset 'sdd' requires split_manifest");
    const DatasetSplit d = load_split_manifest(manifest);
    return SceneSplit{d.train_scenes, d.val_scenes, d.test_scenes};
  }
  const DatasetSplit d = leave_one_out_split(cfg.get_strings("scenes"), cfg.get_string("test_scene"));
  s.train = d.train_scenes;
  s.test = d.test_scenes;
  return s;
}

SampleSet load_sample_set(const fs::path& cache_dir, const std::vector<std::string>& scenes, const Autoencoder* ae) {
  SampleSet set;
  for (const auto& id : scenes) {
    CachedScene c = load_cached_scene(cache_dir, id, ae != nullptr, false);
    SceneContext ctx = make_scene_context(std::move(c.recording), c.geometry, std::move(c.frame_ids),
                                          ae != nullptr ? std::move(c.maps) : RowMat(c.frame_ids.size(), 0));
    if (ae != nullptr) attach_latents(ctx, *ae, true);
    const int index = set.add_scene(std::move(ctx));
    set.add_samples(index, std::move(c.windows));
  }
  return set;
}

std::pair<SampleSet, SampleSet> carve_sample_set(SampleSet set, double fraction) {
  SampleSet train;
  SampleSet val;
  for (std::size_t si = 0; si < set.scenes.size(); ++si) {
    std::vector<SequenceSample> windows;
    for (std::size_t i = 0; i < set.size(); ++i) {
      if (set.scene_of[i] == static_cast<int>(si)) windows.push_back(std::move(set.samples[i]));
    }
    auto [tr, va] = carve_validation(std::move(windows), fraction);
    train.add_samples(train.add_scene(set.scenes[si]), std::move(tr));
    val.add_samples(val.add_scene(set.scenes[si]), std::move(va));
  }
  return {std::move(train), std::move(val)};
}

namespace {

struct CommonFlags {
  std::string config;
  std::vector<std::string> sets;
  bool deterministic = false;
  std::string run_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file");
  cmd->add_option("--set", f.sets, "override a config key (key=value); repeatable");
  cmd->add_flag("--deterministic", f.deterministic, "serial execution and fixed reduction order");
  cmd->add_option("--run-dir", f.run_dir, "output directory (default: <runs_dir>/<timestamp>-<command>-<hash>)");
}

RunConfig resolve(const CommonFlags& f, std::vector<std::string> extra) {
  std::vector<std::string> overrides = f.sets;
  for (auto& e : extra) overrides.push_back(std::move(e));
  if (f.deterministic) overrides.emplace_back("deterministic=true");
  return RunConfig::resolve(f.config, overrides);
}

fs::path make_run_dir(const RunConfig& cfg, const CommonFlags& f, const std::string& command) {
  fs::path dir;
  if (!f.run_dir.empty()) {
    dir = f.run_dir;
  } else {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    localtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
    dir = fs::path(cfg.get_string("runs_dir")) / (std::string(stamp) + "-" + command + "-" + cfg.fingerprint());
  }
  fs::create_directories(dir);
  std::ofstream(dir / "config.json") << cfg.values().dump(2) << '\n';
  return dir;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::exists(path)) throw ConfigError(what + " not found: expected " + path);
}

// ---------------------------------------------------------------- commands

int cmd_prepare(const RunConfig& cfg, const std::vector<std::string>& scenes, bool verify, std::ostream& out) {
  const fs::path cache = cfg.get_string("cache_dir");
  if (verify) {
    verify_cache(cache);
    out << "cache " << cache.string() << ": all checksums match\n";
    return 0;
  }
  const auto recordings = load_raw_scenes(cfg, scenes);
  const J manifest = prepare_cache(recordings, cfg, cache);
  for (const auto& rec : recordings) {
    const J& e = manifest.at("scenes").at(rec.scene_id);
    out << rec.scene_id << ": " << e.at("annotations") << " annotations, " << e.at("frames") << " frames, "
        << e.at("windows") << " windows, " << e.at("ae_frames") << " autoencoder maps\n";
  }
  out << "manifest written to " << (cache / "manifest.json").string() << '\n';
  return 0;
}

int cmd_pretrain_ae(const RunConfig& cfg, const fs::path& run, const std::string& resume, std::ostream& out) {
  const fs::path cache = cfg.get_string("cache_dir");
  const SceneSplit split = resolve_split(cfg);
  std::vector<RowMat> blocks;
  Eigen::Index rows = 0;
  for (const auto& id : split.train) {
    blocks.push_back(load_cached_scene(cache, id, false, true).ae_maps);
    rows += blocks.back().rows();
  }
  if (rows == 0) throw DataError("no autoencoder maps in the training scenes");
  RowMat frames(rows, blocks.front().cols());
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    frames.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  blocks.clear();

  const ModelSpec spec = cfg.model_spec();
  const AeTrainOptions opts = cfg.ae_options();
  Autoencoder ae(spec.autoencoder, nn::Rng(opts.seed));
  nn::Adam optimizer(ae.params().vars(), nn::AdamConfig{opts.lr0, 0.9, 0.999, 1e-8, opts.grad_clip});
  AeTrainState state;
  if (!resume.empty()) {
    require_file(resume, "autoencoder checkpoint");
    const Checkpoint c = read_checkpoint(resume);
    if (c.kind != "autoencoder") throw FormatError("expected an autoencoder checkpoint in " + resume);
    load_parameters(ae.params(), c);
    load_optimizer(optimizer, "adam", c);
    state.next_epoch = c.epoch;
    state.loss_history = c.extra.value("loss_history", std::vector<double>{});
    out << "resuming autoencoder training at epoch " << state.next_epoch + 1 << '\n';
  }

  std::ofstream log(run / "ae_log.csv", state.next_epoch > 0 ? std::ios::app : std::ios::trunc);
  if (state.next_epoch == 0) log << "epoch,lr,loss\n";
  const fs::path ckpt_path = run / "autoencoder.ckpt";
  train_autoencoder(ae, optimizer, frames, opts, state, [&](int epoch, double loss) {
    const double lr = learning_rate(epoch, opts.lr0, opts.lr_gamma);
    log << epoch + 1 << ',' << num(lr) << ',' << num(loss) << '\n' << std::flush;
    out << "ae epoch " << epoch + 1 << "/" << opts.epochs << " loss " << loss << '\n';
    Checkpoint c;
    c.kind = "autoencoder";
    c.descriptor = spec.to_json();
    c.config = cfg.values();
    c.epoch = epoch + 1;
    c.extra["loss_history"] = state.loss_history;
    store_parameters(ae.params(), c);
    store_optimizer(optimizer, "adam", c);
    write_checkpoint(c, ckpt_path);
  });
  out << "autoencoder checkpoint: " << ckpt_path.string() << '\n';
  return 0;
}

int cmd_train(const RunConfig& cfg, const fs::path& run, std::ostream& out) {
  const fs::path cache = cfg.get_string("cache_dir");
  const ModelSpec spec = cfg.model_spec();
  const TrainConfig tcfg = cfg.train_config();
  TrajectoryModel model(spec, tcfg.seed);
  if (spec.use_relation) {
    const std::string ae_path = cfg.get_string("ae_checkpoint");
    if (ae_path.empty()) {
      throw ConfigError("training with the relation branch needs a pretrained autoencoder (set ae_checkpoint)");
    }
    require_file(ae_path, "autoencoder checkpoint");
    load_autoencoder(model, read_checkpoint(ae_path));
  }
  const Autoencoder* ae = spec.use_relation ? &model.autoencoder() : nullptr;
  const SceneSplit split = resolve_split(cfg);
  SampleSet train;
  SampleSet val;
  if (split.val.empty()) {
    std::tie(train, val) = carve_sample_set(load_sample_set(cache, split.train, ae), cfg.get_double("val_fraction"));
  } else {
    train = load_sample_set(cache, split.train, ae);
    val = load_sample_set(cache, split.val, ae);
  }
  out << "training windows " << train.size() << ", validation windows " << val.size() << '\n';

  std::ofstream log(run / "metrics.csv", std::ios::trunc);
  log << "epoch,lr,beta,loss_total,loss_goal,loss_traj,loss_kld,val_minADE,val_minFDE\n";
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochLog& e) {
    log << e.epoch << ',' << num(e.lr) << ',' << num(e.beta) << ',' << num(e.loss_total) << ',' << num(e.loss_goal)
        << ',' << num(e.loss_traj) << ',' << num(e.loss_kld) << ',' << num(e.val_min_ade) << ','
        << num(e.val_min_fde) << '\n'
        << std::flush;
    out << "epoch " << e.epoch << "/" << tcfg.epochs << " loss " << e.loss_total << " val minADE " << e.val_min_ade
        << " minFDE " << e.val_min_fde << '\n';
  };
  hooks.on_best = [&](const EpochLog& e) {
    write_checkpoint(model_checkpoint(model, cfg.values(), e.epoch), run / "best.ckpt");
  };
  const TrainResult result = train_full(model, train, &val, tcfg, hooks);
  Checkpoint last = model_checkpoint(model, cfg.values(), tcfg.epochs);
  last.extra["best_epoch"] = result.best_epoch;
  write_checkpoint(last, run / "last.ckpt");
  out << "best epoch " << result.best_epoch << " (val minADE " << result.best_val_min_ade << ")\n"
      << "checkpoints: " << (run / "best.ckpt").string() << ", " << (run / "last.ckpt").string() << '\n';
  return 0;
}

std::unique_ptr<TrajectoryModel> load_checkpoint_model(const std::string& path) {
  require_file(path, "checkpoint");
  return load_model(read_checkpoint(path));
}

SampleSet test_set(const RunConfig& cfg, const TrajectoryModel& model) {
  const SceneSplit split = resolve_split(cfg);
  return load_sample_set(cfg.get_string("cache_dir"), split.test,
                         model.spec().use_relation ? &model.autoencoder() : nullptr);
}

void write_report(MetricsReport& report, const RunConfig& cfg, const fs::path& run, std::ostream& out) {
  report.config_fingerprint = cfg.fingerprint();
  std::ofstream(run / "report.json") << report.to_json().dump(2) << '\n';
  out << report.table();
  out << "report: " << (run / "report.json").string() << '\n';
}

int cmd_evaluate(const RunConfig& cfg, const fs::path& run, const std::string& checkpoint, const std::string& dump,
                 std::ostream& out) {
  const EvalConfig ecfg = cfg.eval_config();
  std::vector<PredictionRecord> records;
  if (!dump.empty()) {
    require_file(dump, "prediction dump");
    records = read_prediction_dump(dump);
  } else {
    const auto model = load_checkpoint_model(checkpoint);
    records = predict_dataset(*model, test_set(cfg, *model), ecfg);
    write_prediction_dump(records, run / "predictions.jsonl");
  }
  MetricsReport report = evaluate_dump(records, ecfg);
  write_report(report, cfg, run, out);
  return 0;
}

int cmd_perturb(const RunConfig& cfg, const fs::path& run, const std::string& checkpoint, std::ostream& out) {
  const auto model = load_checkpoint_model(checkpoint);
  MetricsReport report = robustness_study(*model, test_set(cfg, *model), cfg.eval_config());
  write_report(report, cfg, run, out);
  return 0;
}

int cmd_synth(const std::string& path, const RunConfig& cfg, const std::string& scene_id, std::ostream& out) {
  SyntheticSceneOptions so;
  so.scene_id = scene_id;
  so.seed = static_cast<std::uint64_t>(cfg.get_int("seed"));
  so.steps = cfg.get_int("synthetic_steps");
  so.frame_rate = cfg.get_double("frame_rate");
  so.frame_step = cfg.get_int("frame_step");
  const SceneRecording rec = generate_synthetic_scene(so);
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  write_ethucy_file(rec, path);
  out << "wrote " << rec.tracks.size() << " tracks (" << rec.annotation_count() << " annotations) to " << path
      << '\n';
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Region-based relation learning and multi-goal trajectory prediction"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "print help for every command");
  bool show_schema = false;
  app.add_flag("--config-schema", show_schema, "print every config key and exit");

  CommonFlags prep_flags, ae_flags, train_flags, eval_flags, pert_flags, synth_flags;
  std::vector<std::string> scenes;
  bool verify = false;
  std::string resume, ae_ckpt, ablate = "none", eval_ckpt, dump, select, pert_ckpt, synth_out, synth_id = "synthetic";
  int k = 0;
  double sigma = -1.0;

  auto* prep = app.add_subcommand("prepare-data", "parse raw scenes and build the preprocessed cache");
  add_common(prep, prep_flags);
  prep->add_option("--scenes", scenes, "restrict to these scene ids")->delimiter(',');
  prep->add_flag("--verify", verify, "check cache files against the manifest checksums");

  auto* pre = app.add_subcommand("pretrain-ae", "train the density-map autoencoder");
  add_common(pre, ae_flags);
  pre->add_option("--resume", resume, "continue from an autoencoder checkpoint");

  auto* train = app.add_subcommand("train", "train the full model with the autoencoder frozen");
  add_common(train, train_flags);
  train->add_option("--ae-checkpoint", ae_ckpt, "pretrained autoencoder checkpoint");
  train->add_option("--ablate", ablate, "none | no_relation | no_goal | baseline")
      ->check(CLI::IsMember({"none", "no_relation", "no_goal", "baseline"}));
  train->add_option("--k", k, "latent draws per sample");

  auto* eval = app.add_subcommand("evaluate", "best-of-K ADE/FDE and KDE-NLL on the test scenes");
  add_common(eval, eval_flags);
  eval->add_option("--checkpoint", eval_ckpt, "model checkpoint");
  eval->add_option("--dump", dump, "evaluate an existing prediction dump instead of a model");
  eval->add_option("--k", k, "candidates per window");
  eval->add_option("--select", select, "min_ade | min_fde | min_fde_then_ade");

  auto* pert = app.add_subcommand("perturb-eval", "observation-noise robustness study");
  add_common(pert, pert_flags);
  pert->add_option("--checkpoint", pert_ckpt, "model checkpoint")->required();
  pert->add_option("--sigma", sigma, "noise standard deviation in world units");
  pert->add_option("--k", k, "candidates per window");
  pert->add_option("--select", select, "min_ade | min_fde | min_fde_then_ade");

  auto* synth = app.add_subcommand("synth-scene", "write a generated scene in the four-column text format");
  add_common(synth, synth_flags);
  synth->add_option("--out", synth_out, "output file")->required();
  synth->add_option("--scene-id", synth_id, "scene id");

  std::vector<std::string> argv_storage{"trajpred"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    if (args.size() == 1 && args[0] == "--config-schema") {
      out << describe_schema();
      return 0;
    }
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    std::vector<std::string> extra;
    if (!select.empty()) extra.push_back("select=" + select);
    if (prep->parsed()) return cmd_prepare(resolve(prep_flags, {}), scenes, verify, out);
    if (pre->parsed()) {
      const RunConfig cfg = resolve(ae_flags, {});
      return cmd_pretrain_ae(cfg, make_run_dir(cfg, ae_flags, "pretrain-ae"), resume, out);
    }
    if (train->parsed()) {
      if (!ae_ckpt.empty()) extra.push_back("ae_checkpoint=" + ae_ckpt);
      if (k > 0) extra.push_back("k=" + std::to_string(k));
      if (ablate == "no_relation" || ablate == "baseline") extra.emplace_back("use_relation=false");
      if (ablate == "no_goal" || ablate == "baseline") extra.emplace_back("use_goal=false");
      const RunConfig cfg = resolve(train_flags, extra);
      return cmd_train(cfg, make_run_dir(cfg, train_flags, "train"), out);
    }
    if (eval->parsed()) {
      if (k > 0) extra.push_back("eval_k=" + std::to_string(k));
      if (eval_ckpt.empty() && dump.empty()) throw ConfigError("evaluate needs --checkpoint or --dump");
      const RunConfig cfg = resolve(eval_flags, extra);
      return cmd_evaluate(cfg, make_run_dir(cfg, eval_flags, "evaluate"), eval_ckpt, dump, out);
    }
    if (pert->parsed()) {
      if (k > 0) extra.push_back("eval_k=" + std::to_string(k));
      if (sigma >= 0.0) extra.push_back("perturb_sigma=" + num(sigma));
      const RunConfig cfg = resolve(pert_flags, extra);
      return cmd_perturb(cfg, make_run_dir(cfg, pert_flags, "perturb-eval"), pert_ckpt, out);
    }
    if (synth->parsed()) return cmd_synth(synth_out, resolve(synth_flags, {}), synth_id, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}

}  // namespace trajpred
