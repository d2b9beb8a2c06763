// SPDX-License-Identifier: Apache-2.0
//
// Acceptance harness. One PASS/FAIL line per criterion; exit status is
// nonzero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "trajpred/cli.hpp"
#include "trajpred/config.hpp"
#include "trajpred/evaluation.hpp"
#include "trajpred/goal.hpp"
#include "trajpred/nn/ops.hpp"
#include "trajpred/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <tuple>
#include <random>
#include <set>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace trajpred;

namespace {

// Pinned tolerances and budgets.
constexpr double kMetricTol = 1e-6;
constexpr int kMetricFixtures = 1000;
constexpr double kKlTol = 1e-9;
constexpr int kSampleDraws = 100000;
constexpr double kSampleMeanTol = 0.02;
constexpr double kSampleVarTol = 0.03;
constexpr double kGradTol = 1e-3;
constexpr int kGradParams = 30;
constexpr int kGatherConfigs = 100;
constexpr double kMassTol = 1e-3;
constexpr double kAdditivityTol = 1e-12;
constexpr double kOverfitMinAde = 0.05;
constexpr int kOverfitEpochs = 200;
constexpr double kAeReduction = 0.5;
constexpr int kAeEpochs = 20;
constexpr double kAblationImprovement = 0.20;
constexpr int kDeskEpochs = 30;
constexpr std::size_t kDeskTrainWindows = 1500;
constexpr double kRobustSigma = 0.1;
// "Same order of magnitude" as 0.2-0.6 m.
constexpr double kRobustLow = 0.02;
constexpr double kRobustHigh = 6.0;
constexpr double kStretchTol = 0.30;

// Per-epoch training logs on stderr when TRAJPRED_ACCEPTANCE_VERBOSE is set.
TrainHooks progress_hooks(const std::string& tag) {
  TrainHooks h;
  if (std::getenv("TRAJPRED_ACCEPTANCE_VERBOSE")) {
    h.on_epoch = [tag](const EpochLog& e) {
      std::cerr << tag << " epoch " << e.epoch << " loss " << e.loss_total << " (goal " << e.loss_goal << ", traj "
                << e.loss_traj << ", kld " << e.loss_kld << ") val " << e.val_min_ade << '\n';
    };
  }
  return h;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s << std::setprecision(prec) << v;
  return s.str();
}

// ---------------------------------------------------------------------------
// 1. Metrics against explicit-loop oracles.

double oracle_ade(const RowMat& p, const RowMat& y) {
  double acc = 0.0;
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    const double dx = p(t, 0) - y(t, 0);
    const double dy = p(t, 1) - y(t, 1);
    acc += std::sqrt(dx * dx + dy * dy);
  }
  return acc / static_cast<double>(y.rows());
}

double oracle_fde(const RowMat& p, const RowMat& y) {
  const Eigen::Index t = y.rows() - 1;
  return std::hypot(p(t, 0) - y(t, 0), p(t, 1) - y(t, 1));
}

// Closed-form Gaussian mixture; no log-sum-exp shortcut.
double oracle_kde_nll(const std::vector<RowMat>& samples, const RowMat& y, double floor) {
  const double n = static_cast<double>(samples.size());
  double total = 0.0;
  for (Eigen::Index t = 0; t < y.rows(); ++t) {
    double h[2];
    for (int d = 0; d < 2; ++d) {
      double m = 0.0;
      for (const auto& s : samples) m += s(t, d);
      m /= n;
      double ss = 0.0;
      for (const auto& s : samples) ss += (s(t, d) - m) * (s(t, d) - m);
      h[d] = std::pow(n, -1.0 / 6.0) * std::sqrt(ss / (n - 1.0));
    }
    double density = 0.0;
    for (const auto& s : samples) {
      const double u = (y(t, 0) - s(t, 0)) / h[0];
      const double v = (y(t, 1) - s(t, 1)) / h[1];
      density += std::exp(-0.5 * (u * u + v * v)) / (2.0 * M_PI * h[0] * h[1]);
    }
    total += -std::max(std::log(density / n), floor);
  }
  return total / static_cast<double>(y.rows());
}

Outcome criterion_metrics() {
  std::mt19937_64 rng(1001);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> pick_k(2, 20), pick_t(1, 12);
  double worst = 0.0;
  const auto track = [&](double a, double b) { worst = std::max(worst, std::abs(a - b)); };
  for (int trial = 0; trial < kMetricFixtures; ++trial) {
    const int k = pick_k(rng);
    const int steps = pick_t(rng);
    RowMat y(steps, 2);
    for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = g(rng);
    std::vector<RowMat> preds(static_cast<std::size_t>(k), RowMat(steps, 2));
    for (auto& p : preds) {
      for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = y.data()[i] + 1.5 * g(rng);
    }
    std::vector<double> a(preds.size()), f(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
      a[i] = oracle_ade(preds[i], y);
      f[i] = oracle_fde(preds[i], y);
      track(ade(preds[i], y), a[i]);
      track(fde(preds[i], y), f[i]);
    }
    std::size_t ia = 0, jf = 0;
    for (std::size_t i = 1; i < preds.size(); ++i) {
      if (a[i] < a[ia]) ia = i;
      if (f[i] < f[jf]) jf = i;
    }
    const auto sa = min_of_k(SelectMode::kMinAde, preds, y);
    const auto sf = min_of_k(SelectMode::kMinFde, preds, y);
    const auto sfa = min_of_k(SelectMode::kMinFdeThenAde, preds, y);
    track(sa.value, a[ia]);
    track(sf.value, f[jf]);
    track(sfa.value, a[jf]);
    if (sa.k != static_cast<int>(ia) || sf.k != static_cast<int>(jf) || sfa.k != static_cast<int>(jf)) {
      return {false, "selected index differs from oracle at fixture " + std::to_string(trial)};
    }
    track(kde_nll(preds, y, KdeOptions{1e-6, -20.0, std::nullopt}), oracle_kde_nll(preds, y, -20.0));
  }
  return {worst <= kMetricTol, "max |impl - oracle| = " + fmt(worst) + " over " + std::to_string(kMetricFixtures) +
                                   " fixtures (tol " + fmt(kMetricTol) + ")"};
}

// ---------------------------------------------------------------------------
// 2. KL closed forms and reparameterised sampling.

Outcome criterion_kl_sampling() {
  const auto v = [](std::initializer_list<double> x) {
    Eigen::VectorXd r(static_cast<Eigen::Index>(x.size()));
    Eigen::Index i = 0;
    for (double d : x) r[i++] = d;
    return r;
  };
  struct Case {
    Eigen::VectorXd mq, lq, mp, lp;
    double expected;
  };
  // KL(N(0, e) || N(0, 1)) = (e - 1 - 1) / 2.
  const std::vector<Case> cases{
      {v({0.3, -1.0}), v({0.2, -0.5}), v({0.3, -1.0}), v({0.2, -0.5}), 0.0},
      {v({1.0}), v({0.0}), v({0.0}), v({0.0}), 0.5},
      {v({0.0}), v({1.0}), v({0.0}), v({0.0}), 0.5 * (std::exp(1.0) - 2.0)},
  };
  double worst = 0.0;
  for (const auto& c : cases) worst = std::max(worst, std::abs(kld_value(c.mq, c.lq, c.mp, c.lp) - c.expected));
  // Batched graph op on the same cases.
  for (const auto& c : cases) {
    const auto row = [](const Eigen::VectorXd& x) { return nn::constant(Mat(x.transpose())); };
    const auto k = kld({row(c.mq), row(c.lq)}, {row(c.mp), row(c.lp)});
    worst = std::max(worst, std::abs(k->value(0, 0) - c.expected));
  }

  LatentDistribution d{nn::constant(Mat::Zero(1, 1)), nn::constant(Mat::Zero(1, 1))};
  nn::Rng rng(2002);
  const auto z = sample_latent(d, kSampleDraws, rng);
  const double mean = z->value.mean();
  const double var = (z->value.array() - mean).square().sum() / static_cast<double>(kSampleDraws - 1);
  const bool ok = worst <= kKlTol && std::abs(mean) <= kSampleMeanTol && std::abs(var - 1.0) <= kSampleVarTol;
  return {ok, "KL max error " + fmt(worst) + " (0, 0.5, " + fmt(0.5 * (std::exp(1.0) - 2.0), 6) + "); 1e5 draws mean " +
                  fmt(mean) + " var " + fmt(var)};
}

// ---------------------------------------------------------------------------
// 3. Finite-difference gradient checks.

Outcome criterion_gradients() {
  std::ostringstream detail;
  bool ok = true;
  const auto report = [&](const std::string& name, const testing::GradCheckResult& r) {
    detail << name << " " << r.checked - r.failures << "/" << r.checked << " (max rel " << fmt(r.max_rel_error, 2)
           << ") ";
    ok = ok && r.failures == 0 && r.checked >= 20;
  };

  {
    AutoencoderSpec spec;
    spec.map_height = 16;
    spec.map_width = 16;
    spec.channels = {4, 4};
    Autoencoder ae(spec, nn::Rng(3001));
    nn::Rng rng(3002);
    const RowMat maps = (standard_normal(3, 256, rng).array().abs() * 0.03).matrix();
    report("autoencoder", testing::gradient_check(ae.params().vars(), [&] { return ae.training_loss(maps); },
                                                  kGradParams, 3003, kGradTol));
  }
  {
    nn::ParameterSet ps;
    nn::Rng rng(3004);
    GoalSpec spec;
    spec.encoder_hidden = 6;
    spec.latent_dim = 3;
    spec.mlp_hidden = 7;
    MotionEncoders enc(ps, spec, rng);
    GoalModule goal(ps, spec, rng);
    const Mat x = standard_normal(8, 6, rng) * 0.5;
    const Mat y = standard_normal(12, 2, rng);
    const Mat eps = standard_normal(4, 3, rng);
    const Mat target = standard_normal(4, 2, rng);
    auto loss = [&] {
      const auto hx = encode_sequence(enc.history, sequence_steps(x));
      const auto hy = encode_sequence(enc.future, sequence_steps(y));
      const auto q = goal.joint_posterior(hx, hy);
      const auto p = goal.prior(hx);
      const auto goals = goal.decode_goals(sample_latent(q, 4, eps), hx, 4);
      return nn::add(nn::mean(nn::square(nn::sub(goals, nn::constant(target)))), nn::mean(kld(q, p)));
    };
    report("goal", testing::gradient_check(ps.vars(), loss, kGradParams, 3005, kGradTol));
  }
  {
    const auto spec = ModelSpec::tiny();
    TrajectoryModel model(spec, 3006);
    const auto set = testing::sample_set_for(model, testing::small_recording(3007), 3);
    const auto idx = testing::all_indices(set);
    const Batch batch = make_batch(set, idx, true);
    auto loss = [&] {
      nn::Rng rng(3008);
      const auto fwd = model.forward(batch.inputs, 3, rng, true);
      return batch_loss(model, fwd, batch.inputs, 0.5, LossMinMode::kGoalFirst).total;
    };
    report("end-to-end", testing::gradient_check(model.params().vars(), loss, kGradParams + 10, 3009, kGradTol));
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 4. Masking gather against an index loop.

Outcome criterion_gather() {
  std::mt19937_64 rng(4001);
  nn::ParameterSet ps;
  nn::Rng init(4002);
  int exact = 0;
  for (int trial = 0; trial < kGatherConfigs; ++trial) {
    const int h = 1 + static_cast<int>(rng() % 10);
    const int w = 1 + static_cast<int>(rng() % 10);
    const int tau = 1 + static_cast<int>(rng() % 12);
    const int ch = 1 + static_cast<int>(rng() % 5);
    IntraRegionalDynamics dyn;
    dyn.height = h;
    dyn.width = w;
    nn::Rng vals(rng());
    for (int t = 0; t < tau; ++t) dyn.steps.push_back(nn::constant(standard_normal(h * w, ch, vals)));
    RegionPath path;
    for (int t = 0; t < tau; ++t) path.cells.emplace_back(static_cast<int>(rng() % h), static_cast<int>(rng() % w));

    RowMat brute(tau, ch);
    for (int t = 0; t < tau; ++t) {
      const auto [r, c] = path.cells[static_cast<std::size_t>(t)];
      for (int j = 0; j < ch; ++j) brute(t, j) = dyn.steps[static_cast<std::size_t>(t)]->value(r * w + c, j);
    }
    const bool gathered = gather_masked(dyn, path) == brute;

    // The relation vector is the extractor run over exactly that sequence.
    RecurrentCell extractor(ps, "x" + std::to_string(trial), trial % 2 ? CellKind::kGru : CellKind::kLstm, ch, 4, init);
    auto state = extractor.zero_state(1);
    for (int t = 0; t < tau; ++t) state = extractor.step(nn::constant(brute.row(t)), state);
    const bool related = mask_and_relate(dyn, path, extractor)->value == state.h->value;
    if (gathered && related) ++exact;
  }
  return {exact == kGatherConfigs,
          std::to_string(exact) + "/" + std::to_string(kGatherConfigs) + " random (h, w, tau) configurations exact"};
}

// ---------------------------------------------------------------------------
// 5. Density-field properties.

Outcome criterion_density() {
  std::mt19937_64 rng(5001);
  SceneGeometry g;
  g.world_min = Point(0.0, 0.0);
  g.world_max = Point(20.0, 20.0);
  g.height = 80;
  g.width = 80;
  g.margin = 0.0;
  std::uniform_real_distribution<double> anywhere(-2.0, 22.0);
  int additivity = 0, mass = 0, determinism = 0, nonneg = 0, trials = 0, mass_trials = 0;
  double worst_mass = 0.0;
  for (double sigma : {1.0, 2.0, 3.0}) {
    // Interior: kernel support (4 sigma) stays on the grid.
    const double pad = (4.0 * sigma + 1.0) * 20.0 / 80.0;
    std::uniform_real_distribution<double> interior(pad, 20.0 - pad);
    for (int trial = 0; trial < 100; ++trial, ++trials) {
      std::vector<Point> a, b;
      for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) a.emplace_back(anywhere(rng), anywhere(rng));
      for (int i = 0, n = static_cast<int>(rng() % 6); i < n; ++i) b.emplace_back(anywhere(rng), anywhere(rng));
      std::vector<Point> ab = a;
      ab.insert(ab.end(), b.begin(), b.end());
      const RowMat fa = render_density_frame(a, g, sigma);
      const RowMat fb = render_density_frame(b, g, sigma);
      const RowMat fab = render_density_frame(ab, g, sigma);
      if ((fab - fa - fb).cwiseAbs().maxCoeff() <= kAdditivityTol) ++additivity;
      if (render_density_frame(ab, g, sigma) == fab) ++determinism;
      if (fab.minCoeff() >= 0.0) ++nonneg;

      const Point p(interior(rng), interior(rng));
      const std::vector<Point> one{p};
      const double err = std::abs(render_density_frame(one, g, sigma).sum() - 1.0);
      worst_mass = std::max(worst_mass, err);
      ++mass_trials;
      if (err <= kMassTol) ++mass;
    }
  }
  const bool ok = additivity == trials && determinism == trials && nonneg == trials && mass == mass_trials;
  return {ok, "additivity " + std::to_string(additivity) + "/" + std::to_string(trials) + ", determinism " +
                  std::to_string(determinism) + ", nonnegativity " + std::to_string(nonneg) + ", unit mass " +
                  std::to_string(mass) + "/" + std::to_string(mass_trials) + " (max error " + fmt(worst_mass) + ")"};
}

// ---------------------------------------------------------------------------
// 6. Overfitting a 10-sequence fixture with the full model.

Outcome criterion_overfit() {
  const ModelSpec spec;  // full model, default widths
  TrajectoryModel model(spec, 6001);
  const auto rec = testing::small_recording(6002, 80);
  const auto geometry = SceneGeometry::from_recording(rec, spec.autoencoder.map_height, spec.autoencoder.map_width);
  SceneContext ctx = make_scene_context(rec, geometry, kDefaultSigmaMap);

  // Autoencoder first, on this scene's frames.
  const RowMat frames = ctx.maps;
  const double initial = model.autoencoder().training_loss(frames)->value(0, 0);
  AeTrainOptions ae_opts;
  ae_opts.epochs = kAeEpochs;
  ae_opts.lr0 = 3e-3;
  ae_opts.seed = 6003;
  const auto ae_hist = train_autoencoder(model.autoencoder(), frames, ae_opts);
  const double ae_ratio = ae_hist.back() / initial;

  attach_latents(ctx, model.autoencoder());
  auto windows = build_windows(rec, WindowOptions{spec.obs_len, spec.pred_len, 1});
  std::vector<SequenceSample> ten;
  for (std::size_t i = 0; i < 10 && i < windows.size(); ++i) ten.push_back(windows[i * windows.size() / 10]);
  SampleSet set;
  set.add_samples(set.add_scene(std::move(ctx)), std::move(ten));

  TrainConfig cfg;
  cfg.epochs = kOverfitEpochs;
  cfg.batch_size = 1;
  cfg.lr0 = 1e-2;
  cfg.lr_gamma = 0.98;
  cfg.kl.ramp_epochs = 50;
  cfg.seed = 6004;
  train_full(model, set, nullptr, cfg, progress_hooks("overfit"));
  const auto score = score_min_of_k(model, set, 20, SelectMode::kMinAde, 6005);
  const bool ok = set.size() == 10 && score.min_ade < kOverfitMinAde && ae_ratio <= kAeReduction;
  return {ok, "train minADE@20 " + fmt(score.min_ade) + " m (< " + fmt(kOverfitMinAde) + "); autoencoder loss " +
                  fmt(initial) + " -> " + fmt(ae_hist.back()) + " after " + std::to_string(kAeEpochs) +
                  " epochs (ratio " + fmt(ae_ratio, 3) + ")"};
}

// ---------------------------------------------------------------------------
// 7 and 8. Desk-scale ablation and robustness on a synthetic street scene.

struct DeskScale {
  SceneRecording train_rec, test_rec;
  std::vector<SequenceSample> fit, val, test;
  TrainConfig cfg;
  double baseline_ade = 0.0, goal_ade = 0.0;
  bool ready = false;
};

SampleSet windows_set(const SceneRecording& rec, std::vector<SequenceSample> windows, const Autoencoder* ae) {
  SceneContext ctx = make_scene_context(rec, SceneGeometry::from_recording(rec), kDefaultSigmaMap);
  if (ae) attach_latents(ctx, *ae, true);
  SampleSet set;
  set.add_samples(set.add_scene(std::move(ctx)), std::move(windows));
  return set;
}

EvalConfig desk_eval() {
  EvalConfig ev;
  ev.k = 20;
  ev.kde_samples = 0;
  ev.perturb_sigma = kRobustSigma;
  ev.seed = 7004;
  return ev;
}

/// Trains `spec` on the desk-scale scene and restores its best validation epoch.
std::unique_ptr<TrajectoryModel> train_desk_model(const DeskScale& d, const ModelSpec& spec, SampleSet& test) {
  auto model = std::make_unique<TrajectoryModel>(spec, 7005);
  const Autoencoder* ae = nullptr;
  if (spec.use_relation) {
    SceneContext ctx = make_scene_context(d.train_rec, SceneGeometry::from_recording(d.train_rec), kDefaultSigmaMap);
    AeTrainOptions ao;
    ao.epochs = 2;
    ao.seed = 7006;
    train_autoencoder(model->autoencoder(), RowMat(ctx.maps.topRows(std::min<Eigen::Index>(200, ctx.maps.rows()))),
                      ao);
    ae = &model->autoencoder();
  }
  const SampleSet train = windows_set(d.train_rec, d.fit, ae);
  const SampleSet val = windows_set(d.train_rec, d.val, ae);
  test = windows_set(d.test_rec, d.test, ae);
  const auto result = train_full(*model, train, &val, d.cfg, progress_hooks("desk"));
  const auto vars = model->params().vars();
  for (std::size_t i = 0; i < vars.size(); ++i) vars[i]->value = result.best_params[i];
  return model;
}

DeskScale& desk_scale() {
  static DeskScale d;
  if (d.ready) return d;
  SyntheticSceneOptions so;
  so.scene_id = "street_train";
  so.seed = 7001;
  so.steps = 700;
  d.train_rec = generate_synthetic_scene(so);
  std::tie(d.fit, d.val) = carve_validation(build_windows(d.train_rec, {}), 0.1);
  if (d.fit.size() > kDeskTrainWindows) d.fit.resize(kDeskTrainWindows);
  so.scene_id = "street_test";
  so.seed = 7002;
  so.steps = 300;
  d.test_rec = generate_synthetic_scene(so);
  d.test = build_windows(d.test_rec, {});

  d.cfg.epochs = kDeskEpochs;
  d.cfg.kl.ramp_epochs = kDeskEpochs / 2;
  d.cfg.seed = 7003;
  for (bool use_goal : {false, true}) {
    ModelSpec spec;
    spec.use_relation = false;
    spec.use_goal = use_goal;
    SampleSet test;
    const auto model = train_desk_model(d, spec, test);
    (use_goal ? d.goal_ade : d.baseline_ade) = evaluate_model(*model, test, desk_eval()).aggregate.min_ade;
  }
  d.ready = true;
  return d;
}

Outcome criterion_ablation() {
  auto& d = desk_scale();
  const double improvement = (d.baseline_ade - d.goal_ade) / d.baseline_ade;
  return {d.goal_ade < d.baseline_ade && improvement >= kAblationImprovement,
          std::to_string(d.fit.size()) + " training windows, " + std::to_string(kDeskEpochs) +
              " epochs: held-out minADE@20 Baseline " + fmt(d.baseline_ade) + " -> Baseline+G " + fmt(d.goal_ade) +
              " (" + fmt(100.0 * improvement, 3) + "% lower, need >= " + fmt(100.0 * kAblationImprovement) + "%)"};
}

Outcome criterion_robustness() {
  auto& d = desk_scale();
  SampleSet test;
  const auto model = train_desk_model(d, ModelSpec{}, test);
  const auto report = robustness_study(*model, test, desk_eval());
  const auto& r = *report.robustness;
  const bool ok = r.ade_increase > 0.0 && r.ade_increase >= kRobustLow && r.ade_increase <= kRobustHigh;
  return {ok, "full model, sigma " + fmt(kRobustSigma) + " m: minADE@20 " + fmt(r.clean.min_ade) + " -> " +
                  fmt(r.perturbed.min_ade) + " (increase " + fmt(r.ade_increase) + ", FDE increase " +
                  fmt(r.fde_increase) + "; band [" + fmt(kRobustLow) + ", " + fmt(kRobustHigh) + "])"};
}

// ---------------------------------------------------------------------------
// 9. Full-scale numbers: documented recipe, optional comparison.

Outcome criterion_stretch() {
  const fs::path root = TRAJPRED_SOURCE_DIR;
  const std::string readme = testing::read_file(root / "README.md");
  const bool documented = readme.find("## Full reproduction") != std::string::npos;
  int configs = 0;
  for (const char* name : {"ethucy_full.json", "sdd_full.json"}) {
    const auto path = root / "tools" / "configs" / name;
    if (!fs::exists(path)) continue;
    RunConfig::resolve(path, {}).validate();
    ++configs;
  }
  if (!documented || configs != 2) return {false, "full-reproduction recipe or its configs are missing"};

  // Reports from a completed full run can be checked against the targets.
  const char* results = std::getenv("TRAJPRED_FULL_RESULTS");
  if (!results) {
    return {true, "recipe documented and configs validate; full-scale numbers are a stretch target, not run here "
                  "(set TRAJPRED_FULL_RESULTS to compare)"};
  }
  const auto j = nlohmann::json::parse(testing::read_file(results));
  const std::vector<std::tuple<std::string, double, double>> targets{{"ethucy", 0.27, 0.46}, {"sdd", 7.21, 12.99}};
  std::ostringstream detail;
  bool ok = true;
  for (const auto& [name, t_ade, t_fde] : targets) {
    if (!j.contains(name)) continue;
    const double a = j[name]["min_ade"].get<double>();
    const double f = j[name]["min_fde"].get<double>();
    const bool hit = std::abs(a - t_ade) <= kStretchTol * t_ade && std::abs(f - t_fde) <= kStretchTol * t_fde;
    ok = ok && hit;
    detail << name << " " << fmt(a) << "/" << fmt(f) << " vs " << t_ade << "/" << t_fde << (hit ? " ok; " : " off; ");
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------------------
// 10. Bit-identical command-line re-runs.

std::map<std::string, std::string> cli_outputs(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  const auto cfg = testing::write_json(root / "config.json", testing::tiny_cli_config(root)).string();
  std::ostringstream out, err;
  const auto run = [&](std::vector<std::string> args) {
    args.push_back("--deterministic");
    if (run_cli(args, out, err) != 0) throw std::runtime_error("command failed: " + args[0] + ": " + err.str());
  };
  run({"prepare-data", "--config", cfg});
  run({"pretrain-ae", "--config", cfg, "--run-dir", (root / "ae").string()});
  run({"train", "--config", cfg, "--run-dir", (root / "train").string(), "--ae-checkpoint",
       (root / "ae" / "autoencoder.ckpt").string()});
  run({"evaluate", "--config", cfg, "--run-dir", (root / "eval").string(), "--checkpoint",
       (root / "train" / "best.ckpt").string()});
  run({"perturb-eval", "--config", cfg, "--run-dir", (root / "perturb").string(), "--checkpoint",
       (root / "train" / "best.ckpt").string()});
  std::map<std::string, std::string> files;
  for (const char* rel : {"ae/ae_log.csv", "train/metrics.csv", "eval/report.json", "eval/predictions.jsonl",
                          "perturb/report.json"}) {
    files[rel] = testing::read_file(root / rel);
  }
  fs::remove_all(root);
  return files;
}

Outcome criterion_determinism() {
  const fs::path root = fs::temp_directory_path() / "trajpred_acceptance_determinism";
  unsetenv(kCacheDirEnv);
  const auto first = cli_outputs(root);
  const auto second = cli_outputs(root);
  int same = 0;
  std::string differing;
  for (const auto& [name, bytes] : first) {
    if (!bytes.empty() && second.at(name) == bytes) {
      ++same;
    } else {
      differing += " " + name;
    }
  }
  const bool ok = same == static_cast<int>(first.size());
  return {ok, ok ? "5 commands re-run: " + std::to_string(same) + " logged outputs bit-identical"
                 : "differs:" + differing};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metric oracle equivalence", criterion_metrics},
      {"KL and sampling correctness", criterion_kl_sampling},
      {"gradient checks", criterion_gradients},
      {"gather/masking oracle", criterion_gather},
      {"density-field properties", criterion_density},
      {"overfit sanity", criterion_overfit},
      {"ablation ordering", criterion_ablation},
      {"robustness direction", criterion_robustness},
      {"full-scale stretch targets", criterion_stretch},
      {"determinism", criterion_determinism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << "): " << o.detail
              << " [" << std::fixed << std::setprecision(1) << secs << " s]" << std::defaultfloat << std::endl;
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
