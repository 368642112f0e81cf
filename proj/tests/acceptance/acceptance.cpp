// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 when any fails.
// Arguments select criteria by number (default: all).

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "classifier_grad_check.hpp"
#include "equalize_oracle.hpp"
#include "gan_grad_check.hpp"
#include "interpret_oracles.hpp"
#include "koa/cli/cli.hpp"
#include "koa/common/random.hpp"
#include "koa/dataset/phantom.hpp"
#include "koa/evaluation/attack.hpp"
#include "koa/evaluation/metrics.hpp"
#include "koa/gan/losses.hpp"
#include "koa/interpret/embedding.hpp"
#include "koa/interpret/gradcam.hpp"
#include "koa/interpret/overlay.hpp"
#include "koa/preprocess/preprocess.hpp"
#include "table_oracle.hpp"
#include "temp_dir.hpp"

using namespace koa;
using data::Stage;
namespace fs = std::filesystem;

namespace {

class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    ++count_;
    if (!ok) failures_.push_back(what);
  }
  void note(const std::string& s) { notes_.push_back(s); }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string s = std::to_string(count_ - failures_.size()) + "/" + std::to_string(count_) + " checks";
    for (const auto& n : notes_) s += "; " + n;
    for (const auto& f : failures_) s += "\n    failed: " + f;
    return s;
  }

 private:
  std::size_t count_ = 0;
  std::vector<std::string> failures_;
  std::vector<std::string> notes_;
};

std::string num(double v, int decimals = 4) { return eval::fixed(v, decimals); }

bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Published network tables.
void architecture(Checks& c) {
  const auto t0 = std::chrono::steady_clock::now();
  TempDir tmp;
  std::ostringstream out, err;
  const int code = cli::run_cli({"--out", tmp.path().string(), "verify-arch"}, out, err);
  c.expect(code == 0, "verify-arch exit status " + std::to_string(code) + ": " + err.str());
  c.expect(out.str().find("generator 11,370,881 / discriminator 11,032,193") != std::string::npos,
           "verify-arch totals line");

  const gan::CycleGanConfig cfg;
  const auto g = gan::build_generator(cfg);
  const auto d = gan::build_discriminator(cfg);
  c.expect(g.total_params == 11'370'881, "generator total " + std::to_string(g.total_params));
  c.expect(d.total_params == 11'032'193, "discriminator total " + std::to_string(d.total_params));
  c.expect(gan::compare_to_reference(g, gan::reference_generator_table(), 9).empty(), "generator rows");
  c.expect(gan::compare_to_reference(d, gan::reference_discriminator_table(), 0).empty(), "discriminator rows");

  // Every distinct non-zero per-layer count is one of the tabulated values, and each value occurs.
  auto counts = [](const gan::NetworkSpec& s) {
    std::set<std::int64_t> out;
    for (const auto& l : s.layers)
      if (l.params) out.insert(l.params);
    return out;
  };
  const std::set<std::int64_t> gen_expected{3136, 73728, 294912, 589824, 512, 3137, 256, 128};
  const std::set<std::int64_t> disc_expected{2176, 524288, 2097152, 8388608, 16385, 512, 1024, 2048};
  for (auto v : {3136, 73728, 294912, 589824, 512, 3137}) c.expect(counts(g).count(v), "generator row " + std::to_string(v));
  for (auto v : {2176, 524288, 2097152, 8388608, 16385}) c.expect(counts(d).count(v), "discriminator row " + std::to_string(v));
  for (auto v : counts(g)) c.expect(gen_expected.count(v), "unexpected generator count " + std::to_string(v));
  for (auto v : counts(d)) c.expect(disc_expected.count(v), "unexpected discriminator count " + std::to_string(v));
  const double t = seconds_since(t0);
  c.expect(t < 10.0, "runtime " + num(t, 2) + " s");
  c.note("generator " + std::to_string(g.total_params) + ", discriminator " + std::to_string(d.total_params));
}

// 2. Contrast equalization against the brute-force transcription.
void equalization(Checks& c) {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  int mismatches = 0, non_monotone = 0, non_idempotent = 0, degenerate = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    GrayImage x(8, 8);
    // Mix of full-range, narrow-range and constant images.
    const int lo = uniform_int(rng, 0, 255);
    const int hi = trial % 50 == 0 ? lo : uniform_int(rng, lo, 255);
    for (auto& v : x.pixels) v = static_cast<std::uint8_t>(uniform_int(rng, lo, hi));
    const auto out = prep::equalize_contrast(x);
    degenerate += out.degenerate;
    if (out.image != test_oracle::brute_force_equalize(x)) ++mismatches;
    bool mono = true;
    for (std::size_t i = 0; i < x.pixels.size(); ++i)
      for (std::size_t j = 0; j < x.pixels.size(); ++j)
        if (x.pixels[i] <= x.pixels[j] && out.image.pixels[i] > out.image.pixels[j]) mono = false;
    non_monotone += !mono;
    if (prep::equalize_contrast(out.image).image != out.image) ++non_idempotent;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " oracle mismatches");
  c.expect(non_monotone == 0, std::to_string(non_monotone) + " non-monotone samples");
  c.expect(non_idempotent == 0, std::to_string(non_idempotent) + " non-idempotent samples");
  const double t = seconds_since(t0);
  c.expect(t < 30.0, "runtime " + num(t, 2) + " s");
  c.note("1000 images, " + std::to_string(degenerate) + " constant");
}

// 3. Loss hand examples and linearity of the total in the cycle weight.
void losses(Checks& c) {
  using namespace gan;
  auto full = [](double v) { return torch::full({1, 1, 2, 2}, v, torch::kFloat64); };
  auto s = [](double v) { return torch::tensor(v, torch::kFloat64); };
  auto val = [](const torch::Tensor& t) { return t.item<double>(); };
  constexpr double tol = 1e-9;

  c.expect(near(val(adversarial_loss(full(1), full(0), AdversarialRole::Discriminator)), 0.0, tol), "D perfect");
  c.expect(near(val(adversarial_loss(std::nullopt, full(1), AdversarialRole::Generator)), 0.0, tol), "G perfect");
  c.expect(near(val(adversarial_loss(full(0.5), full(0.5), AdversarialRole::Discriminator)), 0.5, tol), "D at 0.5");
  c.expect(near(val(adversarial_loss(std::nullopt, full(0), AdversarialRole::Generator)), 1.0, tol), "G at 0");
  // Patch map {0, 0.5, 1, 1.5} against target 1: mean of {1, 0.25, 0, 0.25}.
  const auto ramp = torch::tensor({0.0, 0.5, 1.0, 1.5}, torch::kFloat64).view({1, 1, 2, 2});
  c.expect(near(val(adversarial_loss(std::nullopt, ramp, AdversarialRole::Generator)), 0.375, tol), "G on ramp");
  c.expect(near(val(adversarial_loss(ramp, ramp, AdversarialRole::Discriminator)), 0.375 + 0.875, tol), "D on ramp");

  const auto x = torch::tensor({0.1, -0.2, 0.3, 0.4}, torch::kFloat64).view({1, 1, 2, 2});
  const auto y = torch::tensor({-0.5, 0.5, 0.0, 1.0}, torch::kFloat64).view({1, 1, 2, 2});
  c.expect(near(val(cycle_loss(x, x, y, y)), 0.0, tol), "cycle identity");
  c.expect(near(val(cycle_loss(x, x + 0.1, y, y - 0.3)), 0.4, tol), "cycle offsets");
  c.expect(near(val(identity_loss(y + 0.25, y)), 0.25, tol), "identity offset");
  c.expect(near(val(identity_loss(x, y)), (0.6 + 0.7 + 0.3 + 0.6) / 4, tol), "identity hand mean");

  GeneratorLossParts p{s(0.3), s(0.7), s(0.05), s(0.02), s(0.01), s(0.04)};
  // 1.0 + 10 * 0.07 + 5 * 0.05
  c.expect(near(val(total_generator_loss(p, {10.0, 5.0})), 1.95, tol), "total with default weights");
  c.expect(near(val(generator_g_loss(p, {})) + val(generator_f_loss(p, {})), val(total_generator_loss(p, {})), tol),
           "G and F shares sum to the total");
  CycleGanConfig cfg;
  c.expect(cfg.identity_weight() == 5.0, "identity weight 0.5 * 10");
  for (double lambda : {0.0, 1.0, 10.0, 37.5}) {
    const double t = val(total_generator_loss(p, {lambda, 5.0}));
    c.expect(near(t, 1.0 + lambda * 0.07 + 5.0 * 0.05, tol), "linearity at lambda " + num(lambda, 1));
  }
  const double t1 = val(total_generator_loss(p, {3.0, 5.0})), t2 = val(total_generator_loss(p, {6.0, 5.0})),
               t0 = val(total_generator_loss(p, {0.0, 5.0}));
  c.expect(near(t2 - t0, 2 * (t1 - t0), tol), "doubling lambda doubles the cycle contribution");
}

// 4. Finite-difference gradient checks at every parameter entry.
void gradients(Checks& c) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto g = test_oracle::gan_gradient_check(1);
  c.expect(g.generators.max_rel_error < 1e-3, "generators " + num(g.generators.max_rel_error, 8) + " at " + g.generators.worst);
  c.expect(g.discriminators.max_rel_error < 1e-3,
           "discriminators " + num(g.discriminators.max_rel_error, 8) + " at " + g.discriminators.worst);
  const auto k = test_oracle::classifier_gradient_check(1);
  c.expect(k.max_rel_error < 1e-3, "classifier " + num(k.max_rel_error, 8) + " at " + k.worst);
  const double t = seconds_since(t0);
  c.expect(t < 300.0, "runtime " + num(t, 1) + " s");
  c.note("max rel error G/F " + num(g.generators.max_rel_error, 8) + " over " + std::to_string(g.generators.checked) +
         ", D " + num(g.discriminators.max_rel_error, 8) + " over " + std::to_string(g.discriminators.checked) +
         ", classifier " + num(k.max_rel_error, 8) + " over " + std::to_string(k.checked) + " entries; " + num(t, 1) +
         " s");
}

std::vector<GrayImage> prepared(Stage s, std::size_t n, std::uint64_t seed, const std::string& prefix) {
  data::PhantomCorpusOptions o;
  o.size = 64;
  o.noise_sigma = 0.0;
  std::vector<GrayImage> out;
  for (const auto& r : data::generate_phantom_cohort(s, n, seed, o, prefix))
    out.push_back(prep::preprocess_pipeline(r).image);
  return out;
}

// 5. Phantom end to end: CycleGAN direction on the gap oracle, then the one-shot attack.
void phantom_end_to_end(Checks& c) {
  torch::set_num_threads(1);
  const auto t0 = std::chrono::steady_clock::now();
  const auto x = prepared(Stage::NoneDoubtful, 600, 101, "GX");
  const auto y = prepared(Stage::ModerateSevere, 600, 102, "GY");
  const auto vx = prepared(Stage::NoneDoubtful, 16, 103, "VX");
  const auto vy = prepared(Stage::ModerateSevere, 16, 104, "VY");

  gan::CycleGanConfig g;
  g.image_size = 64;
  g.base_filters = 16;
  g.disc_base_filters = 16;
  g.residual_blocks = 3;
  g.batch_size = 1;
  g.epochs = 10;
  constexpr std::int64_t kSteps = 2000;
  static_assert(kSteps <= 5000);
  gan::CycleTrainState state(g, 7);
  gan::train_cycle_gan(state, gan::to_model_range(x), gan::to_model_range(y), gan::to_model_range(vx),
                       gan::to_model_range(vy), {.max_steps = kSteps});
  state.nets.train(false);
  const double t_gan = seconds_since(t0);

  // (a) Gap oracle on held-out phantoms.
  const auto tx = prepared(Stage::NoneDoubtful, 60, 105, "TX");
  const auto ty = prepared(Stage::ModerateSevere, 60, 106, "TY");
  int narrowed = 0, widened = 0;
  for (const auto& im : tx)
    narrowed += data::measure_gap_width(gan::transform(im, gan::Direction::TowardFuture, state.nets)) <
                data::measure_gap_width(im);
  for (const auto& im : ty)
    widened += data::measure_gap_width(gan::transform(im, gan::Direction::TowardPast, state.nets)) >
               data::measure_gap_width(im);
  const double f_narrow = narrowed / 60.0, f_widen = widened / 60.0;
  c.expect(f_narrow >= 0.7, "gap narrows for " + num(f_narrow, 3) + " of TowardFuture transforms");
  c.expect(f_widen >= 0.7, "gap widens for " + num(f_widen, 3) + " of TowardPast transforms");

  // (b) Classifier on clean phantoms, then the attack on the top-50 cohorts.
  cnn::LabeledSet train, val, test;
  std::uint64_t seed = 200;
  for (auto s : data::kAllStages) {
    for (auto& [set, n] : {std::pair{&train, 300}, {&val, 60}, {&test, 100}}) {
      auto imgs = prepared(s, static_cast<std::size_t>(n), seed++, "C" + std::to_string(seed));
      for (auto& im : imgs) {
        set->images.push_back(std::move(im));
        set->labels.push_back(s);
      }
    }
  }
  auto cfg = cnn::ClassifierConfig{};
  cfg.lr = 1e-3;
  auto model = cnn::train_classifier(train, val, cfg, 11).model;
  const auto probs = cnn::predict_batch(model, test.images);
  std::vector<Stage> pred;
  for (const auto& p : probs)
    pred.push_back(data::stage_from_index(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin())));
  const double acc = eval::confusion_and_report(test.labels, pred).report.accuracy;
  c.expect(acc >= 0.9, "clean test accuracy " + num(acc, 3));

  std::string flips;
  for (const auto& [orig, dir, target] : {std::tuple{Stage::NoneDoubtful, gan::Direction::TowardFuture, Stage::ModerateSevere},
                                          {Stage::ModerateSevere, gan::Direction::TowardPast, Stage::NoneDoubtful}}) {
    std::vector<GrayImage> pool;
    for (std::size_t i = 0; i < test.images.size(); ++i)
      if (test.labels[i] == orig) pool.push_back(test.images[i]);
    const auto ranked = eval::rank_by_confidence(model, pool, orig, 50);
    std::vector<eval::CohortImage> cohort;
    for (const auto& r : ranked.items) cohort.push_back({std::to_string(r.index), pool[r.index]});
    const auto report = eval::one_shot_attack(state.nets, model, cohort, orig, dir);
    const double f = report.flip_fraction(target);
    c.expect(cohort.size() == 50, "cohort size " + std::to_string(cohort.size()));
    c.expect(f >= 0.6, std::string(data::stage_name(orig)) + " " + std::string(gan::direction_name(dir)) +
                           " flips to the end class for " + num(f, 3));
    flips += std::string(flips.empty() ? "" : ", ") + std::string(gan::direction_name(dir)) + " flip " + num(f, 2);
  }
  const double t = seconds_since(t0);
  c.note(std::to_string(kSteps) + " CycleGAN steps; gap narrows " + num(f_narrow, 2) + ", widens " + num(f_widen, 2) +
         "; classifier accuracy " + num(acc, 3) + "; " + flips + "; GAN " + num(t_gan, 0) + " s, total " + num(t, 0) + " s");
}

// 6. Metrics hand examples and the published tables.
void metrics(Checks& c) {
  using namespace eval;
  const auto A = Stage::NoneDoubtful, B = Stage::Mild, C = Stage::ModerateSevere;
  {
    const std::vector<Stage> t{A, A, B, B, C, C}, p{A, B, B, B, C, A};
    const auto e = confusion_and_report(t, p);
    const auto& r = e.report.per_class;
    c.expect(e.matrix.counts[0][0] == 1 && e.matrix.counts[0][1] == 1 && e.matrix.counts[1][1] == 2 &&
                 e.matrix.counts[2][2] == 1 && e.matrix.counts[2][0] == 1,
             "six-sample confusion counts");
    c.expect(r[0].precision == 0.5 && r[0].recall == 0.5, "class 0 precision/recall");
    c.expect(r[1].precision == 2.0 / 3 && r[1].recall == 1.0 && near(r[1].f1, 0.8, 1e-15), "class 1 metrics");
    c.expect(r[2].precision == 1.0 && r[2].recall == 0.5, "class 2 precision/recall");
    c.expect(e.report.accuracy == 4.0 / 6, "accuracy 4/6");
    c.expect(near(e.report.weighted.recall, e.report.accuracy, 1e-15), "weighted recall equals accuracy");
  }
  {
    const std::vector<Stage> t{A, A, C}, p{A, A, A};
    const auto r = confusion_and_report(t, p).report;
    c.expect(r.per_class[1].precision == 0.0 && r.per_class[1].precision_undefined && r.per_class[1].recall_undefined,
             "zero-support class reported as 0 with a flag");
  }
  {
    const std::vector<double> s{0.9, 0.4, 0.6, 0.1};
    const bool pos[] = {true, true, false, false};
    c.expect(*auc_mann_whitney(s, pos) == 0.75, "AUC 0.75 hand case");
    const std::vector<double> tied{0.5, 0.5, 0.5, 0.5};
    const bool tpos[] = {true, false, true, false};
    c.expect(*auc_mann_whitney(tied, tpos) == 0.5, "AUC ties at 0.5");
    const bool all[] = {true, true, true, true};
    c.expect(!auc_mann_whitney(s, all).has_value(), "AUC missing without negatives");
  }
  const std::vector<double> prec{0.877, 0.601, 0.873}, sup{8278 * 0.15, 3100 * 0.15, 2756 * 0.15};
  const double w = weighted_average(prec, sup);
  c.expect(near(w, 0.815, 0.002), "weighted precision " + num(w, 4));
  c.expect(near(w, test_oracle::table2_weighted_precision(), 1e-12), "weighted precision oracle");

  // Cohort sizes come from the denominator search (117, 41) or are known (100, 100).
  std::vector<AttackReport> reports;
  const std::tuple<Stage, gan::Direction> rows[] = {{A, gan::Direction::TowardFuture},
                                                    {C, gan::Direction::TowardPast},
                                                    {B, gan::Direction::TowardFuture},
                                                    {B, gan::Direction::TowardPast}};
  const auto& printed = test_oracle::printed_attack_rows();
  for (std::size_t i = 0; i < printed.size(); ++i) {
    std::array<std::int64_t, 3> counts{};
    if (printed[i].cohort == 0) {
      const auto r = test_oracle::denominator_search(printed[i].hundredths);
      c.expect(r.has_value(), "denominator search row " + std::to_string(i));
      if (!r) return;
      for (int k = 0; k < 3; ++k) counts[k] = r->counts[k];
      c.expect(r->total == (i == 0 ? 117 : 41), "cohort size " + std::to_string(r->total));
    } else {
      for (int k = 0; k < 3; ++k) counts[k] = printed[i].hundredths[k] * printed[i].cohort / 10000;
    }
    reports.push_back(tabulate(std::get<0>(rows[i]), std::get<1>(rows[i]), counts));
  }
  const auto table = render_attack_table(reports);
  int found = 0;
  for (const char* pct : {"5.13%", "11.11%", "83.76%", "75.61%", "19.51%", "4.88%", "24.00%", "76.00%", "31.00%", "69.00%"}) {
    const bool ok = table.find(pct) != std::string::npos;
    found += ok;
    c.expect(ok, std::string("printed percentage ") + pct);
  }
  c.note(std::to_string(found) + "/10 printed percentages reproduced; weighted precision " + num(w, 4));
}

// 7. Interpretability suite.
void interpretability(Checks& c) {
  {
    auto f = torch::zeros({2, 2, 2}, torch::kFloat64);
    f[0][0][0] = 1;
    f[1][1][1] = 2;
    auto g = torch::zeros({2, 2, 2}, torch::kFloat64);
    g[0].fill_(1);
    g[1].fill_(-1);
    // Weights +1 and -1: map = ReLU([[1, 0], [0, -2]]) = [[1, 0], [0, 0]], already max 1.
    c.expect(viz::grad_cam_from(f, g, 2, 2).values == std::vector<double>{1, 0, 0, 0}, "grad-cam hand case");
    const auto zero = viz::grad_cam_from(torch::rand({4, 3, 3}, torch::kFloat64), torch::zeros({4, 3, 3}, torch::kFloat64), 12, 12);
    c.expect(zero.max() == 0.0 && zero.values.size() == 144, "grad-cam zero gradients");
  }
  {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(-5, 5);
    int worse = 0;
    for (int trial = 0; trial < 100; ++trial) {
      std::vector<std::array<double, 2>> pts(9);
      for (auto& p : pts) p = {u(rng), u(rng)};
      const auto grid = viz::rasterize_grid(pts);
      const double best = test_oracle::brute_force_assignment_cost(viz::normalize_points(pts), viz::grid_positions(3));
      if (grid.side != 3 || !grid.exact || !near(grid.cost, best, 1e-12 * std::max(1.0, best))) ++worse;
    }
    c.expect(worse == 0, std::to_string(worse) + " of 100 3x3 instances off the optimum");
  }
  {
    std::mt19937 rng(5);
    std::normal_distribution<double> nd(0, 1);
    std::vector<std::vector<double>> f(120, std::vector<double>(16));
    for (auto& v : f)
      for (auto& x : v) x = nd(rng);
    double worst = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      std::vector<double> d(f.size());
      for (std::size_t j = 0; j < f.size(); ++j) {
        double s = 0;
        for (std::size_t k = 0; k < 16; ++k) s += (f[i][k] - f[j][k]) * (f[i][k] - f[j][k]);
        d[j] = i == j ? std::numeric_limits<double>::infinity() : s;
      }
      worst = std::max(worst, std::abs(test_oracle::shannon_perplexity(viz::calibrate_row(d, 30).p) - 30));
    }
    viz::TsneOptions o;
    o.iterations = 300;
    o.seed = 9;
    const auto r = viz::tsne(f, o);
    for (double p : r.perplexities) worst = std::max(worst, std::abs(p - 30));
    c.expect(worst < 1e-3, "perplexity error " + num(worst, 8));
    c.note("worst perplexity error " + num(worst, 8));
  }
  {
    viz::Colormap cm{};
    cm[90] = {10, 20, 30};
    cm[255 - 7] = {100, 200, 50};
    // 0.6 * (100, 200, 50) + 0.4 * (10, 20, 30) = (64, 128, 42)
    const auto out = viz::saliency_overlay(GrayImage(1, 1, 7), GrayImage(1, 1, 90), 0.4, cm);
    c.expect(out.at(0, 0) == Rgb{64, 128, 42}, "single-pixel saliency blend");
  }
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 8. Every command, twice, in separate workspaces and again in the same one.
void reproducibility(Checks& c) {
  torch::set_num_threads(1);
  TempDir tmp;
  std::ofstream(tmp / "tiny.cfg") << "phantoms.count_per_class = 30\nphantoms.size = 16\n"
                                     "gan.image_size = 16\ngan.base_filters = 4\ngan.disc_base_filters = 4\n"
                                     "gan.residual_blocks = 1\ngan.batch_size = 2\ngan.epochs = 3\ngan.max_steps = 15\n"
                                     "cnn.image_size = 16\ncnn.stem_channels = 8\ncnn.head_units = 16\n"
                                     "cnn.max_epochs = 3\ncnn.batch_size = 8\nattack.k = 5\nviz.count = 12\n"
                                     "viz.perplexity = 3\nviz.tsne_iterations = 100\nviz.tile = 8\nviz.top_images = 2\n";
  const std::vector<std::string> commands{"phantoms",  "preprocess", "split",     "train-gan", "train-cnn",
                                          "attack",    "report",     "visualize", "verify-arch"};
  auto run = [&](const fs::path& root, const std::string& cmd) {
    std::ostringstream out, err;
    const int code = cli::run_cli({"--config", (tmp / "tiny.cfg").string(), "--out", root.string(), cmd}, out, err);
    c.expect(code == 0, cmd + " exit " + std::to_string(code) + ": " + err.str());
    return code == 0;
  };
  for (const auto& root : {tmp / "a", tmp / "b"})
    for (const auto& cmd : commands)
      if (!run(root, cmd)) return;

  std::size_t compared = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp / "a")) {
    if (!e.is_regular_file() || e.path().filename() == "meta.json" || e.path().filename() == ".koa.lock") continue;
    const auto rel = e.path().lexically_relative(tmp / "a");
    c.expect(slurp(e.path()) == slurp(tmp / "b" / rel), "differs: " + rel.string());
    ++compared;
  }
  // Re-running the downstream commands in the same workspace repeats their reports.
  for (const auto& cmd : {"train-cnn", "attack", "report"}) {
    if (!run(tmp / "a", cmd)) return;
    const auto first = tmp / "a" / cmd / "run-001", second = tmp / "a" / cmd / "run-002";
    for (const auto& e : fs::directory_iterator(first)) {
      if (!e.is_regular_file() || e.path().filename() == "meta.json") continue;
      c.expect(slurp(e.path()) == slurp(second / e.path().filename()),
               std::string(cmd) + " rerun differs: " + e.path().filename().string());
      ++compared;
    }
  }
  c.expect(compared > 50, "compared " + std::to_string(compared) + " files");
  c.note(std::to_string(compared) + " artifacts byte-identical across reruns");
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<void(Checks&)>>> criteria{
      {"architecture oracle", architecture},
      {"equalization oracle", equalization},
      {"loss unit suite", losses},
      {"gradient checks", gradients},
      {"phantom end-to-end", phantom_end_to_end},
      {"metrics suite", metrics},
      {"interpretability suite", interpretability},
      {"reproducibility", reproducibility},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(n)) continue;
    Checks c;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    failed += !c.ok();
    std::cout << (c.ok() ? "PASS" : "FAIL") << " criterion " << n << " (" << criteria[i].first << ", "
              << num(seconds_since(t0), 1) << " s): " << c.summary() << std::endl;
  }
  return failed ? 1 : 0;
}
