#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "koa/classifier/classifier.hpp"
#include "koa/common/png_io.hpp"
#include "koa/common/random.hpp"
#include "koa/dataset/manifest.hpp"
#include "koa/dataset/phantom.hpp"
#include "koa/dataset/split.hpp"
#include "koa/evaluation/attack.hpp"
#include "koa/evaluation/metrics.hpp"
#include "koa/gan/cycle_gan.hpp"
#include "koa/interpret/embedding.hpp"
#include "koa/interpret/gradcam.hpp"
#include "koa/interpret/overlay.hpp"
#include "koa/interpret/progress.hpp"

namespace koa::cli {
namespace fs = std::filesystem;
using data::Stage;

namespace {

// Stream ids for derive_seed, one per pipeline stage.
enum : std::uint64_t {
  kSeedPhantoms = 0x7068,
  kSeedSplit = 0x7370,
  kSeedGan = 0x6761,
  kSeedCnn = 0x636e,
  kSeedTsne = 0x7473,
};

constexpr const char* kPatientPrefix[] = {"ND", "MI", "MS"};

std::string provenance(const Context& ctx) { return "config_hash=" + ctx.hash + " seed=" + std::to_string(ctx.cfg.seed); }

std::string image_id(const data::ImageRecord& r) { return r.path.stem().string(); }

std::string with_commas(std::int64_t v) {
  auto s = std::to_string(v);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

std::string rel(const fs::path& p, const fs::path& base) {
  return fs::absolute(p).lexically_normal().lexically_relative(fs::absolute(base).lexically_normal()).generic_string();
}

void finish(const Context& ctx, const fs::path& run, const std::string& command,
            std::vector<std::pair<std::string, std::string>> inputs, std::vector<std::string> outputs) {
  std::sort(outputs.begin(), outputs.end());
  write_meta(run, {command, ctx.hash, ctx.cfg.seed, std::move(inputs), std::move(outputs)});
  ctx.out << command << ": wrote " << run.string() << '\n';
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      continue;
    }
    rows.push_back(data::split_csv_line(line));
  }
  return rows;
}

Stage parse_stage(const std::string& s) {
  for (auto st : data::kAllStages)
    if (data::stage_name(st) == s) return st;
  throw SchemaError("unknown stage '" + s + "'");
}

struct SplitSets {
  fs::path dir;
  data::DatasetIndex train, validation, test;
};

SplitSets load_split(const Context& ctx, const std::string& needed_by) {
  SplitSets s;
  s.dir = ctx.workspace.require_run("split", needed_by);
  s.train = data::load_manifest(s.dir / "train.csv");
  s.validation = data::load_manifest(s.dir / "validation.csv");
  s.test = data::load_manifest(s.dir / "test.csv");
  return s;
}

std::vector<const data::ImageRecord*> of_stage(const data::DatasetIndex& idx, Stage s) {
  std::vector<const data::ImageRecord*> out;
  for (const auto& r : idx.records)
    if (r.stage() == s) out.push_back(&r);
  return out;
}

std::vector<GrayImage> load_images(const std::vector<const data::ImageRecord*>& recs, int expected_size,
                                   const char* model) {
  std::vector<GrayImage> out;
  out.reserve(recs.size());
  for (const auto* r : recs) {
    auto img = r->load_pixels();
    if (img.rows != expected_size || img.cols != expected_size) {
      throw ShapeError(r->path.string() + " is " + std::to_string(img.rows) + "x" + std::to_string(img.cols) + " but " +
                       model + " expects " + std::to_string(expected_size) + " px");
    }
    out.push_back(std::move(img));
  }
  return out;
}

cnn::LabeledSet labeled(const data::DatasetIndex& idx, int size) {
  cnn::LabeledSet s;
  std::vector<const data::ImageRecord*> all;
  for (const auto& r : idx.records) {
    all.push_back(&r);
    s.labels.push_back(r.stage());
  }
  s.images = load_images(all, size, "the classifier");
  return s;
}

std::string record_csv(const gan::LossRecord& r) {
  return eval::fixed(r.adv_g, 6) + "," + eval::fixed(r.adv_f, 6) + "," + eval::fixed(r.cycle, 6) + "," +
         eval::fixed(r.identity_g, 6) + "," + eval::fixed(r.identity_f, 6) + "," + eval::fixed(r.g_total, 6) + "," +
         eval::fixed(r.f_total, 6) + "," + eval::fixed(r.d_x, 6) + "," + eval::fixed(r.d_y, 6);
}

fs::path selected_checkpoint(const fs::path& gan_run) {
  std::istringstream in(read_text(gan_run / "selected.txt"));
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("checkpoint=", 0) == 0) return gan_run / line.substr(11);
  throw SchemaError("selected.txt in " + gan_run.string() + " names no checkpoint");
}

struct AttackPlan {
  Stage original;
  gan::Direction direction;
};
constexpr AttackPlan kAttackPlans[] = {
    {Stage::NoneDoubtful, gan::Direction::TowardFuture},
    {Stage::ModerateSevere, gan::Direction::TowardPast},
    {Stage::Mild, gan::Direction::TowardFuture},
    {Stage::Mild, gan::Direction::TowardPast},
};

std::string cohort_name(Stage s, gan::Direction d) {
  return std::string(data::stage_name(s)) + "_" + std::string(gan::direction_name(d));
}

}  // namespace

int cmd_phantoms(Context& ctx) {
  const auto& p = ctx.cfg.phantoms;
  const auto run = ctx.workspace.new_run("phantoms");
  data::PhantomCorpusOptions opts;
  opts.size = p.size;
  opts.noise_sigma = p.noise_sigma;
  opts.negative_fraction = p.negative_fraction;
  opts.right_fraction = p.right_fraction;
  opts.images_per_patient = p.images_per_patient;
  const auto text = provenance_png(ctx.hash, ctx.cfg.seed);
  std::vector<data::ImageRecord> all;
  for (auto stage : data::kAllStages) {
    const auto idx = static_cast<std::uint64_t>(data::index_of(stage));
    auto recs = data::generate_phantom_cohort(stage, p.count_per_class,
                                              derive_seed(derive_seed(ctx.cfg.seed, kSeedPhantoms), idx), opts,
                                              std::string(kPatientPrefix[idx]));
    for (std::size_t i = 0; i < recs.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof name, "%s_%05zu.png", std::string(data::stage_name(stage)).c_str(), i);
      auto& r = recs[i];
      r.path = run / "images" / name;
      fs::create_directories(r.path.parent_path());
      write_png(r.path, *r.pixels, text);
      r.pixels.reset();
      all.push_back(std::move(r));
    }
  }
  data::write_manifest(run / "manifest.csv", all, {provenance(ctx), "synthetic knee phantoms"});
  ctx.out << "phantoms: " << all.size() << " images (" << p.count_per_class << " per stage, " << p.size << " px)\n";
  finish(ctx, run, "phantoms", {}, {"manifest.csv", "images/"});
  return 0;
}

int cmd_preprocess(Context& ctx) {
  std::vector<std::pair<std::string, std::string>> inputs;
  fs::path manifest;
  if (ctx.cfg.source == "manifest") {
    manifest = ctx.cfg.manifest;
    if (!fs::exists(manifest)) throw MissingArtifactError("manifest " + manifest.string() + " does not exist");
    inputs.emplace_back("manifest", manifest.string());
  } else {
    const auto ph = ctx.workspace.require_run("phantoms", "preprocess");
    manifest = ph / "manifest.csv";
    inputs.emplace_back("phantoms", ph.string());
  }
  const auto index = data::load_manifest(manifest);
  const auto run = ctx.workspace.new_run("preprocess");
  const auto text = provenance_png(ctx.hash, ctx.cfg.seed);
  std::set<std::string> used;
  std::vector<data::ImageRecord> out;
  std::string sidecar = provenance_line(ctx.hash, ctx.cfg.seed);
  std::size_t flipped = 0, inverted = 0;
  for (const auto& rec : index.records) {
    const auto res = prep::preprocess_pipeline(rec, ctx.cfg.preprocess);
    auto id = image_id(rec);
    for (int k = 2; used.count(id); ++k) id = image_id(rec) + "-" + std::to_string(k);
    used.insert(id);
    data::ImageRecord r;
    r.path = run / "images" / (id + ".png");
    r.patient_id = rec.patient_id;
    r.side = res.provenance.flipped ? data::Side::Left : rec.side;
    r.kl_grade = rec.kl_grade;
    fs::create_directories(r.path.parent_path());
    write_png(r.path, res.image, text);
    sidecar += prep::provenance_json(res.provenance, id) + "\n";
    flipped += res.provenance.flipped;
    inverted += res.provenance.inverted;
    out.push_back(std::move(r));
  }
  data::write_manifest(run / "manifest.csv", out, {provenance(ctx), "preprocessed from " + rel(manifest, run)});
  write_text(run / "provenance.jsonl", sidecar);
  ctx.out << "preprocess: " << out.size() << " images, " << flipped << " flipped, " << inverted << " inverted\n";
  finish(ctx, run, "preprocess", inputs, {"manifest.csv", "provenance.jsonl", "images/"});
  return 0;
}

int cmd_split(Context& ctx) {
  const auto pre = ctx.workspace.require_run("preprocess", "split");
  const auto index = data::load_manifest(pre / "manifest.csv");
  const auto split =
      data::split_patient_aware(index, ctx.cfg.split, derive_seed(ctx.cfg.seed, kSeedSplit), {.require_nonempty = true});
  const auto run = ctx.workspace.new_run("split");
  const std::vector<std::string> comments{provenance(ctx)};
  data::write_manifest(run / "train.csv", split.train, comments);
  data::write_manifest(run / "validation.csv", split.validation, comments);
  data::write_manifest(run / "test.csv", split.test, comments);
  std::ostringstream summary;
  summary << provenance_line(ctx.hash, ctx.cfg.seed) << "partition,NoneDoubtful,Mild,ModerateSevere,total\n";
  for (const auto& [name, part] : {std::pair{"train", &split.train}, {"validation", &split.validation}, {"test", &split.test}}) {
    std::array<std::size_t, 3> c{};
    for (const auto& r : *part) ++c[static_cast<std::size_t>(data::index_of(r.stage()))];
    summary << name << ',' << c[0] << ',' << c[1] << ',' << c[2] << ',' << part->size() << '\n';
    ctx.out << "split: " << name << ' ' << part->size() << " images (" << c[0] << '/' << c[1] << '/' << c[2] << ")\n";
  }
  write_text(run / "summary.csv", summary.str());
  finish(ctx, run, "split", {{"preprocess", pre.string()}}, {"train.csv", "validation.csv", "test.csv", "summary.csv"});
  return 0;
}

int cmd_train_gan(Context& ctx) {
  torch::set_num_threads(1);
  const auto s = load_split(ctx, "train-gan");
  const auto& g = ctx.cfg.gan;
  auto domain = [&](const data::DatasetIndex& idx, Stage st, const char* part) {
    const auto recs = of_stage(idx, st);
    if (recs.empty())
      throw DomainError(std::string("the ") + part + " split has no " + std::string(data::stage_name(st)) + " images");
    return gan::to_model_range(load_images(recs, g.image_size, "the CycleGAN"));
  };
  const auto tx = domain(s.train, Stage::NoneDoubtful, "train");
  const auto ty = domain(s.train, Stage::ModerateSevere, "train");
  const auto vx = domain(s.validation, Stage::NoneDoubtful, "validation");
  const auto vy = domain(s.validation, Stage::ModerateSevere, "validation");

  const auto run = ctx.workspace.new_run("train-gan");
  fs::create_directories(run / "checkpoints");
  gan::CycleTrainState state(g, derive_seed(ctx.cfg.seed, kSeedGan));
  gan::GanTrainOptions opts;
  opts.max_steps = ctx.cfg.gan_max_steps;
  std::vector<std::string> outputs{"history.csv", "selected.txt", "config.json"};
  opts.on_epoch = [&](const gan::CycleTrainState& st) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch-%03d.ckpt", st.epoch);
    gan::save_checkpoint(st, run / "checkpoints" / name, provenance(ctx));
    outputs.push_back(std::string("checkpoints/") + name);
    const auto& h = st.history.back();
    ctx.out << "train-gan: epoch " << h.epoch << " train total " << eval::fixed(h.train.total, 4) << " validation G+F "
            << eval::fixed(h.validation.g_total + h.validation.f_total, 4) << '\n';
  };
  gan::train_cycle_gan(state, tx, ty, vx, vy, opts);
  if (state.history.empty()) throw DomainError("train-gan finished without a completed epoch");

  std::ostringstream hist;
  hist << provenance_line(ctx.hash, ctx.cfg.seed)
       << "epoch,split,adv_g,adv_f,cycle,identity_g,identity_f,g_total,f_total,d_x,d_y\n";
  for (const auto& r : state.history) {
    hist << r.epoch << ",train," << record_csv(r.train) << '\n';
    hist << r.epoch << ",validation," << record_csv(r.validation) << '\n';
  }
  write_text(run / "history.csv", hist.str());
  const int best = gan::select_checkpoint(state.history);
  char name[32];
  std::snprintf(name, sizeof name, "epoch-%03d.ckpt", best);
  write_text(run / "selected.txt", provenance_line(ctx.hash, ctx.cfg.seed) + "epoch=" + std::to_string(best) +
                                       "\ncheckpoint=checkpoints/" + name + "\n");
  write_text(run / "config.json", gan::config_to_json(g) + "\n");
  ctx.out << "train-gan: selected epoch " << best << " of " << state.history.size() << '\n';
  finish(ctx, run, "train-gan", {{"split", s.dir.string()}}, outputs);
  return 0;
}

int cmd_train_cnn(Context& ctx) {
  torch::set_num_threads(1);
  const auto s = load_split(ctx, "train-cnn");
  const int size = ctx.cfg.cnn.image_size;
  const auto train = labeled(s.train, size);
  const auto val = labeled(s.validation, size);
  const auto test = labeled(s.test, size);
  if (test.images.empty()) throw DomainError("the test split is empty");

  const auto run = ctx.workspace.new_run("train-cnn");
  auto trained = cnn::train_classifier(train, val, ctx.cfg.cnn, derive_seed(ctx.cfg.seed, kSeedCnn));
  cnn::save_classifier(trained, run / "classifier.ckpt", provenance(ctx));

  std::ostringstream hist;
  hist << provenance_line(ctx.hash, ctx.cfg.seed) << "epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& h : trained.history)
    hist << h.epoch << ',' << eval::fixed(h.train_loss, 6) << ',' << eval::fixed(h.val_loss, 6) << ','
         << eval::fixed(h.val_accuracy, 6) << '\n';
  write_text(run / "history.csv", hist.str());

  const auto probs = cnn::predict_batch(trained.model, test.images);
  std::vector<Stage> preds;
  std::ostringstream pred_csv;
  pred_csv << provenance_line(ctx.hash, ctx.cfg.seed) << "id,truth,p_NoneDoubtful,p_Mild,p_ModerateSevere,predicted\n";
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const auto& p = probs[i];
    preds.push_back(data::stage_from_index(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin())));
    pred_csv << image_id(s.test.records[i]) << ',' << data::stage_name(test.labels[i]) << ',' << eval::fixed(p[0], 6)
             << ',' << eval::fixed(p[1], 6) << ',' << eval::fixed(p[2], 6) << ',' << data::stage_name(preds.back())
             << '\n';
  }
  write_text(run / "test_predictions.csv", pred_csv.str());
  const auto e = eval::confusion_and_report(test.labels, preds);
  const auto auc = eval::roc_auc_ovr(probs, test.labels);
  write_text(run / "metrics.csv", provenance_line(ctx.hash, ctx.cfg.seed) + eval::report_rows_csv(e, auc));
  write_text(run / "classification.txt", provenance_line(ctx.hash, ctx.cfg.seed) + eval::render_report_table(e.report) +
                                             "\n" + eval::render_confusion(e.matrix));
  ctx.out << "train-cnn: best epoch " << trained.best_epoch << (trained.stopped_early ? " (early stop)" : "")
          << ", test accuracy " << eval::fixed(e.report.accuracy, 3) << '\n';
  finish(ctx, run, "train-cnn", {{"split", s.dir.string()}},
         {"classifier.ckpt", "history.csv", "test_predictions.csv", "metrics.csv", "classification.txt"});
  return 0;
}

int cmd_attack(Context& ctx) {
  torch::set_num_threads(1);
  const auto gan_run = ctx.workspace.require_run("train-gan", "attack");
  const auto cnn_run = ctx.workspace.require_run("train-cnn", "attack");
  const auto s = load_split(ctx, "attack");
  auto state = gan::load_checkpoint(selected_checkpoint(gan_run));
  state->nets.train(false);
  auto model = cnn::load_classifier(cnn_run / "classifier.ckpt").model;
  const int size = model->config().image_size;
  if (state->config().image_size != size)
    throw ShapeError("CycleGAN works at " + std::to_string(state->config().image_size) + " px but the classifier at " +
                     std::to_string(size) + " px");

  const auto run = ctx.workspace.new_run("attack");
  const auto text = provenance_png(ctx.hash, ctx.cfg.seed);
  std::vector<eval::AttackReport> reports;
  std::vector<std::string> outputs{"attack.csv", "attack_counts.csv", "attack_table.txt"};
  std::ostringstream counts;
  counts << provenance_line(ctx.hash, ctx.cfg.seed) << "original,direction,NoneDoubtful,Mild,ModerateSevere\n";
  for (const auto& plan : kAttackPlans) {
    const auto recs = of_stage(s.test, plan.original);
    if (recs.empty()) {
      ctx.err << "attack: warning: no " << data::stage_name(plan.original) << " test images, skipping\n";
      continue;
    }
    const auto images = load_images(recs, size, "the classifier");
    const auto ranked = eval::rank_by_confidence(model, images, plan.original, ctx.cfg.attack.k);
    if (ranked.truncated)
      ctx.err << "attack: warning: only " << images.size() << ' ' << data::stage_name(plan.original)
              << " test images, fewer than k = " << ctx.cfg.attack.k << '\n';
    std::vector<eval::CohortImage> cohort;
    for (const auto& item : ranked.items) cohort.push_back({image_id(*recs[item.index]), images[item.index]});

    const auto name = cohort_name(plan.original, plan.direction);
    std::size_t next = 0;
    const auto report = eval::one_shot_attack(
        [&](const GrayImage& img) {
          auto out = gan::transform(img, plan.direction, state->nets);
          const auto path = run / "transformed" / name / (cohort[next++].id + ".png");
          fs::create_directories(path.parent_path());
          write_png(path, out, text);
          return out;
        },
        [&](const std::vector<GrayImage>& imgs) { return cnn::predict_batch(model, imgs); }, cohort, plan.original,
        plan.direction);
    outputs.push_back("transformed/" + name + "/");
    counts << data::stage_name(plan.original) << ',' << gan::direction_name(plan.direction) << ',' << report.counts[0]
           << ',' << report.counts[1] << ',' << report.counts[2] << '\n';
    reports.push_back(report);
  }
  if (reports.empty()) throw DomainError("attack: the test split holds none of the attacked classes");
  write_text(run / "attack.csv", provenance_line(ctx.hash, ctx.cfg.seed) + eval::attack_rows_csv(reports));
  write_text(run / "attack_counts.csv", counts.str());
  const auto table = eval::render_attack_table(reports);
  write_text(run / "attack_table.txt", provenance_line(ctx.hash, ctx.cfg.seed) + table);
  ctx.out << table;
  finish(ctx, run, "attack", {{"train-gan", gan_run.string()}, {"train-cnn", cnn_run.string()}, {"split", s.dir.string()}},
         outputs);
  return 0;
}

int cmd_report(Context& ctx) {
  const auto cnn_run = ctx.workspace.require_run("train-cnn", "report");
  const auto attack_run = ctx.workspace.require_run("attack", "report");
  std::map<std::string, std::string> hashes{{"report", ctx.hash}};
  hashes["train-cnn"] = read_meta(cnn_run).config_hash;
  const auto attack_meta = read_meta(attack_run);
  hashes["attack"] = attack_meta.config_hash;
  for (const auto& [cmd, dir] : attack_meta.inputs)
    if (fs::exists(fs::path(dir) / "meta.json")) hashes[cmd + " (via attack)"] = read_meta(dir).config_hash;
  std::set<std::string> distinct;
  for (const auto& [k, v] : hashes) distinct.insert(v);
  if (distinct.size() > 1) {
    std::string msg = "report refuses inputs produced under different configurations:";
    for (const auto& [k, v] : hashes) msg += "\n  " + k + ": " + v;
    throw DomainError(msg);
  }

  std::vector<Stage> truths, preds;
  std::vector<eval::Probabilities> probs;
  for (const auto& row : read_csv_rows(cnn_run / "test_predictions.csv")) {
    if (row.size() != 6) throw SchemaError("test_predictions.csv: expected 6 fields");
    truths.push_back(parse_stage(row[1]));
    probs.push_back({std::stod(row[2]), std::stod(row[3]), std::stod(row[4])});
    preds.push_back(parse_stage(row[5]));
  }
  const auto e = eval::confusion_and_report(truths, preds);
  const auto auc = eval::roc_auc_ovr(probs, truths);

  std::vector<eval::AttackReport> reports;
  for (const auto& row : read_csv_rows(attack_run / "attack_counts.csv")) {
    if (row.size() != 5) throw SchemaError("attack_counts.csv: expected 5 fields");
    reports.push_back(eval::tabulate(parse_stage(row[0]), gan::parse_direction(row[1]),
                                     {std::stoll(row[2]), std::stoll(row[3]), std::stoll(row[4])}));
  }

  std::ostringstream txt;
  txt << provenance_line(ctx.hash, ctx.cfg.seed) << "\nClassification report (test split)\n\n"
      << eval::render_report_table(e.report) << "\nConfusion matrix\n\n"
      << eval::render_confusion(e.matrix) << "\nOne-vs-rest ROC AUC\n\n";
  for (std::size_t c = 0; c < 3; ++c)
    txt << "  " << data::stage_name(data::stage_from_index(static_cast<int>(c))) << ": "
        << (auc[c] ? eval::fixed(*auc[c], 3) : std::string("missing")) << '\n';
  txt << "\nOne-shot attack outcomes (share of each cohort by predicted class)\n\n" << eval::render_attack_table(reports);

  const auto run = ctx.workspace.new_run("report");
  write_text(run / "report.txt", txt.str());
  write_text(run / "report.csv",
             provenance_line(ctx.hash, ctx.cfg.seed) + eval::report_rows_csv(e, auc) + "\n" + eval::attack_rows_csv(reports));
  ctx.out << txt.str();
  finish(ctx, run, "report", {{"train-cnn", cnn_run.string()}, {"attack", attack_run.string()}},
         {"report.txt", "report.csv"});
  return 0;
}

int cmd_visualize(Context& ctx) {
  torch::set_num_threads(1);
  const auto& v = ctx.cfg.viz;
  const auto gan_run = ctx.workspace.require_run("train-gan", "visualize");
  const auto cnn_run = ctx.workspace.require_run("train-cnn", "visualize");
  const auto attack_run = ctx.workspace.require_run("attack", "visualize");
  const auto s = load_split(ctx, "visualize");
  auto model = cnn::load_classifier(cnn_run / "classifier.ckpt").model;
  auto state = gan::load_checkpoint(selected_checkpoint(gan_run));
  state->nets.train(false);
  const int size = model->config().image_size;
  const auto run = ctx.workspace.new_run("visualize");
  const auto text = provenance_png(ctx.hash, ctx.cfg.seed);
  std::vector<std::string> outputs;

  // Progress strip over checkpoints up to the selected epoch.
  {
    std::vector<fs::path> ckpts;
    for (const auto& e : fs::directory_iterator(gan_run / "checkpoints")) ckpts.push_back(e.path());
    std::sort(ckpts.begin(), ckpts.end());
    const auto sel = selected_checkpoint(gan_run);
    ckpts.erase(std::remove_if(ckpts.begin(), ckpts.end(), [&](const fs::path& p) { return p.filename() > sel.filename(); }),
                ckpts.end());
    std::vector<fs::path> chosen;
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(v.strip_frames), ckpts.size());
    for (std::size_t i = 0; i < k; ++i) chosen.push_back(ckpts[k == 1 ? ckpts.size() - 1 : i * (ckpts.size() - 1) / (k - 1)]);
    const auto probes = of_stage(s.test, Stage::NoneDoubtful);
    if (!probes.empty()) {
      const auto probe = load_images({probes[v.probe_index % probes.size()]}, size, "the classifier").front();
      const auto panel = viz::progress_panel(chosen, probe, gan::Direction::TowardFuture, {.gutter = v.strip_gutter});
      write_png(run / "progress.png", panel.image, text);
      outputs.push_back("progress.png");
    }
  }

  // Overlays, difference maps and Grad-CAM for the leading images of every attack cohort.
  std::map<std::string, const data::ImageRecord*> by_id;
  for (const auto& r : s.test.records) by_id[image_id(r)] = &r;
  for (const auto& plan : kAttackPlans) {
    const auto name = cohort_name(plan.original, plan.direction);
    const auto dir = attack_run / "transformed" / name;
    if (!fs::is_directory(dir)) continue;
    std::vector<std::string> ids;
    for (const auto& row : read_csv_rows(attack_run / "attack.csv"))
      if (row.size() == 9 && row[0] == data::stage_name(plan.original) && row[1] == gan::direction_name(plan.direction))
        ids.push_back(row[2]);
    if (ids.size() > v.top_images) ids.resize(v.top_images);
    for (const auto& id : ids) {
      const auto it = by_id.find(id);
      if (it == by_id.end()) throw MissingArtifactError("attack image " + id + " is not in the test split");
      const auto before = it->second->load_pixels();
      const auto after = read_png_gray(dir / (id + ".png"));
      const auto base = run / "overlays" / name / id;
      fs::create_directories(base.parent_path());
      write_png(base.string() + "_saliency.png", viz::saliency_overlay(before, after, v.overlay_alpha), text);
      write_png(base.string() + "_difference.png", viz::difference_map(before, after), text);
      for (const auto& [tag, img] : {std::pair{"before", &before}, {"after", &after}}) {
        const auto p = cnn::predict_stage(model, *img);
        const auto cls = data::stage_from_index(static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin()));
        write_png(base.string() + "_gradcam_" + tag + ".png", viz::heatmap_overlay(*img, viz::grad_cam(model, *img, cls)),
                  text);
      }
    }
    outputs.push_back("overlays/" + name + "/");
  }

  // Embedding of original and transformed test images in the classifier's dense-layer space.
  std::vector<viz::LabeledFeature> items;
  std::vector<GrayImage> thumbs;
  {
    const auto n = std::min(v.count, s.test.records.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto& r = s.test.records[i * s.test.records.size() / n];
      const auto img = load_images({&r}, size, "the classifier").front();
      const auto id = image_id(r);
      std::vector<std::pair<viz::PointSource, GrayImage>> variants{{viz::PointSource::OriginalTest, img}};
      if (r.stage() != Stage::ModerateSevere)
        variants.emplace_back(viz::PointSource::SyntheticFuture, gan::transform(img, gan::Direction::TowardFuture, state->nets));
      if (r.stage() != Stage::NoneDoubtful)
        variants.emplace_back(viz::PointSource::SyntheticPast, gan::transform(img, gan::Direction::TowardPast, state->nets));
      for (auto& [src, im] : variants) {
        const auto f = cnn::embed_batch(model, {im}).front();
        items.push_back({f, src, r.stage(), id});
        thumbs.push_back(std::move(im));
      }
    }
  }
  viz::TsneOptions to;
  to.perplexity = v.perplexity;
  to.iterations = v.tsne_iterations;
  to.seed = derive_seed(ctx.cfg.seed, kSeedTsne);
  const auto points = viz::tsne_embed(items, to);
  std::vector<std::array<double, 2>> xy;
  for (const auto& p : points) xy.push_back({p.x, p.y});
  const auto fit = viz::fit_linear(xy);
  write_text(run / "embedding.csv", provenance_line(ctx.hash, ctx.cfg.seed) + viz::embedding_rows_csv(points));
  write_text(run / "linear_fit.txt", provenance_line(ctx.hash, ctx.cfg.seed) + "slope=" + eval::fixed(fit.slope, 6) +
                                         "\nintercept=" + eval::fixed(fit.intercept, 6) + "\nr2=" + eval::fixed(fit.r2, 6) +
                                         "\n");
  write_png(run / "tsne.png", viz::scatter_plot(points, 512, &fit), text);
  const auto grid = viz::rasterize_grid(xy);
  write_png(run / "tsne_grid.png", viz::grid_mosaic(thumbs, grid, v.tile), text);
  outputs.insert(outputs.end(), {"embedding.csv", "linear_fit.txt", "tsne.png", "tsne_grid.png"});
  ctx.out << "visualize: " << points.size() << " embedded points, linear fit r2 " << eval::fixed(fit.r2, 3) << '\n';
  finish(ctx, run, "visualize",
         {{"train-gan", gan_run.string()}, {"train-cnn", cnn_run.string()}, {"attack", attack_run.string()}, {"split", s.dir.string()}},
         outputs);
  return 0;
}

int cmd_verify_arch(Context& ctx, const ArchOptions& options) {
  gan::CycleGanConfig cfg;  // the published configuration
  cfg.image_size = options.image_size;
  cfg.residual_blocks = options.residual_blocks;
  cfg.validate();
  const auto g = gan::build_generator(cfg);
  const auto d = gan::build_discriminator(cfg);
  gan::check_consistency(g);
  gan::check_consistency(d);
  const auto gm = gan::compare_to_reference(g, gan::reference_generator_table(), gan::CycleGanConfig{}.residual_blocks);
  const auto dm = gan::compare_to_reference(d, gan::reference_discriminator_table(), 0);

  std::ostringstream os;
  os << provenance_line(ctx.hash, ctx.cfg.seed) << "Generator\n" << gan::render_table(g) << "\nDiscriminator\n"
     << gan::render_table(d) << "\ngenerator " << with_commas(g.total_params) << " / discriminator "
     << with_commas(d.total_params) << '\n';
  const auto run = ctx.workspace.new_run("verify-arch");
  write_text(run / "architecture.txt", os.str());
  ctx.out << "generator " << with_commas(g.total_params) << " / discriminator " << with_commas(d.total_params) << '\n';
  bool ok = true;
  for (const auto& [net, mismatches] : {std::pair{"generator", &gm}, {"discriminator", &dm}}) {
    constexpr std::size_t kShown = 5;
    for (std::size_t i = 0; i < std::min(kShown, mismatches->size()); ++i) {
      const auto& m = (*mismatches)[i];
      ctx.err << "verify-arch: " << net << " layer " << m.layer << " (row " << m.row << "): " << m.field << " expected "
              << m.expected << ", actual " << m.actual << '\n';
    }
    if (mismatches->size() > kShown)
      ctx.err << "verify-arch: " << net << ": " << mismatches->size() - kShown << " further mismatches\n";
    ok = ok && mismatches->empty();
  }
  finish(ctx, run, "verify-arch", {}, {"architecture.txt"});
  if (!ok) return 1;
  ctx.out << "verify-arch: all layer counts match the reference tables\n";
  return 0;
}

}  // namespace koa::cli
