#include "koa/cli/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <ostream>

#include "commands.hpp"
#include "koa/common/errors.hpp"

namespace koa::cli {

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knee osteoarthritis CycleGAN pipeline", "koa"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "runs";
  bool list_keys = false;
  bool print_config = false;
  app.add_option("--config", config_path, "Config file of 'key = value' lines")->check(CLI::ExistingFile);
  app.add_option("--set", overrides, "Override one config key (key=value); repeatable");
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--out", out_dir, "Workspace root for run directories")->capture_default_str();
  app.add_flag("--config-keys", list_keys, "List the documented config keys");
  app.add_flag("--print-config", print_config, "Print the resolved config and its hash");

  using Handler = int (*)(Context&);
  const std::vector<std::tuple<std::string, std::string, Handler>> commands{
      {"phantoms", "Generate a synthetic phantom corpus", cmd_phantoms},
      {"preprocess", "Flip, invert and equalize the corpus", cmd_preprocess},
      {"split", "Patient-aware train/validation/test split", cmd_split},
      {"train-gan", "Train the CycleGAN on NoneDoubtful vs ModerateSevere", cmd_train_gan},
      {"train-cnn", "Train the three-class classifier", cmd_train_cnn},
      {"attack", "One-shot transforms of confidence-ranked test cohorts", cmd_attack},
      {"report", "Classification and attack reports from saved runs", cmd_report},
      {"visualize", "Progress strips, overlays, Grad-CAM and t-SNE", cmd_visualize},
  };
  std::vector<CLI::App*> subs;
  for (const auto& [name, help, fn] : commands) subs.push_back(app.add_subcommand(name, help));
  ArchOptions arch;
  auto* verify = app.add_subcommand("verify-arch", "Check the published 224 px network tables");
  verify->add_option("--image-size", arch.image_size, "Generator input size")->capture_default_str();
  verify->add_option("--residual-blocks", arch.residual_blocks, "Residual blocks")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "koa: " << e.what() << "\nRun 'koa --help' for usage.\n";
    return kExitUsage;
  }

  try {
    if (list_keys) {
      for (const auto& k : config_keys()) out << k.key << "  " << k.description << '\n';
      return kExitOk;
    }
    RunConfig cfg;
    if (!config_path.empty()) apply_config_file(cfg, config_path);
    for (const auto& o : overrides) apply_override(cfg, o);
    if (seed) cfg.seed = *seed;
    validate(cfg);
    const auto hash = config_hash(cfg);
    if (print_config) {
      out << "# config_hash=" << hash << '\n' << canonical_text(cfg);
      return kExitOk;
    }
    if (app.get_subcommands().empty()) {
      err << "koa: a subcommand is required\n" << app.help();
      return kExitUsage;
    }
    const auto* chosen = app.get_subcommands().front();
    std::filesystem::create_directories(out_dir);
    WorkspaceLock lock(out_dir);
    Context ctx{cfg, hash, Workspace(out_dir), out, err};
    if (chosen == verify) return cmd_verify_arch(ctx, arch);
    for (std::size_t i = 0; i < subs.size(); ++i)
      if (chosen == subs[i]) return std::get<2>(commands[i])(ctx);
    return kExitUsage;
  } catch (const UsageError& e) {
    err << "koa: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "koa: error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "koa: error: " << e.what() << '\n';
    return kExitFailure;
  } catch (const c10::Error& e) {
    err << "koa: error: " << e.what_without_backtrace() << '\n';
    return kExitFailure;
  }
}

}  // namespace koa::cli
