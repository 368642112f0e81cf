#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "koa/cli/config.hpp"
#include "koa/cli/workspace.hpp"

namespace koa::cli {

struct Context {
  RunConfig cfg;
  std::string hash;
  Workspace workspace;
  std::ostream& out;
  std::ostream& err;
};

struct ArchOptions {
  int image_size = 224;
  int residual_blocks = 9;
};

int cmd_phantoms(Context& ctx);
int cmd_preprocess(Context& ctx);
int cmd_split(Context& ctx);
int cmd_train_gan(Context& ctx);
int cmd_train_cnn(Context& ctx);
int cmd_attack(Context& ctx);
int cmd_report(Context& ctx);
int cmd_visualize(Context& ctx);
int cmd_verify_arch(Context& ctx, const ArchOptions& options);

}  // namespace koa::cli
