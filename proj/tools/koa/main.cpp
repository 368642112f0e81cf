#include <iostream>

#include "koa/cli/cli.hpp"

int main(int argc, char** argv) {
  return koa::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
