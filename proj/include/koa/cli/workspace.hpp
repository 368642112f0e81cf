#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "koa/common/png_io.hpp"

namespace koa::cli {

// Provenance written next to every run's outputs. A run counts as complete once its
// meta.json exists.
struct RunMeta {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // command, run directory
  std::vector<std::string> outputs;                         // paths relative to the run
};

void write_meta(const std::filesystem::path& run, const RunMeta& meta);
RunMeta read_meta(const std::filesystem::path& run);

// <root>/<command>/run-NNN directories, one per invocation.
class Workspace {
 public:
  explicit Workspace(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path new_run(const std::string& command) const;
  // Highest-numbered complete run of `command`.
  std::optional<std::filesystem::path> latest_run(const std::string& command) const;
  // Throws MissingArtifactError telling the user which command to run first.
  std::filesystem::path require_run(const std::string& command, const std::string& needed_by) const;

 private:
  std::filesystem::path root_;
};

// Exclusive lock file at <root>/.koa.lock, removed on destruction. Throws IoError when
// another command holds it.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const std::filesystem::path& root);
  ~WorkspaceLock();
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  std::filesystem::path path_;
};

// "# config_hash=<hash> seed=<seed>" header line for text artifacts.
std::string provenance_line(const std::string& hash, std::uint64_t seed);
PngText provenance_png(const std::string& hash, std::uint64_t seed);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace koa::cli
