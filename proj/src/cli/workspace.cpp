#include "koa/cli/workspace.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "koa/common/errors.hpp"

namespace koa::cli {
namespace fs = std::filesystem;

namespace {

int run_number(const fs::path& dir) {
  static const std::regex re("run-([0-9]+)");
  std::smatch m;
  const auto name = dir.filename().string();
  return std::regex_match(name, m, re) ? std::stoi(m[1]) : -1;
}

std::vector<fs::path> runs(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && run_number(e.path()) >= 0) out.push_back(e.path());
  std::sort(out.begin(), out.end(), [](const fs::path& a, const fs::path& b) { return run_number(a) < run_number(b); });
  return out;
}

}  // namespace

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_meta(const fs::path& run, const RunMeta& meta) {
  nlohmann::ordered_json j;
  j["command"] = meta.command;
  j["config_hash"] = meta.config_hash;
  j["seed"] = meta.seed;
  j["inputs"] = nlohmann::ordered_json::object();
  for (const auto& [cmd, dir] : meta.inputs) j["inputs"][cmd] = dir;
  j["outputs"] = meta.outputs;
  write_text(run / "meta.json", j.dump(2) + "\n");
}

RunMeta read_meta(const fs::path& run) {
  const auto text = read_text(run / "meta.json");
  try {
    const auto j = nlohmann::json::parse(text);
    RunMeta m;
    m.command = j.at("command").get<std::string>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("inputs").items()) m.inputs.emplace_back(k, v.get<std::string>());
    m.outputs = j.at("outputs").get<std::vector<std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("bad run metadata in " + run.string() + ": " + e.what());
  }
}

fs::path Workspace::new_run(const std::string& command) const {
  const auto dir = root_ / command;
  fs::create_directories(dir);
  const auto existing = runs(dir);
  int next = existing.empty() ? 1 : run_number(existing.back()) + 1;
  char name[32];
  for (;; ++next) {
    std::snprintf(name, sizeof name, "run-%03d", next);
    if (fs::create_directory(dir / name)) return dir / name;
  }
}

std::optional<fs::path> Workspace::latest_run(const std::string& command) const {
  auto all = runs(root_ / command);
  for (auto it = all.rbegin(); it != all.rend(); ++it)
    if (fs::exists(*it / "meta.json")) return *it;
  return std::nullopt;
}

fs::path Workspace::require_run(const std::string& command, const std::string& needed_by) const {
  if (auto r = latest_run(command)) return *r;
  throw MissingArtifactError("'" + needed_by + "' needs the outputs of '" + command + "': no completed run under " +
                             (root_ / command).string() + "; run 'koa " + command + "' first");
}

WorkspaceLock::WorkspaceLock(const fs::path& root) : path_(root / ".koa.lock") {
  fs::create_directories(root);
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) throw IoError("workspace is locked by another command (" + path_.string() + ")");
  const auto pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

WorkspaceLock::~WorkspaceLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

std::string provenance_line(const std::string& hash, std::uint64_t seed) {
  return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n";
}

PngText provenance_png(const std::string& hash, std::uint64_t seed) {
  return {{"config_hash", hash}, {"seed", std::to_string(seed)}};
}

}  // namespace koa::cli
