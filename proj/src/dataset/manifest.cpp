#include "koa/dataset/manifest.hpp"

#include <charconv>
#include <fstream>
#include <map>

#include "koa/common/errors.hpp"

namespace koa::data {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string strip_bom(std::string s) {
  if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF && static_cast<unsigned char>(s[1]) == 0xBB &&
      static_cast<unsigned char>(s[2]) == 0xBF) {
    s.erase(0, 3);
  }
  return s;
}

std::string quote_if_needed(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (c == '"') {
      if (quoted && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else {
        quoted = !quoted;
      }
    } else if (c == ',' && !quoted) {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

DatasetIndex load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  const auto base = path.parent_path();

  std::string line;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> columns;
  bool have_header = false;
  std::vector<ImageRecord> records;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) line = strip_bom(line);
    const auto stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    auto fields = split_csv_line(line);

    if (!have_header) {
      for (std::size_t i = 0; i < fields.size(); ++i) columns[fields[i]] = i;
      for (const char* required : {"path", "patient_id", "side", "kl_grade"}) {
        if (!columns.contains(required)) {
          throw SchemaError(std::string("manifest ") + path.string() + " is missing column '" + required + "'");
        }
      }
      have_header = true;
      continue;
    }

    if (fields.size() < columns.size()) fields.resize(columns.size());
    auto field = [&](const char* name) -> const std::string& { return fields[columns.at(name)]; };

    ImageRecord rec;
    const auto& raw_path = field("path");
    if (raw_path.empty()) throw ValidationError(line_no, "empty path");
    rec.path = std::filesystem::path(raw_path).is_absolute() ? std::filesystem::path(raw_path) : base / raw_path;
    rec.patient_id = field("patient_id");
    if (rec.patient_id.empty()) throw ValidationError(line_no, "empty patient_id");
    try {
      rec.side = parse_side(field("side"));
    } catch (const DomainError& e) {
      throw ValidationError(line_no, e.what());
    }

    const auto& kl_text = field("kl_grade");
    int kl = -1;
    const auto [ptr, ec] = std::from_chars(kl_text.data(), kl_text.data() + kl_text.size(), kl);
    if (ec != std::errc{} || ptr != kl_text.data() + kl_text.size()) {
      throw ValidationError(line_no, "kl_grade '" + kl_text + "' is not an integer");
    }
    if (kl < 0 || kl > 4) throw ValidationError(line_no, "kl_grade " + kl_text + " outside 0..4");
    rec.kl_grade = kl;

    if (columns.contains("negative")) {
      const auto& neg = field("negative");
      if (neg == "1" || neg == "true") {
        rec.negative_hint = true;
      } else if (neg == "0" || neg == "false") {
        rec.negative_hint = false;
      } else if (!neg.empty()) {
        throw ValidationError(line_no, "negative must be 0/1, got '" + neg + "'");
      }
    }
    records.push_back(std::move(rec));
  }
  if (!have_header) throw SchemaError("manifest " + path.string() + " has no header");
  return DatasetIndex::from_records(std::move(records));
}

void write_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records,
                    const std::vector<std::string>& comments) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest " + path.string());
  const auto base = path.parent_path();
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "path,patient_id,side,kl_grade,negative\n";
  for (const auto& rec : records) {
    auto p = rec.path;
    if (!p.empty()) {
      // Relative to the manifest directory so that loading resolves the same file.
      const auto rel = std::filesystem::absolute(p).lexically_normal().lexically_relative(
          std::filesystem::absolute(base.empty() ? "." : base).lexically_normal());
      if (!rel.empty()) p = rel;
    }
    out << quote_if_needed(p.generic_string()) << ',' << quote_if_needed(rec.patient_id) << ','
        << side_name(rec.side) << ',' << rec.kl_grade << ',';
    if (rec.negative_hint) out << (*rec.negative_hint ? '1' : '0');
    out << '\n';
  }
}

}  // namespace koa::data
