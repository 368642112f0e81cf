#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "koa/dataset/records.hpp"

namespace koa::data {

// Comma-delimited UTF-8 manifest with header `path,patient_id,side,kl_grade`.
// Optional columns: `negative` (0/1 override for negative detection). Lines starting
// with '#' are provenance comments. Relative image paths resolve against the manifest's
// directory.
//
// Missing required column -> SchemaError naming it. Bad field -> ValidationError with
// the 1-based line number (the header is line 1).
DatasetIndex load_manifest(const std::filesystem::path& path);

// Writes records with paths relative to the manifest directory when possible.
// `comments` become leading '#' lines.
void write_manifest(const std::filesystem::path& path, const std::vector<ImageRecord>& records,
                    const std::vector<std::string>& comments = {});

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace koa::data
