#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace trapsim::manifest {

inline constexpr std::string_view kToolVersion = "1.0.0";

std::string sha256_hex(const void* data, size_t n);
std::string sha256_hex(const std::string& s);
std::string sha256_file(const std::string& path);

struct RunRecord {
  std::string command;                 // CLI subcommand line
  unsigned long long seed = 0;
  std::string config_path;             // may be empty
  std::string config_sha256;
  std::vector<std::pair<std::string, std::string>> outputs;  // path, sha256
  std::string timestamp;               // ISO-8601 UTC; empty = now
};

// Append the record to a JSON manifest (array of run objects), creating the
// file if needed. Atomic: writes a temp file in the same directory, then
// renames over the target.
void append_run(const std::string& manifest_path, const RunRecord& record);

// Write text to path atomically (tmp + rename) and return its sha256.
std::string write_file_atomic(const std::string& path, const std::string& content);

}  // namespace trapsim::manifest
