#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kgring/config.hpp"

namespace kgring {

std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a_hex(const std::string& bytes);

// RFC-4180 table; numbers printed with 17 significant digits.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}
  CsvTable& row(std::vector<std::string> cells);
  std::string str() const;
  const std::vector<std::string>& header() const { return header_; }
  const std::vector<std::vector<std::string>>& rows() const { return rows_; }
  static CsvTable parse(const std::string& text);

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

std::string num(double x);
std::string num(long long x);
inline std::string num(int x) { return num(static_cast<long long>(x)); }

struct OutputFile {
  std::string name;
  std::string digest;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string version;
  std::string command;
  std::string config_json;  // canonical snapshot
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, double>> timings;  // seconds
  std::vector<OutputFile> outputs;
  std::string created;  // UTC timestamp; the only non-reproducible field
  int exit_code = 0;

  std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

// Directory of outputs plus manifest.json.
class RunDir {
 public:
  RunDir(std::filesystem::path dir, std::string command, const RunConfig& cfg);
  void write(const std::string& name, const std::string& content);
  // Subcommand flags, stored under "options" in the config snapshot.
  void options(const std::string& json_object);
  void time(const std::string& stage, double seconds) { m_.timings.push_back({stage, seconds}); }
  void finish(int exit_code);
  const std::filesystem::path& path() const { return dir_; }
  const RunManifest& manifest() const { return m_; }

 private:
  std::filesystem::path dir_;
  RunManifest m_;
};

std::string read_file(const std::filesystem::path& p);

// Keys (dotted paths) whose values differ between two config snapshots.
std::vector<std::string> config_diff(const std::string& a_json, const std::string& b_json,
                                     const std::vector<std::string>& ignore = {});

// Pools a statistical table (columns mean, se, count plus key columns)
// across runs: mean weighted by count, se = sqrt(sum n_i^2 se_i^2) / sum n_i.
CsvTable pool_stat_tables(const std::vector<CsvTable>& tables);

struct ReportResult {
  std::string summary;
  std::map<std::string, std::string> files;  // name -> content
};
// Merges run directories; throws ConfigError when configs differ beyond the seed.
ReportResult merge_runs(const std::vector<std::filesystem::path>& dirs);

}  // namespace kgring
