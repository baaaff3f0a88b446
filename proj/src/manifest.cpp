#include "kgring/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace kgring {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string fnv1a_hex(const std::string& bytes) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string num(long long x) { return std::to_string(x); }

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw DomainError("CsvTable: row width mismatch");
  rows_.push_back(std::move(cells));
  return *this;
}

namespace {

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

void emit(std::ostringstream& os, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << quote(cells[i]);
  os << "\r\n";
}

}  // namespace

std::string CsvTable::str() const {
  std::ostringstream os;
  emit(os, header_);
  for (auto& r : rows_) emit(os, r);
  return os.str();
}

CsvTable CsvTable::parse(const std::string& text) {
  std::vector<std::vector<std::string>> recs;
  std::vector<std::string> cur;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      cur.push_back(cell);
      cell.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      cur.push_back(cell);
      recs.push_back(cur);
      cur.clear();
      cell.clear();
      any = false;
    } else {
      cell += c;
      any = true;
    }
  }
  if (any || !cell.empty() || !cur.empty()) {
    cur.push_back(cell);
    recs.push_back(cur);
  }
  if (recs.empty()) throw DomainError("CsvTable::parse: empty input");
  CsvTable t(recs.front());
  for (std::size_t i = 1; i < recs.size(); ++i) t.row(recs[i]);
  return t;
}

std::string RunManifest::to_json() const {
  json j;
  j["version"] = version;
  j["command"] = command;
  j["config"] = json::parse(config_json);
  j["seed"] = seed;
  j["exit_code"] = exit_code;
  j["created"] = created;
  j["timings"] = json::object();
  for (auto& [k, v] : timings) j["timings"][k] = v;
  j["outputs"] = json::array();
  for (auto& o : outputs) j["outputs"].push_back({{"name", o.name}, {"fnv1a64", o.digest}, {"bytes", o.bytes}});
  return j.dump(2) + "\n";
}

RunManifest RunManifest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError("manifest", std::string("unreadable manifest: ") + e.what());
  }
  RunManifest m;
  m.version = j.value("version", "");
  m.command = j.value("command", "");
  m.config_json = j.at("config").dump();
  m.seed = j.value("seed", std::uint64_t{0});
  m.exit_code = j.value("exit_code", 0);
  m.created = j.value("created", "");
  const json timings = j.value("timings", json::object()), outputs = j.value("outputs", json::array());
  for (auto& [k, v] : timings.items()) m.timings.push_back({k, v.get<double>()});
  for (auto& o : outputs)
    m.outputs.push_back({o.at("name").get<std::string>(), o.at("fnv1a64").get<std::string>(),
                         o.at("bytes").get<std::uintmax_t>()});
  return m;
}

RunDir::RunDir(fs::path dir, std::string command, const RunConfig& cfg) : dir_(std::move(dir)) {
  fs::create_directories(dir_);
  m_.version = KGRING_VERSION;
  m_.command = std::move(command);
  m_.config_json = json::parse(config_to_json(cfg)).dump();
  m_.seed = cfg.seed;
}

void RunDir::write(const std::string& name, const std::string& content) {
  std::ofstream out(dir_ / name, std::ios::binary);
  out << content;
  if (!out) throw Error("cannot write " + (dir_ / name).string());
  m_.outputs.push_back({name, fnv1a_hex(content), content.size()});
}

void RunDir::options(const std::string& json_object) {
  json c = json::parse(m_.config_json);
  c["options"] = json::parse(json_object);
  m_.config_json = c.dump();
}

void RunDir::finish(int exit_code) {
  m_.exit_code = exit_code;
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  m_.created = buf;
  std::ofstream out(dir_ / "manifest.json", std::ios::binary);
  out << m_.to_json();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

namespace {

void flatten(const json& j, const std::string& prefix, std::map<std::string, std::string>& out) {
  if (j.is_object()) {
    for (auto& [k, v] : j.items()) flatten(v, prefix.empty() ? k : prefix + "." + k, out);
  } else {
    out[prefix] = j.dump();
  }
}

}  // namespace

std::vector<std::string> config_diff(const std::string& a_json, const std::string& b_json,
                                     const std::vector<std::string>& ignore) {
  std::map<std::string, std::string> a, b;
  flatten(json::parse(a_json), "", a);
  flatten(json::parse(b_json), "", b);
  std::vector<std::string> out;
  auto skip = [&](const std::string& k) { return std::find(ignore.begin(), ignore.end(), k) != ignore.end(); };
  for (auto& [k, v] : a) {
    if (skip(k)) continue;
    auto it = b.find(k);
    if (it == b.end())
      out.push_back(k + ": " + v + " vs (missing)");
    else if (it->second != v)
      out.push_back(k + ": " + v + " vs " + it->second);
  }
  for (auto& [k, v] : b)
    if (!skip(k) && !a.count(k)) out.push_back(k + ": (missing) vs " + v);
  return out;
}

CsvTable pool_stat_tables(const std::vector<CsvTable>& tables) {
  if (tables.empty()) throw DomainError("pool_stat_tables: nothing to pool");
  if (tables.size() == 1) return tables.front();
  const auto& h = tables.front().header();
  auto col = [&](const std::string& name) {
    auto it = std::find(h.begin(), h.end(), name);
    if (it == h.end()) throw DomainError("pool_stat_tables: missing column " + name);
    return static_cast<std::size_t>(it - h.begin());
  };
  const std::size_t cm = col("mean"), cs = col("se"), cn = col("count");
  for (auto& t : tables)
    if (t.header() != h || t.rows().size() != tables.front().rows().size())
      throw DomainError("pool_stat_tables: tables do not line up");
  CsvTable out(h);
  for (std::size_t r = 0; r < tables.front().rows().size(); ++r) {
    std::vector<std::string> cells = tables.front().rows()[r];
    double sn = 0, sm = 0, sv = 0;
    for (auto& t : tables) {
      const auto& row = t.rows()[r];
      for (std::size_t c = 0; c < h.size(); ++c)
        if (c != cm && c != cs && c != cn && row[c] != cells[c])
          throw DomainError("pool_stat_tables: key column " + h[c] + " differs in row " + std::to_string(r));
      const double n = std::stod(row[cn]), m = std::stod(row[cm]), s = std::stod(row[cs]);
      sn += n;
      sm += n * m;
      sv += n * n * s * s;
    }
    cells[cm] = num(sm / sn);
    cells[cs] = num(std::sqrt(sv) / sn);
    cells[cn] = num(static_cast<long long>(std::llround(sn)));
    out.row(cells);
  }
  return out;
}

ReportResult merge_runs(const std::vector<fs::path>& dirs) {
  if (dirs.empty()) throw ConfigError("report", "no run directories given");
  std::vector<RunManifest> ms;
  for (auto& d : dirs) ms.push_back(RunManifest::from_json(read_file(d / "manifest.json")));
  for (std::size_t i = 1; i < ms.size(); ++i) {
    if (ms[i].command != ms[0].command)
      throw ConfigError("command", "runs come from different subcommands: " + ms[0].command + " vs " + ms[i].command);
    auto diff = config_diff(ms[0].config_json, ms[i].config_json, {"rng.seed"});
    if (!diff.empty()) {
      std::string msg = "configs differ between " + dirs[0].string() + " and " + dirs[i].string() + ":";
      for (auto& d : diff) msg += "\n  " + d;
      throw ConfigError(diff.front().substr(0, diff.front().find(':')), msg);
    }
  }
  ReportResult res;
  std::ostringstream sum;
  sum << "kgring report: " << ms.size() << " run(s) of '" << ms[0].command << "'\n";
  for (std::size_t i = 0; i < ms.size(); ++i)
    sum << "  " << dirs[i].string() << "  seed=" << ms[i].seed << "  exit=" << ms[i].exit_code
        << "  created=" << ms[i].created << "\n";
  for (auto& out : ms[0].outputs) {
    if (out.name.size() < 4 || out.name.substr(out.name.size() - 4) != ".csv") continue;
    std::vector<CsvTable> tabs;
    bool same = true;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      auto it = std::find_if(ms[i].outputs.begin(), ms[i].outputs.end(),
                             [&](const OutputFile& o) { return o.name == out.name; });
      if (it == ms[i].outputs.end()) throw ConfigError(out.name, "output missing in " + dirs[i].string());
      same = same && it->digest == out.digest;
      const std::string text = read_file(dirs[i] / out.name);
      if (fnv1a_hex(text) != it->digest)
        throw ConfigError(out.name, "digest mismatch in " + dirs[i].string() + " (file modified?)");
      tabs.push_back(CsvTable::parse(text));
    }
    const auto& h = tabs[0].header();
    const bool stat = std::find(h.begin(), h.end(), "se") != h.end() &&
                      std::find(h.begin(), h.end(), "count") != h.end();
    if (stat) {
      res.files[out.name] = pool_stat_tables(tabs).str();
      sum << "  " << out.name << ": pooled over " << tabs.size() << " run(s), " << tabs[0].rows().size()
          << " rows\n";
    } else {
      res.files[out.name] = read_file(dirs[0] / out.name);
      sum << "  " << out.name << ": " << (same ? "identical across runs" : "DIFFERS across runs (first kept)")
          << "\n";
    }
    // criteria-style status columns are echoed verbatim
    auto pc = std::find(h.begin(), h.end(), "pass");
    if (pc != h.end()) {
      const auto c = static_cast<std::size_t>(pc - h.begin());
      for (auto& row : tabs[0].rows()) sum << "    " << row[0] << ": " << (row[c] == "1" ? "PASS" : "FAIL") << "\n";
    }
  }
  res.summary = sum.str();
  return res;
}

}  // namespace kgring
