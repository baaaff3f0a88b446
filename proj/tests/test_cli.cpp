#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kgring/cli.hpp"
#include "kgring/manifest.hpp"

using namespace kgring;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "kgring_test_cli" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json base_config(int N = 4, std::uint64_t seed = 7) {
  return {{"model", {{"N", N}, {"M", 8 * N}, {"g", 0.01}}},
          {"coupling",
           {{"alpha1", {{"amplitude", 0.5}, {"phase", 0.0}}},
            {"alpha2", {{"amplitude", 0.5}, {"phase", 1.0471975511965976}}},
            {"c0", 2.0},
            {"c1", 0.1},
            {"c2", 0.9}}},
          {"temps", {{"T1", 2.0}, {"T2", 1.0}}},
          {"rng", {{"seed", seed}}}};
}

std::string write_config(const fs::path& dir, const json& j, const std::string& name = "cfg.json") {
  const fs::path p = dir / name;
  std::ofstream(p) << j.dump(2);
  return p.string();
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream o, e;
  const int code = cli_main(args, o, e);
  return {code, o.str(), e.str()};
}

}  // namespace

TEST_CASE("spectrum on a valid config writes CSV and manifest") {
  const auto dir = scratch("spectrum");
  const auto cfg = write_config(dir, base_config());
  const auto r = run({"spectrum", "--config", cfg, "--out", (dir / "out").string()});
  INFO(r.err);
  REQUIRE(r.code == kExitOk);
  const auto table = CsvTable::parse(read_file(dir / "out" / "spectrum.csv"));
  CHECK(table.rows().size() == 4 * 4 + 4);
  CHECK(table.header()[0] == "label");
  const auto m = RunManifest::from_json(read_file(dir / "out" / "manifest.json"));
  CHECK(m.command == "spectrum");
  CHECK(m.seed == 7);
  REQUIRE(m.outputs.size() == 1);
  CHECK(m.outputs[0].digest == fnv1a_hex(read_file(dir / "out" / "spectrum.csv")));
  CHECK(json::parse(m.config_json)["tol"]["root"].get<double>() == 1e-10);
}

TEST_CASE("missing coupling key names its path") {
  const auto dir = scratch("missing");
  auto j = base_config();
  j["coupling"].erase("alpha1");
  const auto r = run({"spectrum", "--config", write_config(dir, j), "--out", (dir / "out").string()});
  CHECK(r.code == kExitError);
  CHECK(r.err.find("coupling.alpha1") != std::string::npos);
}

TEST_CASE("degenerate coupling fails validation with the inequality named") {
  const auto dir = scratch("degenerate");
  auto j = base_config();
  // alpha2 = i alpha1 for n > 0: alpha.alpha = 0
  j["coupling"]["alpha2"]["phase"] = 1.5707963267948966;
  const auto r = run({"validate", "--config", write_config(dir, j), "--out", (dir / "out").string()});
  CHECK(r.code == kExitValidation);
  CHECK(r.err.find("inequality 1") != std::string::npos);
  CHECK(r.err.find("c1 <= |a.a|") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "coupling.csv"));
  CHECK(RunManifest::from_json(read_file(dir / "out" / "manifest.json")).exit_code == kExitValidation);
}

TEST_CASE("config path from the environment") {
  const auto dir = scratch("env");
  const auto cfg = write_config(dir, base_config());
  ::setenv("KGRING_CONFIG", cfg.c_str(), 1);
  const auto r = run({"spectrum", "--out", (dir / "out").string()});
  ::unsetenv("KGRING_CONFIG");
  CHECK(r.code == kExitOk);
  const auto none = run({"spectrum", "--out", (dir / "out2").string()});
  CHECK(none.code == kExitError);
}

TEST_CASE("bad usage is an error, help is not") {
  CHECK(run({}).code == kExitError);
  CHECK(run({"nonsense"}).code == kExitError);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("same config and seed give byte-identical outputs") {
  const auto dir = scratch("repro");
  const auto cfg = write_config(dir, base_config());
  for (auto sub : {"spectrum", "covariance", "fixpoint", "diagrams"}) {
    INFO(sub);
    REQUIRE(run({sub, "-c", cfg, "-o", (dir / (std::string(sub) + "_a")).string()}).code == kExitOk);
    REQUIRE(run({sub, "-c", cfg, "-o", (dir / (std::string(sub) + "_b")).string()}).code == kExitOk);
    const auto ma = RunManifest::from_json(read_file(dir / (std::string(sub) + "_a") / "manifest.json"));
    const auto mb = RunManifest::from_json(read_file(dir / (std::string(sub) + "_b") / "manifest.json"));
    REQUIRE(ma.outputs.size() == mb.outputs.size());
    for (std::size_t i = 0; i < ma.outputs.size(); ++i) {
      CHECK(ma.outputs[i].digest == mb.outputs[i].digest);
      CHECK(read_file(dir / (std::string(sub) + "_a") / ma.outputs[i].name) ==
            read_file(dir / (std::string(sub) + "_b") / mb.outputs[i].name));
    }
  }
  const std::vector<std::string> sim{"--samples", "2000", "--batches", "10", "--observables", "cov,current,decay"};
  auto args = [&](const std::string& o) {
    std::vector<std::string> a{"simulate", "-c", cfg, "-o", (dir / o).string()};
    a.insert(a.end(), sim.begin(), sim.end());
    return a;
  };
  REQUIRE(run(args("sim_a")).code == kExitOk);
  REQUIRE(run(args("sim_b")).code == kExitOk);
  for (auto f : {"covariance.csv", "current.csv", "decay.csv", "simulate.json"})
    CHECK(read_file(dir / "sim_a" / f) == read_file(dir / "sim_b" / f));
}

TEST_CASE("report: identity, seed pooling, refusal") {
  const auto dir = scratch("report");
  const std::vector<std::string> sim{"--samples", "3000", "--batches", "10"};
  auto simulate = [&](const json& j, const std::string& name) {
    std::vector<std::string> a{"simulate", "-c", write_config(dir, j, name + ".json"), "-o", (dir / name).string()};
    a.insert(a.end(), sim.begin(), sim.end());
    return run(a).code;
  };
  REQUIRE(simulate(base_config(4, 1), "s1") == kExitOk);
  REQUIRE(simulate(base_config(4, 2), "s2") == kExitOk);
  REQUIRE(simulate(base_config(5, 1), "n5") == kExitOk);

  SUBCASE("single run is the identity") {
    REQUIRE(run({"report", (dir / "s1").string(), "-o", (dir / "rep1").string()}).code == kExitOk);
    for (auto f : {"covariance.csv", "current.csv"})
      CHECK(read_file(dir / "rep1" / f) == read_file(dir / "s1" / f));
    CHECK(fs::exists(dir / "rep1" / "summary.txt"));
  }
  SUBCASE("two seeds pool the statistical columns") {
    REQUIRE(run({"report", (dir / "s1").string(), (dir / "s2").string(), "-o", (dir / "rep2").string()}).code ==
            kExitOk);
    const auto a = CsvTable::parse(read_file(dir / "s1" / "current.csv"));
    const auto b = CsvTable::parse(read_file(dir / "s2" / "current.csv"));
    const auto p = CsvTable::parse(read_file(dir / "rep2" / "current.csv"));
    // columns: observable, mean, se, count
    const double na = std::stod(a.rows()[0][3]), nb = std::stod(b.rows()[0][3]);
    const double ma = std::stod(a.rows()[0][1]), mb = std::stod(b.rows()[0][1]);
    const double sa = std::stod(a.rows()[0][2]), sb = std::stod(b.rows()[0][2]);
    CHECK(std::stod(p.rows()[0][1]) == doctest::Approx((na * ma + nb * mb) / (na + nb)).epsilon(1e-14));
    CHECK(std::stod(p.rows()[0][2]) ==
          doctest::Approx(std::sqrt(na * na * sa * sa + nb * nb * sb * sb) / (na + nb)).epsilon(1e-14));
    CHECK(std::stod(p.rows()[0][3]) == na + nb);
    CHECK(std::stod(p.rows()[0][2]) < std::max(sa, sb));
  }
  SUBCASE("different N is refused with the diff") {
    const auto r = run({"report", (dir / "s1").string(), (dir / "n5").string(), "-o", (dir / "rep3").string()});
    CHECK(r.code == kExitError);
    CHECK(r.err.find("model.N: 4 vs 5") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "rep3" / "summary.txt"));
  }
}

TEST_CASE("CSV quoting round-trips") {
  CsvTable t({"a", "b,c", "d"});
  t.row({"x \"q\"", "1\n2", ""});
  const auto s = t.str();
  CHECK(s.find("\"b,c\"") != std::string::npos);
  const auto back = CsvTable::parse(s);
  CHECK(back.header() == t.header());
  CHECK(back.rows() == t.rows());
  CHECK(num(0.1) == "0.10000000000000001");
  CHECK(std::stod(num(1.0 / 3)) == 1.0 / 3);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("config_diff ignores listed keys") {
  const auto a = base_config(4, 1).dump(), b = base_config(4, 2).dump();
  CHECK(config_diff(a, b, {"rng.seed"}).empty());
  const auto d = config_diff(a, base_config(6, 1).dump(), {"rng.seed"});
  CHECK(d.size() == 2);  // model.N and model.M
}
