#include <gtest/gtest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "cli.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run_tome(std::vector<std::string> args) {
  args.insert(args.begin(), "tome");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = tome::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(TOME_TEST_TMP) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "run.ini";
  std::ofstream(p) << text;
  return p.string();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Independent FNV-1a 64.
std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const std::string kFig3a = "gamma = 0.4\nepsilon = 0.4\ntau = 1\nd_f = 0.5\n";
const std::string kFig4 = "gamma = 0.3\nepsilon = 0.5\ntau = 1\nd_f = 0.5\n";

}  // namespace

TEST(CliUsage, MissingArgumentsAreUsageErrors) {
  EXPECT_EQ(run_tome({}).code, tome::cli::kUsage);
  EXPECT_EQ(run_tome({"scales"}).code, tome::cli::kUsage);
  const fs::path dir = scratch("usage");
  const std::string cfg = write_config(dir, kFig3a);
  EXPECT_EQ(run_tome({"--config", cfg, "frobnicate"}).code, tome::cli::kUsage);
  EXPECT_EQ(run_tome({"--config", (dir / "missing.ini").string(), "scales"}).code, tome::cli::kUsage);
}

TEST(CliUsage, BadConfigNamesLineAndKey) {
  const fs::path dir = scratch("badcfg");
  const Result r = run_tome({"--config", write_config(dir, "gamma = 0.4\nthis is not a pair\n"), "scales"});
  EXPECT_EQ(r.code, tome::cli::kUsage);
  EXPECT_NE(r.err.find(":2"), std::string::npos) << r.err;
  const Result k = run_tome({"--config", write_config(dir, "gamma = abc\nepsilon = 0.4\n"), "scales"});
  EXPECT_EQ(k.code, tome::cli::kUsage);
  EXPECT_NE(k.err.find("gamma"), std::string::npos) << k.err;
}

TEST(CliScales, Figure3aRow) {
  const fs::path dir = scratch("scales");
  const Result r = run_tome({"--config", write_config(dir, kFig3a), "--out", (dir / "o").string(), "--json", "scales"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json j = json::parse(r.out);
  EXPECT_NEAR(j["R"].get<double>(), 0.177778, 1e-6);
  EXPECT_NEAR(j["alpha_tail"].get<double>(), 3.5, 1e-12);
  EXPECT_EQ(j["n_max_moment"].get<int>(), 2);
  EXPECT_TRUE(fs::exists(dir / "o" / "scales.json"));
  const Result table = run_tome({"--config", write_config(dir, kFig3a), "--out", (dir / "t").string(), "scales"});
  EXPECT_NE(table.out.find("0.1777777"), std::string::npos) << table.out;
}

TEST(CliScales, NoMultiplicativeNoiseGivesZeroR) {
  const fs::path dir = scratch("scales_eps0");
  const Result r = run_tome({"--config", write_config(dir, "gamma = 0.4\nepsilon = 0\ntau = 1\nd_f = 0.5\n"), "--out",
                         (dir / "o").string(), "--json", "scales"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["R"].get<double>(), 0.0);
}

TEST(CliScales, SweepIsMonotoneInGammaTau) {
  const fs::path dir = scratch("sweep");
  const Result r = run_tome({"--config", write_config(dir, kFig3a), "--out", (dir / "o").string(), "scales", "--sweep",
                         "gamma_tau=0.01:10:60", "--deltas", "0.2,0.4"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(slurp(dir / "o" / "scales_sweep.csv"));
  std::string line;
  std::map<double, std::vector<std::pair<double, double>>> curves;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      EXPECT_EQ(line, "delta,gamma_tau,theta_over_tau,R");
      header_seen = true;
      continue;
    }
    double d, gt, th, big_r;
    ASSERT_EQ(std::sscanf(line.c_str(), "%lf,%lf,%lf,%lf", &d, &gt, &th, &big_r), 4) << line;
    curves[d].emplace_back(gt, big_r);
  }
  ASSERT_EQ(curves.size(), 2u);
  for (const auto& [d, c] : curves) {
    ASSERT_EQ(c.size(), 60u);
    EXPECT_NEAR(c.front().first, 0.01, 1e-12);
    EXPECT_NEAR(c.back().first, 10.0, 1e-9);
    for (std::size_t i = 1; i < c.size(); ++i) {
      EXPECT_GT(c[i].first, c[i - 1].first);
      EXPECT_LT(c[i].second, c[i - 1].second) << d;
    }
  }
}

TEST(CliNdcoeffs, SpectralGapFailureIsNumerical) {
  const fs::path dir = scratch("nd");
  const std::string cfg = "E = 1 0.2; 0 2\nD = 1 0; 0 1\nG = 0 1; 1 0\nepsilon = 0.1\n";
  const Result bad = run_tome({"--config", write_config(dir, cfg + "tau = 1\n"), "--out", (dir / "a").string(), "ndcoeffs"});
  EXPECT_EQ(bad.code, tome::cli::kNumerical);
  EXPECT_NE(bad.err.find("spectral gap"), std::string::npos) << bad.err;
  EXPECT_EQ(json::parse(slurp(dir / "a" / "manifest.json"))["status"], "numerical_failure");
  const Result ok = run_tome({"--config", write_config(dir, cfg + "tau = 0.4\n"), "--out", (dir / "b").string(), "ndcoeffs"});
  EXPECT_EQ(ok.code, 0) << ok.err;
  EXPECT_TRUE(fs::exists(dir / "b" / "K_third.csv"));
}

TEST(CliManifest, FilesExistWithMatchingHashes) {
  const fs::path dir = scratch("manifest");
  const fs::path out = dir / "o";
  const Result r = run_tome({"--config", write_config(dir, kFig3a + "samples = 20000\n"), "--out", out.string(), "simulate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = json::parse(slurp(out / "manifest.json"));
  EXPECT_EQ(m["command"], "simulate");
  EXPECT_EQ(m["seed"], 1);
  EXPECT_EQ(m["parameters"]["samples"], "20000");
  const std::string run_hash = m["run_hash"];
  ASSERT_GE(m["files"].size(), 3u);
  for (const auto& f : m["files"]) {
    const fs::path p = out / f["name"].get<std::string>();
    ASSERT_TRUE(fs::exists(p)) << p;
    const std::string content = slurp(p);
    EXPECT_EQ(f["fnv1a64"], fnv1a_hex(content)) << p;
    EXPECT_EQ(f["bytes"].get<std::size_t>(), content.size());
    if (p.extension() == ".csv") EXPECT_EQ(content.rfind("# run_hash=" + run_hash + "\n", 0), 0u) << p;
  }
}

TEST(CliReproducibility, SimulateIsByteIdenticalAcrossThreads) {
  const fs::path dir = scratch("repro");
  const std::string cfg = write_config(dir, kFig3a + "samples = 50000\n");
  ASSERT_EQ(run_tome({"--config", cfg, "--seed", "7", "--threads", "1", "--out", (dir / "a").string(), "simulate"}).code, 0);
  ASSERT_EQ(run_tome({"--config", cfg, "--seed", "7", "--threads", "3", "--out", (dir / "b").string(), "simulate"}).code, 0);
  ASSERT_EQ(run_tome({"--config", cfg, "--seed", "8", "--out", (dir / "c").string(), "simulate"}).code, 0);
  for (const char* f : {"histogram.csv", "abs_histogram.csv", "stats.json"}) {
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
    EXPECT_NE(slurp(dir / "a" / f), slurp(dir / "c" / f)) << f;
  }
}

TEST(CliCompare, Figure4MomentsAreDivergent) {
  const fs::path dir = scratch("fig4");
  const Result r = run_tome({"--config", write_config(dir, kFig4 + "samples = 20000\npde_cells = 256\n"), "--out",
                         (dir / "o").string(), "compare"});
  ASSERT_TRUE(r.code == 0 || r.code == tome::cli::kAcceptance) << r.err;
  EXPECT_NE(r.out.find("divergent_variance"), std::string::npos);
  const json j = json::parse(slurp(dir / "o" / "compare.json"));
  EXPECT_EQ(j["regime"], "divergent_variance");
  for (int n : {2, 4}) {
    EXPECT_EQ(j["moments"][n - 1]["third_order"], "Divergent") << n;
    EXPECT_EQ(j["moments"][n - 1]["fick"], "Divergent") << n;
  }
  EXPECT_EQ(j["moments"][0]["third_order"], 0.0);
  // The table prints the divergence marker instead of a number.
  std::istringstream table(r.out);
  std::string line;
  int marked = 0;
  while (std::getline(table, line)) {
    if ((line.rfind("2 ", 0) == 0 || line.rfind("4 ", 0) == 0) && line.find("∞") != std::string::npos) ++marked;
  }
  EXPECT_EQ(marked, 2);
}

TEST(CliCompare, Figure3aPasses) {
  const fs::path dir = scratch("fig3a");
  const Result r = run_tome({"--config", write_config(dir, kFig3a), "--out", (dir / "o").string(), "--json", "compare"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const json j = json::parse(slurp(dir / "o" / "compare.json"));
  EXPECT_EQ(j["verdict"], "PASS");
  EXPECT_LT(j["l1"]["mc_vs_third"].get<double>(), j["l1"]["mc_vs_fick"].get<double>());
  for (const char* f : {"histogram.csv", "peq_third.csv", "peq_fick.csv", "pde_steady.csv", "moments.csv",
                        "moment_comparison.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir / "o" / f)) << f;
  }
}

TEST(CliCompare, UnperturbedCaseIsDegenerate) {
  const fs::path dir = scratch("delta0");
  const Result r = run_tome({"--config", write_config(dir, "gamma = 0.4\nepsilon = 0\ntau = 1\nd_f = 0.5\n"), "--out",
                         (dir / "o").string(), "compare"});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  const json j = json::parse(slurp(dir / "o" / "compare.json"));
  EXPECT_EQ(j["regime"], "degenerate");
  EXPECT_LT(j["l1"]["third_vs_fick"].get<double>(), 0.01);
  EXPECT_LT(j["l1"]["pde_vs_third"].get<double>(), 0.01);
  EXPECT_LT(j["l1"]["mc_vs_third"].get<double>(), 0.01);
  EXPECT_LT(j["l1"]["mc_vs_fick"].get<double>(), 0.01);
}

TEST(CliCompare, UnmetThresholdIsAcceptanceFailure) {
  const fs::path dir = scratch("strict");
  const Result r = run_tome({"--config", write_config(dir, kFig3a + "samples = 20000\npde_cells = 256\nthreshold_l1_third = 1e-9\n"),
                         "--out", (dir / "o").string(), "compare"});
  EXPECT_EQ(r.code, tome::cli::kAcceptance);
  const json m = json::parse(slurp(dir / "o" / "manifest.json"));
  EXPECT_EQ(m["status"], "fail");
  EXPECT_EQ(json::parse(slurp(dir / "o" / "compare.json"))["verdict"], "FAIL");
}

TEST(CliSubcommands, PeqEvolveMomentsWriteOutputs) {
  const fs::path dir = scratch("subs");
  const std::string cfg = write_config(dir, kFig3a + "pde_cells = 256\nevolve_t_end = 5\nsnapshots = 1,5\nmoments_x2_initial = 9\n");
  ASSERT_EQ(run_tome({"--config", cfg, "--out", (dir / "p").string(), "peq"}).code, 0);
  ASSERT_EQ(run_tome({"--config", cfg, "--out", (dir / "e").string(), "evolve"}).code, 0);
  const Result m = run_tome({"--config", cfg, "--out", (dir / "m").string(), "moments"});
  ASSERT_EQ(m.code, 0) << m.err;
  EXPECT_TRUE(fs::exists(dir / "p" / "peq_third.csv"));
  EXPECT_TRUE(fs::exists(dir / "e" / "evolve.json"));
  EXPECT_TRUE(fs::exists(dir / "m" / "moments_relaxation.csv"));
  EXPECT_NE(m.out.find("4.0277"), std::string::npos) << m.out;
}
