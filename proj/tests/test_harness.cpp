#include <catch2/catch.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "rfim/harness.hpp"
#include "rfim/verify.hpp"

using namespace rfim;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("rfim_test_" + std::to_string(::getpid()) + "_" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("record lines round-trip exactly") {
  ExperimentRecord rec;
  rec.kind = "mn";
  rec.N = 16;
  rec.epsilon = 0.1 + 0.2;  // not exactly representable, must survive
  rec.master_seed = 0xdeadbeefcafef00dULL;
  rec.sample_index = 41;
  rec.scalars["xi_o_zero"] = 1.0;
  rec.scalars["weird"] = 1.2345678901234567e-89;
  rec.flags["ok"] = true;
  rec.tie = true;

  const std::string line = to_record_line(rec);
  const ExperimentRecord back = parse_record_line(line);
  REQUIRE(back.kind == rec.kind);
  REQUIRE(back.N == rec.N);
  REQUIRE(back.epsilon == rec.epsilon);
  REQUIRE(back.master_seed == rec.master_seed);
  REQUIRE(back.sample_index == rec.sample_index);
  REQUIRE(back.scalars == rec.scalars);
  REQUIRE(back.flags == rec.flags);
  REQUIRE(back.tie == rec.tie);
  REQUIRE(to_record_line(back) == line);
}

TEST_CASE("config validation rejects bad requests") {
  RunConfig config;
  config.kind = "mn";
  config.samples = 0;
  REQUIRE_THROWS_AS(config.validate(), validation_error);
  config.samples = 10;
  config.kind = "bogus";
  REQUIRE_THROWS_AS(config.validate(), validation_error);
  config.kind = "mn";
  config.n_list = {3};
  REQUIRE_THROWS_AS(config.validate(), validation_error);
  config.n_list = {4};
  config.eps_list = {0.0};
  REQUIRE_THROWS_AS(config.validate(), validation_error);
  config.eps_list = {1.0};
  config.workers = 0;
  REQUIRE_THROWS_AS(config.validate(), validation_error);
  config.workers = 2;
  REQUIRE_NOTHROW(config.validate());
}

TEST_CASE("run writes the artifact set and the summary matches the records") {
  TempDir dir;
  RunConfig config;
  config.kind = "mn";
  config.n_list = {4, 8};
  config.eps_list = {1.0};
  config.samples = 80;
  config.master_seed = 99;
  config.workers = 2;
  config.out_dir = (dir.path / "run").string();
  REQUIRE(run(config) == kExitOk);

  for (const char* name :
       {"records.jsonl", "summary.json", "analysis.json", "report.csv", "config.json",
        "decay.svg"})
    REQUIRE(fs::exists(dir.path / "run" / name));

  // Summary recomputed from the records file matches the emitted one.
  const auto records = read_records_file((dir.path / "run" / "records.jsonl").string());
  REQUIRE(records.size() == 160);
  const std::string recomputed = summarize_records(records).dump(2) + "\n";
  REQUIRE(recomputed == slurp(dir.path / "run" / "summary.json"));

  // The streamed file equals the in-memory serialization byte for byte.
  RunConfig replay = config;
  REQUIRE(records_to_string(execute(replay).records) ==
          slurp(dir.path / "run" / "records.jsonl"));

  // Partial files parse line by line even when truncated mid-stream.
  const std::string all = slurp(dir.path / "run" / "records.jsonl");
  const std::string partial = all.substr(0, all.find('\n', all.size() / 2) + 1);
  std::istringstream is(partial);
  const auto some = read_records(is);
  REQUIRE(some.size() > 0);
  REQUIRE(some.size() < records.size());
}

TEST_CASE("reruns and worker counts produce byte-identical artifacts") {
  TempDir dir;
  RunConfig config;
  config.kind = "mn";
  config.n_list = {4};
  config.eps_list = {0.5, 1.0};
  config.samples = 60;
  config.master_seed = 7;

  config.workers = 1;
  config.out_dir = (dir.path / "a").string();
  REQUIRE(run(config) == kExitOk);
  config.out_dir = (dir.path / "b").string();
  REQUIRE(run(config) == kExitOk);
  config.workers = 8;
  config.out_dir = (dir.path / "c").string();
  REQUIRE(run(config) == kExitOk);

  for (const char* name : {"records.jsonl", "summary.json", "analysis.json", "report.csv"}) {
    const std::string a = slurp(dir.path / "a" / name);
    REQUIRE(a == slurp(dir.path / "b" / name));
    REQUIRE(a == slurp(dir.path / "c" / name));
  }
}

TEST_CASE("rebuild_report regenerates identical summaries from records") {
  TempDir dir;
  RunConfig config;
  config.kind = "mn";
  config.n_list = {4, 8};
  config.eps_list = {1.0};
  config.samples = 100;
  config.master_seed = 3;
  config.workers = 2;
  config.out_dir = (dir.path / "run").string();
  REQUIRE(run(config) == kExitOk);

  const std::string summary_before = slurp(dir.path / "run" / "summary.json");
  const std::string csv_before = slurp(dir.path / "run" / "report.csv");
  fs::remove(dir.path / "run" / "summary.json");
  fs::remove(dir.path / "run" / "report.csv");
  REQUIRE(rebuild_report((dir.path / "run").string()) == kExitOk);
  REQUIRE(slurp(dir.path / "run" / "summary.json") == summary_before);
  REQUIRE(slurp(dir.path / "run" / "report.csv") == csv_before);
  REQUIRE(fs::exists(dir.path / "run" / "decay.svg"));
}

TEST_CASE("execute runs every experiment kind end to end") {
  RunConfig config;
  config.samples = 8;
  config.master_seed = 5;
  config.workers = 2;

  const auto run_kind = [&](const char* kind, std::size_t expected_records) {
    config.kind = kind;
    const RunOutput out = execute(config);
    REQUIRE(out.records.size() == expected_records);
    REQUIRE(!out.invariant_violated);
    // Every record kind survives a serialize/parse round trip.
    for (const ExperimentRecord& rec : out.records) {
      const std::string line = to_record_line(rec);
      REQUIRE(to_record_line(parse_record_line(line)) == line);
    }
  };

  config.n_list = {16};
  run_kind("perturb", 8);
  run_kind("star", 8);
  config.n_list = {32};
  run_kind("crossing", 8);
  config.n_list = {16};
  run_kind("geodesic", 8);
  config.n_list = {4};
  config.samples = 16;
  run_kind("ischeck", 16);
  config.n_list = {32};
  config.samples = 8;
  run_kind("annulus", 8);
  config.n_list = {16};
  config.n_prime = 4;
  run_kind("animal", 8);
}

TEST_CASE("invariant violations keep partial records and exit code 2") {
  TempDir dir;
  RunConfig config;
  config.kind = "mn";
  config.n_list = {4};
  config.eps_list = {1.0};
  config.samples = 40;
  config.master_seed = 12;
  config.workers = 2;
  config.out_dir = (dir.path / "bad").string();

  testing::fault_flip_origin = true;
  const int code = run(config);
  testing::fault_flip_origin = false;
  REQUIRE(code == kExitInvariant);
  REQUIRE(fs::exists(dir.path / "bad" / "records.jsonl"));
  // Whatever was completed still parses cleanly.
  const auto records = read_records_file((dir.path / "bad" / "records.jsonl").string());
  REQUIRE(records.size() < 40);
}

TEST_CASE("unwritable output directories raise io errors") {
  RunConfig config;
  config.kind = "mn";
  config.n_list = {4};
  config.samples = 1;
  config.out_dir = "/proc/definitely/not/writable";
  REQUIRE_THROWS_AS(run(config), io_error);
}

TEST_CASE("the coupling criterion fails under fault injection and passes clean") {
  VerifyOptions options;
  options.workers = 2;
  REQUIRE(verify_detail::monotone_coupling(options).pass);
  testing::fault_flip_origin = true;
  const CriterionResult faulted = verify_detail::monotone_coupling(options);
  testing::fault_flip_origin = false;
  REQUIRE(!faulted.pass);
}

TEST_CASE("decay svg contains axes, points and the fitted slope") {
  std::vector<MnPoint> points;
  for (std::int32_t n : {4, 8, 16}) {
    MnPoint p;
    p.N = n;
    p.samples = 100;
    p.zero_count = 100 >> (n / 4);
    p.m_hat = double(p.zero_count) / 100.0;
    p.se = wald_se(p.m_hat, 100);
    points.push_back(p);
  }
  const std::string svg = decay_svg(points, true, 0.2, 0.01, 0.0);
  REQUIRE(svg.find("<svg") != std::string::npos);
  REQUIRE(svg.find("circle") != std::string::npos);
  REQUIRE(svg.find("rate c =") != std::string::npos);
  REQUIRE(svg.find("</svg>") != std::string::npos);
}
