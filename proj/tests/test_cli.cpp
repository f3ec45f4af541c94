#include <gtest/gtest.h>

#include "cli_support.hpp"
#include "oracles.hpp"
#include "schema_check.hpp"

#ifndef HANDCLOUD_SCHEMA_DIR
#error "HANDCLOUD_SCHEMA_DIR must point at schemas/"
#endif

using namespace handcloud;
using clitest::run;
namespace fs = std::filesystem;

namespace {

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto dir = oracle::scratch_dir(std::string("cli_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    clitest::write_fixtures(dir);
    cwd_ = std::make_unique<clitest::ScopedCwd>(dir);
  }
  void TearDown() override { cwd_.reset(); }

  static io::Json parse(const cli::CommandResult& r) {
    EXPECT_EQ(r.exit_code, 0) << r.err;
    return io::Json::parse(r.out);
  }

  static void expect_valid(const io::Json& doc, const std::string& command) {
    const auto s = io::read_json(fs::path(HANDCLOUD_SCHEMA_DIR) / (command + ".schema.json"));
    const auto problems = schema::validate(doc, s);
    for (const auto& p : problems) ADD_FAILURE() << command << ": " << p;
  }

  std::unique_ptr<clitest::ScopedCwd> cwd_;
};

}  // namespace

TEST_F(Cli, EvalIdentityIsZero) {
  const io::Json doc = parse(run("eval --metric cd --gt gt2.ply --pred gt2.ply --json"));
  EXPECT_EQ(doc["cd"].get<double>(), 0.0);
  EXPECT_EQ(doc["schema"], "handcloud.eval.v1");
  expect_valid(doc, "eval");
}

TEST_F(Cli, EvalTwoPointEmd) {
  const io::Json doc = parse(run("eval --metric emd --gt gt2.ply --pred pred2.ply --json"));
  EXPECT_NEAR(doc["emd"].get<double>(), 1.41421, 5e-6);
  expect_valid(doc, "eval");
  const auto approx = parse(run("eval --metric emd --gt gt2.ply --pred pred2.ply --emd-approx --json"));
  EXPECT_NEAR(approx["emd"].get<double>(), std::sqrt(2.0), 1e-3 * std::sqrt(2.0));
  expect_valid(approx, "eval");
}

TEST_F(Cli, EvalHumanOutputIsCsv) {
  const auto r = run("eval --metric combined --gt gt2.ply --pred pred2.ply");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("term,value\n", 0), 0u);
  EXPECT_NE(r.out.find("total,"), std::string::npos);
}

TEST_F(Cli, PoseMetricsOffsetFixture) {
  const io::Json doc = parse(run("pose-metrics --pred p.json --gt g.json --json"));
  EXPECT_EQ(doc["mpjpe"].get<double>(), 5.0);
  EXPECT_EQ(doc["pck"]["thresholds"].size(), 7u);
  expect_valid(doc, "pose-metrics");
  const io::Json self = parse(run("pose-metrics --pred g.json --gt g.json --json"));
  EXPECT_EQ(self["auc"].get<double>(), 1.0);
}

TEST_F(Cli, EverySubcommandValidatesAgainstItsSchema) {
  const io::Json t = parse(run("template --kind local --n 120 --seed 3 -o local.ply --json"));
  expect_valid(t, "template");
  EXPECT_EQ(t["points"].get<std::size_t>(), 120u);
  expect_valid(parse(run("template --kind grid --n 49 -o grid.ply --json")), "template");
  const io::Json m = parse(run("sample-mesh --n 200 --seed 4 -o shell.ply --json"));
  expect_valid(m, "sample-mesh");
  EXPECT_TRUE(m["labeled"].get<bool>());
  expect_valid(parse(run("segment --query grid.ply --ref shell.ply -o seg.ply --json")), "segment");
  const io::Json f = parse(run("fuse --views view0.pgm,view1.pgm,view2.pgm,view3.pgm --cameras rig.json "
                               "--config fuse.json --seed 1 -o fused.ply --json"));
  expect_valid(f, "fuse");
  EXPECT_EQ(f["points"].get<std::size_t>(), 300u);
  const io::Json d = parse(run("train-demo --template local --scenes 3 --epochs 2 --points 60 --hidden 8 "
                               "--seed 1 --out log.csv --json"));
  expect_valid(d, "train-demo");
  EXPECT_TRUE(fs::exists("log.hcfd"));
}

TEST_F(Cli, SchemaCheckerRejectsDrift) {
  io::Json doc = parse(run("eval --metric cd --gt gt2.ply --pred gt2.ply --json"));
  doc["surprise"] = 1;
  const auto s = io::read_json(fs::path(HANDCLOUD_SCHEMA_DIR) / "eval.schema.json");
  EXPECT_FALSE(schema::validate(doc, s).empty());
}

TEST_F(Cli, TrainDemoCsvLayout) {
  ASSERT_EQ(run("train-demo --template grid --scenes 2 --epochs 3 --points 49 --hidden 8 --seed 2 --out g.csv").exit_code,
            0);
  const std::string csv = io::read_file_bytes("g.csv");
  EXPECT_EQ(csv.rfind("epoch,cd_global,emd_global,cd_local_palm,", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  const std::string header = csv.substr(0, csv.find('\n'));
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), 15);
  EXPECT_NO_THROW(io::read_weights("g.hcfd"));
}

TEST_F(Cli, FuseAcceptsRawViews) {
  const io::Json doc = parse(run("fuse --views view0.raw --seed 1 -o raw.ply --json"));
  EXPECT_GT(doc["points"].get<std::size_t>(), 0u);
}

TEST_F(Cli, HelpOnEverySubcommand) {
  for (const char* sub : {"eval", "fuse", "segment", "template", "sample-mesh", "train-demo", "pose-metrics"}) {
    const auto r = run(std::string(sub) + " --help");
    EXPECT_EQ(r.exit_code, 0) << sub;
    EXPECT_NE(r.out.find("--json"), std::string::npos) << sub;
  }
  EXPECT_EQ(run("--help").exit_code, 0);
}

TEST_F(Cli, UsageErrorsExitOne) {
  auto r = run("eval --metric cd --gt gt2.ply --pred gt2.ply --bogus");
  EXPECT_EQ(r.exit_code, cli::kExitUsage);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run("").exit_code, cli::kExitUsage);
  EXPECT_EQ(run("frobnicate").exit_code, cli::kExitUsage);
  EXPECT_EQ(run("sample-mesh --n 10 -o x.ply").exit_code, cli::kExitUsage);  // seed is required
  EXPECT_EQ(run("template --kind hand --n 10 -o x.ply").exit_code, cli::kExitUsage);
  EXPECT_EQ(run("pose-metrics --pred p.json --gt g.json --thresholds 30,20").exit_code, cli::kExitUsage);
}

TEST_F(Cli, LargeExactEmdNeedsTheApproximation) {
  ASSERT_EQ(run("sample-mesh --n 2100 --seed 1 -o big.ply").exit_code, 0);
  EXPECT_EQ(run("eval --metric emd --gt big.ply --pred big.ply").exit_code, cli::kExitUsage);
  EXPECT_EQ(run("eval --metric cd --gt big.ply --pred big.ply").exit_code, 0);
}

TEST_F(Cli, DataErrorsExitTwoWithLocation) {
  io::write_file_bytes("broken.ply",
                       "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
                       "property float z\nend_header\n1 2 x\n");
  const auto r = run("eval --metric cd --gt broken.ply --pred gt2.ply");
  EXPECT_EQ(r.exit_code, cli::kExitData);
  EXPECT_NE(r.err.find("broken.ply:8:"), std::string::npos) << r.err;
  EXPECT_EQ(run("eval --metric cd --gt missing.ply --pred gt2.ply").exit_code, cli::kExitData);
  io::write_file_bytes("bad.json", "{\"fx\": ");
  const auto j = run("fuse --views view0.pgm --cameras bad.json --seed 1 -o f.ply");
  EXPECT_EQ(j.exit_code, cli::kExitData);
  EXPECT_NE(j.err.find("byte"), std::string::npos) << j.err;
  ASSERT_EQ(run("sample-mesh --n 5 --seed 1 -o five.ply").exit_code, 0);
  EXPECT_EQ(run("eval --metric emd --gt gt2.ply --pred five.ply").exit_code, cli::kExitData);
}

TEST_F(Cli, DivergenceExitsThree) {
  const auto r = run("train-demo --template grid --scenes 2 --epochs 3 --points 49 --hidden 8 --lr 1e200 --seed 1 "
                     "--out div.csv");
  EXPECT_EQ(r.exit_code, cli::kExitNumerical) << r.err;
}
