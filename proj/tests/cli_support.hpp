#pragma once
// Fixtures and helpers shared by the CLI and golden-file suites.

#include <filesystem>
#include <string>
#include <vector>

#include "handcloud/cli.hpp"
#include "handcloud/fusion.hpp"
#include "handcloud/io.hpp"
#include "handcloud/templates.hpp"

namespace clitest {

namespace fs = std::filesystem;
using namespace handcloud;

/// Switches the working directory for the lifetime of the object, so CLI
/// outputs that echo paths stay independent of where the suite runs.
class ScopedCwd {
 public:
  explicit ScopedCwd(const fs::path& dir) : previous_(fs::current_path()) { fs::current_path(dir); }
  ~ScopedCwd() { fs::current_path(previous_); }
  ScopedCwd(const ScopedCwd&) = delete;
  ScopedCwd& operator=(const ScopedCwd&) = delete;

 private:
  fs::path previous_;
};

inline cli::CommandResult run(const std::string& line) {
  std::vector<std::string> args;
  std::string word;
  for (char c : line) {
    if (c == ' ') {
      if (!word.empty()) args.push_back(word);
      word.clear();
    } else {
      word += c;
    }
  }
  if (!word.empty()) args.push_back(word);
  return cli::run(args);
}

inline HandPose reference_pose() {
  HandPose p{};
  for (std::size_t k = 0; k < kJointCount; ++k)
    p[k] = {10.0 * static_cast<double>(k), 5.0 - static_cast<double>(k % 4), 300.0 + 2.0 * static_cast<double>(k % 5)};
  return p;
}

/// Writes the input files used by the CLI suites into `dir`.
inline void write_fixtures(const fs::path& dir) {
  fs::create_directories(dir);
  io::write_ply(dir / "gt2.ply", PointCloud(std::vector<Point3>{{0, 0, 0}, {1, 0, 0}}));
  io::write_ply(dir / "pred2.ply", PointCloud(std::vector<Point3>{{0, 0, 0}, {0, 1, 0}}));

  const HandPose g = reference_pose();
  HandPose p = g;
  for (auto& j : p) j = j + Point3{3, 0, 4};
  io::write_file_bytes(dir / "g.json", io::poses_to_json({g}).dump() + "\n");
  io::write_file_bytes(dir / "p.json", io::poses_to_json({p}).dump() + "\n");

  const PointCloud dense = sample_mesh_surface(hand_surface_mesh(), 40000, 1);
  const auto rig = ring_rig(centroid(dense.points), 400.0, 4, 160, 120, 150.0);
  io::write_rig(dir / "rig.json", rig);
  for (std::size_t k = 0; k < rig.size(); ++k) {
    const DepthMap m = render_depth(dense.points, rig[k]);
    io::write_pgm(dir / ("view" + std::to_string(k) + ".pgm"), m);
    if (k == 0) io::write_raw_depth(dir / "view0.raw", m);
  }
  io::write_file_bytes(dir / "fuse.json", R"({"voxel_size": 3.0, "target_points": 300})" "\n");
}

struct GoldenCase {
  std::string name;
  std::string command;
  std::vector<std::string> files;  ///< outputs written by the command
};

/// Commands covered by the golden-file suite, in dependency order.
inline std::vector<GoldenCase> golden_cases() {
  return {
      {"template_grid", "template --kind grid --n 64 -o grid.ply --json", {"grid.ply"}},
      {"template_hand", "template --kind hand --n 150 --seed 3 -o hand.ply --format binary", {"hand.ply"}},
      {"template_local",
       "template --kind local --budget palm=40,thumb=12,index=12,middle=12,ring=12,pinky=12 --seed 4 -o local.ply --json",
       {"local.ply"}},
      {"sample_mesh", "sample-mesh --n 150 --seed 5 -o shell.ply --json", {"shell.ply"}},
      {"segment", "segment --query hand.ply --ref shell.ply --k 5 -o seg.ply --json", {"seg.ply"}},
      {"eval_cd", "eval --metric cd --gt hand.ply --pred shell.ply --labels", {}},
      {"eval_emd", "eval --metric emd --gt hand.ply --pred shell.ply --json", {}},
      {"eval_emd_approx", "eval --metric emd --gt hand.ply --pred shell.ply --emd-approx --json", {}},
      {"eval_combined", "eval --metric combined --gt gt2.ply --pred pred2.ply --json", {}},
      {"fuse", "fuse --views view0.pgm,view1.pgm,view2.pgm,view3.pgm --cameras rig.json --config fuse.json --seed 7 "
               "-o fused.ply --format binary --json",
       {"fused.ply"}},
      {"train_demo", "train-demo --template local --scenes 3 --epochs 3 --points 60 --hidden 8 --seed 1 --out log.csv --json",
       {"log.csv", "log.hcfd"}},
      {"pose_metrics", "pose-metrics --pred p.json --gt g.json --json", {}},
  };
}

/// Runs every golden case inside `dir` (fixtures are written first) and
/// returns name -> bytes for stdout and every output file.
inline std::vector<std::pair<std::string, std::string>> run_golden(const fs::path& dir) {
  write_fixtures(dir);
  const ScopedCwd cwd(dir);
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& c : golden_cases()) {
    const auto r = run(c.command);
    out.emplace_back(c.name + ".stdout", "exit " + std::to_string(r.exit_code) + "\n" + r.out);
    for (const auto& f : c.files) out.emplace_back(c.name + "." + f, fs::exists(f) ? io::read_file_bytes(f) : "");
  }
  return out;
}

}  // namespace clitest
