#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "handcloud/fusion.hpp"
#include "handcloud/io.hpp"
#include "handcloud/metrics.hpp"
#include "handcloud/segmentation.hpp"
#include "handcloud/templates.hpp"
#include "handcloud/training.hpp"

namespace handcloud::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

struct CommandResult {
  int exit_code = kExitOk;
  std::string out;  ///< stdout
  std::string err;  ///< stderr
};

using io::Json;

namespace detail {

inline std::string schema_id(std::string_view command) { return "handcloud." + std::string(command) + ".v1"; }

inline Json new_doc(std::string_view command) {
  Json j;
  j["schema"] = schema_id(command);
  return j;
}

/// Flattens a JSON document into "key: value" lines for humans.
inline void flatten(const Json& j, const std::string& prefix, std::string& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) {
      if (k == "schema") continue;
      flatten(v, prefix.empty() ? k : prefix + "." + k, out);
    }
  } else if (j.is_array() && !j.empty() && (j[0].is_object() || j[0].is_array())) {
    for (std::size_t i = 0; i < j.size(); ++i) flatten(j[i], prefix + "[" + std::to_string(i) + "]", out);
  } else {
    out += prefix + ": " + (j.is_string() ? j.get<std::string>() : j.dump()) + "\n";
  }
}

inline Json component_object(const std::array<double, kComponentCount>& v) {
  Json j;
  for (ComponentId c : kAllComponents) j[std::string(component_name(c))] = v[index_of(c)];
  return j;
}

inline Json budget_object(const ComponentBudget& b) {
  Json j;
  for (ComponentId c : kAllComponents) j[std::string(component_name(c))] = b[index_of(c)];
  return j;
}

inline ComponentBudget parse_budget(const std::string& text) {
  ComponentBudget b{};
  std::array<bool, kComponentCount> seen{};
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) fail_usage("budget entry '" + item + "' must look like name=count");
    const auto c = component_from_name(item.substr(0, eq));
    if (!c) fail_usage("unknown component '" + item.substr(0, eq) + "' in budget");
    const std::string num = item.substr(eq + 1);
    std::size_t value = 0;
    const auto res = std::from_chars(num.data(), num.data() + num.size(), value);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size())
      fail_usage("budget count '" + num + "' is not a non-negative integer");
    if (seen[index_of(*c)]) fail_usage("component '" + item.substr(0, eq) + "' given twice in budget");
    seen[index_of(*c)] = true;
    b[index_of(*c)] = value;
  }
  return b;
}

inline std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v))
      fail_usage("threshold '" + item + "' is not a number");
    out.push_back(v);
  }
  if (out.size() < 2) fail_usage("at least two thresholds are needed");
  for (std::size_t i = 1; i < out.size(); ++i)
    if (!(out[i] > out[i - 1])) fail_usage("thresholds must be strictly ascending");
  return out;
}

inline io::PlyFormat ply_format(const std::string& name) {
  return name == "binary" ? io::PlyFormat::BinaryLittleEndian : io::PlyFormat::Ascii;
}

inline std::string csv_header() {
  std::string h = "epoch,cd_global,emd_global";
  for (ComponentId c : kAllComponents) h += ",cd_local_" + std::string(component_name(c));
  for (ComponentId c : kAllComponents) h += ",emd_local_" + std::string(component_name(c));
  return h + ",total\n";
}

inline std::string csv_row(const EpochRecord& r) {
  using io::format_double;
  std::string row = std::to_string(r.epoch) + "," + format_double(r.mean.cd_global) + "," +
                    format_double(r.mean.emd_global);
  for (double v : r.mean.cd_local) row += "," + format_double(v);
  for (double v : r.mean.emd_local) row += "," + format_double(v);
  return row + "," + format_double(r.mean.total) + "\n";
}

// ---------------------------------------------------------------------------
// Option structs, one per subcommand
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string metric, gt, pred;
  bool labels = false, emd_approx = false;
};

struct FuseOptions {
  std::vector<std::string> views;
  std::string cameras, config, output, format = "ascii";
  std::uint64_t seed = 0;
};

struct SegmentOptions {
  std::string query, ref, output, format = "ascii";
  std::size_t k = 3;
};

struct TemplateOptions {
  std::string kind, budget, spec, output, format = "ascii";
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

struct SampleMeshOptions {
  std::string mesh, spec, output, format = "ascii";
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

struct TrainDemoOptions {
  std::string kind, out, weights;
  std::size_t scenes = 200, epochs = 200, points = 600, hidden = FoldingDecoder::kDefaultHidden, batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct PoseOptions {
  std::string pred, gt, thresholds = "20,25,30,35,40,45,50";
};

// ---------------------------------------------------------------------------
// Handlers: each returns its JSON document
// ---------------------------------------------------------------------------

inline Json run_eval(const EvalOptions& o) {
  const PointCloud gt = io::read_point_cloud(o.gt);
  const PointCloud pred = io::read_point_cloud(o.pred);
  require_non_empty(gt);
  require_non_empty(pred);
  const bool needs_emd = o.metric != "cd";
  if (needs_emd && !o.emd_approx && std::max(gt.size(), pred.size()) > kMaxExactEmdPoints)
    fail_usage("exact EMD is limited to " + std::to_string(kMaxExactEmdPoints) +
               " points; pass --emd-approx for the auction approximation");
  if (o.labels && (!gt.has_labels() || !pred.has_labels()))
    fail_data("--labels needs a 'component' property in both clouds");
  const EmdSolver solver = o.emd_approx ? EmdSolver::Auction : EmdSolver::Exact;

  Json doc = new_doc("eval");
  doc["metric"] = o.metric;
  doc["points"] = {{"gt", gt.size()}, {"pred", pred.size()}};
  if (o.metric == "cd") {
    doc["cd"] = chamfer_distance(gt, pred);
  } else if (o.metric == "emd") {
    if (o.emd_approx) {
      const ApproximateAssignment a = earth_movers_distance_approx(gt, pred);
      doc["emd"] = a.assignment.total_cost;
      doc["emd_lower_bound"] = a.lower_bound;
      doc["relative_gap"] = a.relative_gap;
    } else {
      doc["emd"] = earth_movers_distance(gt, pred).first;
    }
    doc["exact"] = !o.emd_approx;
  } else {
    const LossBreakdown b = combined_loss(gt, pred, o.labels ? LossMode::LocalGlobal : LossMode::GlobalOnly, solver);
    doc["cd_global"] = b.cd_global;
    doc["emd_global"] = b.emd_global;
    if (o.labels) {
      doc["cd_local"] = component_object(b.cd_local);
      doc["emd_local"] = component_object(b.emd_local);
    }
    doc["total"] = b.total;
    doc["exact"] = !o.emd_approx;
  }
  if (o.labels && o.metric != "combined") {
    std::array<double, kComponentCount> per{};
    for (ComponentId c : kAllComponents) {
      const auto gi = gt.indices_of(c);
      const auto pi = pred.indices_of(c);
      if (gi.empty() && pi.empty()) continue;
      if (gi.empty() || pi.empty()) fail_data("component " + std::string(component_name(c)) + " is missing from one cloud");
      const PointCloud g = gt.subset(gi), p = pred.subset(pi);
      per[index_of(c)] = o.metric == "cd" ? chamfer_distance(g, p) : emd_value(g, p, solver);
    }
    doc[o.metric + "_local"] = component_object(per);
  }
  return doc;
}

inline std::string eval_csv(const Json& doc) {
  std::string out = "term,value\n";
  for (const auto& [k, v] : doc.items()) {
    if (k == "schema" || k == "metric" || k == "points" || k == "exact") continue;
    if (v.is_object()) {
      for (const auto& [c, x] : v.items()) out += k + "_" + c + "," + io::format_double(x.get<double>()) + "\n";
    } else {
      out += k + "," + io::format_double(v.get<double>()) + "\n";
    }
  }
  return out;
}

inline Json run_fuse(const FuseOptions& o) {
  std::vector<CameraModel> rig;
  if (!o.cameras.empty()) rig = io::read_rig(o.cameras);
  std::vector<DepthMap> maps;
  for (std::size_t i = 0; i < o.views.size(); ++i) {
    const std::filesystem::path p = o.views[i];
    if (p.extension() == ".raw") {
      maps.push_back(io::read_raw_depth(p));
    } else {
      if (rig.empty()) fail_usage("--cameras is required for PGM views");
      if (rig.size() != o.views.size())
        fail_data(o.cameras + ": rig has " + std::to_string(rig.size()) + " cameras but " +
                  std::to_string(o.views.size()) + " views were given");
      maps.push_back(io::read_pgm(p, rig[i]));
    }
    try {
      maps.back().validate();
    } catch (const Error& e) {
      fail_data(p.string() + ": " + e.what());
    }
  }
  FusionConfig config;
  if (!o.config.empty()) config = io::fusion_config_from_json(io::read_json(o.config), o.config);
  config.seed = o.seed;
  const PointCloud cloud = fuse(maps, config);
  io::write_ply(o.output, cloud, ply_format(o.format));

  Json doc = new_doc("fuse");
  doc["views"] = Json::array();
  for (std::size_t i = 0; i < maps.size(); ++i)
    doc["views"].push_back({{"path", o.views[i]}, {"valid_pixels", maps[i].valid_count()}});
  doc["config"] = {{"near", config.near},
                   {"far", config.far},
                   {"outlier_k", config.outlier_k},
                   {"outlier_alpha", config.outlier_alpha},
                   {"voxel_size", config.voxel_size},
                   {"target_points", config.target_points}};
  doc["seed"] = o.seed;
  doc["points"] = cloud.size();
  doc["output"] = o.output;
  return doc;
}

inline Json run_segment(const SegmentOptions& o) {
  const PointCloud query = io::read_point_cloud(o.query);
  PointCloud ref_cloud = io::read_point_cloud(o.ref);
  const LabeledReference ref(std::move(ref_cloud));
  const PointCloud labeled = knn_transfer(query, ref, o.k);
  io::write_ply(o.output, labeled, ply_format(o.format));
  Json doc = new_doc("segment");
  doc["k"] = o.k;
  doc["points"] = labeled.size();
  doc["counts"] = budget_object(labeled.component_counts());
  doc["output"] = o.output;
  return doc;
}

inline SyntheticHandSpec load_spec(const std::string& path) {
  if (path.empty()) return {};
  return io::hand_spec_from_json(io::read_json(path), path);
}

inline Json run_template(const TemplateOptions& o, bool seed_given) {
  const auto kind = template_kind_from_name(o.kind);
  if (!kind) fail_usage("unknown template kind '" + o.kind + "'");
  if (*kind != TemplateKind::Grid2D && !seed_given) fail_usage("--seed is required for hand and local templates");
  const SyntheticHandSpec spec = load_spec(o.spec);

  std::size_t n = o.n;
  std::optional<ComponentBudget> budget;
  if (!o.budget.empty()) {
    if (*kind != TemplateKind::LocalHand3D) fail_usage("--budget applies to local templates only");
    budget = parse_budget(o.budget);
    std::size_t sum = 0;
    for (std::size_t v : *budget) sum += v;
    if (n != 0 && n != sum) fail_usage("--n disagrees with the budget total " + std::to_string(sum));
    n = sum;
  }
  if (n == 0) fail_usage("--n or --budget is required");

  Template t;
  switch (*kind) {
    case TemplateKind::Grid2D: t = near_square_lattice(n); break;
    case TemplateKind::Hand3D: t = hand_template(n, o.seed, spec); break;
    case TemplateKind::LocalHand3D: t = local_hand_template(budget.value_or(default_budget(n)), o.seed, spec); break;
  }
  io::write_ply(o.output, t.points, ply_format(o.format));
  Json doc = new_doc("template");
  doc["kind"] = std::string(template_kind_name(t.kind));
  doc["points"] = t.points.size();
  doc["counts"] = budget_object(t.points.component_counts());
  doc["seed"] = seed_given ? Json(o.seed) : Json(nullptr);
  doc["output"] = o.output;
  return doc;
}

inline Json run_sample_mesh(const SampleMeshOptions& o) {
  if (!o.mesh.empty() && !o.spec.empty()) fail_usage("--mesh and --hand-spec are mutually exclusive");
  const TriangleMesh mesh = o.mesh.empty() ? hand_surface_mesh(load_spec(o.spec)) : io::read_mesh(o.mesh);
  const SurfaceSamples s = sample_mesh_surface_with_faces(mesh, o.n, o.seed);
  io::write_ply(o.output, s.cloud, ply_format(o.format));
  double area = 0.0;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) area += mesh.face_area(f);
  Json doc = new_doc("sample-mesh");
  doc["source"] = o.mesh.empty() ? std::string("synthetic-hand") : o.mesh;
  doc["faces"] = mesh.faces.size();
  doc["area"] = area;
  doc["points"] = s.cloud.size();
  doc["labeled"] = s.cloud.has_labels();
  doc["seed"] = o.seed;
  doc["output"] = o.output;
  return doc;
}

inline Json run_train_demo(const TrainDemoOptions& o, std::ostream* progress) {
  const auto kind = template_kind_from_name(o.kind);
  if (!kind) fail_usage("unknown template kind '" + o.kind + "'");
  if (o.scenes == 0 || o.epochs == 0) fail_usage("--scenes and --epochs must be positive");
  const ComponentBudget budget = default_budget(o.points);

  SceneSetConfig sc;
  sc.count = o.scenes;
  sc.budget = budget;
  sc.seed = o.seed;
  const SceneSet set = make_scenes(sc);

  Template t;
  const std::uint64_t template_seed = derive_seed(o.seed, 0x7E);
  switch (*kind) {
    case TemplateKind::Grid2D: t = near_square_lattice(o.points); break;
    case TemplateKind::Hand3D: t = hand_template(o.points, template_seed); break;
    case TemplateKind::LocalHand3D: t = local_hand_template(budget, template_seed); break;
  }
  FoldingDecoder decoder(std::move(t), o.hidden);
  decoder.initialize(derive_seed(o.seed, 0xDEC));

  TrainerConfig tc;
  tc.epochs = o.epochs;
  tc.seed = o.seed;
  tc.learning_rate = o.lr;
  tc.batch_size = o.batch;
  tc.mode = *kind == TemplateKind::LocalHand3D ? LossMode::LocalGlobal : LossMode::GlobalOnly;

  std::string csv = csv_header();
  const TrainLog log = train(decoder, set.scenes, tc, [&](const EpochRecord& r) {
    csv += csv_row(r);
    if (progress) *progress << "epoch " << r.epoch << " total " << r.mean.total << std::endl;
  });
  io::write_file_bytes(o.out, csv);
  const std::string weights = o.weights.empty()
                                  ? std::filesystem::path(o.out).replace_extension(".hcfd").string()
                                  : o.weights;
  io::write_weights(weights, decoder);

  Json doc = new_doc("train-demo");
  doc["template"] = std::string(template_kind_name(*kind));
  doc["scenes"] = o.scenes;
  doc["epochs"] = o.epochs;
  doc["points"] = o.points;
  doc["hidden"] = o.hidden;
  doc["seed"] = o.seed;
  doc["final"] = {{"mean_cd", log.final_metrics.mean_cd},
                  {"mean_emd_per_point", log.final_metrics.mean_emd_per_point},
                  {"total", log.epochs.back().mean.total}};
  doc["log"] = o.out;
  doc["weights"] = weights;
  return doc;
}

inline Json run_pose_metrics(const PoseOptions& o) {
  const auto pred = io::read_poses(o.pred);
  const auto gt = io::read_poses(o.gt);
  if (pred.size() != gt.size())
    fail_data("pose files hold " + std::to_string(pred.size()) + " and " + std::to_string(gt.size()) + " samples");
  const std::vector<double> thresholds = parse_thresholds(o.thresholds);
  std::vector<double> errors;
  double mean = 0.0;
  for (std::size_t s = 0; s < pred.size(); ++s) {
    const auto e = joint_errors(pred[s], gt[s]);
    errors.insert(errors.end(), e.begin(), e.end());
    mean += mpjpe(pred[s], gt[s]);
  }
  mean /= static_cast<double>(pred.size());
  const PckCurve curve = pck_curve(errors, thresholds);
  Json doc = new_doc("pose-metrics");
  doc["samples"] = pred.size();
  doc["mpjpe"] = mean;
  doc["pck"] = {{"thresholds", curve.thresholds}, {"values", curve.values}};
  doc["auc"] = auc(curve);
  return doc;
}

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::Usage: return kExitUsage;
    case ErrorKind::Data: return kExitData;
    case ErrorKind::Numerical: return kExitNumerical;
  }
  return kExitData;
}

}  // namespace detail

/// Runs one command line (args exclude the program name). Progress lines of
/// long commands go to `progress` when given.
inline CommandResult run(const std::vector<std::string>& args, std::ostream* progress = nullptr) {
  using namespace detail;
  CLI::App app{"Point-cloud tools for 3D hand reconstruction", "handcloud"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  bool json = false;
  std::function<Json()> action;
  std::function<std::string(const Json&)> human = [](const Json& doc) {
    std::string s;
    flatten(doc, "", s);
    return s;
  };
  auto add_json = [&json](CLI::App* sub) { sub->add_flag("--json", json, "Print a JSON document on stdout"); };
  const std::vector<std::string> formats = {"ascii", "binary"};

  EvalOptions eval;
  auto* e = app.add_subcommand("eval", "Chamfer / EMD / combined loss between two clouds");
  e->add_option("--metric", eval.metric, "cd, emd or combined")->required()->check(CLI::IsMember({"cd", "emd", "combined"}));
  e->add_option("--gt", eval.gt, "Ground-truth cloud (PLY)")->required();
  e->add_option("--pred", eval.pred, "Predicted cloud (PLY)")->required();
  e->add_flag("--labels", eval.labels, "Add per-component terms using the 'component' property");
  e->add_flag("--emd-approx", eval.emd_approx, "Auction EMD with relative duality gap <= 1e-3");
  add_json(e);
  e->callback([&] {
    action = [&] { return run_eval(eval); };
    human = eval_csv;
  });

  FuseOptions fuse_o;
  auto* f = app.add_subcommand("fuse", "Fuse depth views into one balanced hand cloud");
  f->add_option("--views", fuse_o.views, "Depth maps (.pgm, or .raw with a .raw.json sidecar)")
      ->required()
      ->delimiter(',');
  f->add_option("--cameras", fuse_o.cameras, "Rig JSON with one camera per view");
  f->add_option("--config", fuse_o.config, "Fusion config JSON");
  f->add_option("--seed", fuse_o.seed, "Seed for the final subsample")->required();
  f->add_option("-o,--output", fuse_o.output, "Output PLY")->required();
  f->add_option("--format", fuse_o.format, "ascii or binary")->check(CLI::IsMember(formats));
  add_json(f);
  f->callback([&] { action = [&] { return run_fuse(fuse_o); }; });

  SegmentOptions seg;
  auto* s = app.add_subcommand("segment", "Label a cloud by k-nearest-neighbour vote against a reference");
  s->add_option("--query", seg.query, "Unlabeled cloud (PLY)")->required();
  s->add_option("--ref", seg.ref, "Labeled reference cloud (PLY)")->required();
  s->add_option("--k", seg.k, "Neighbour count")->check(CLI::PositiveNumber);
  s->add_option("-o,--output", seg.output, "Output PLY")->required();
  s->add_option("--format", seg.format, "ascii or binary")->check(CLI::IsMember(formats));
  add_json(s);
  s->callback([&] { action = [&] { return run_segment(seg); }; });

  TemplateOptions tpl;
  auto* t = app.add_subcommand("template", "Write a decoder template");
  t->add_option("--kind", tpl.kind, "grid, hand or local")->required()->check(CLI::IsMember({"grid", "hand", "local"}));
  t->add_option("--n", tpl.n, "Point count");
  t->add_option("--budget", tpl.budget, "Per-component counts, e.g. palm=200,thumb=80,...");
  auto* tseed = t->add_option("--seed", tpl.seed, "Sampling seed (hand and local)");
  t->add_option("--hand-spec", tpl.spec, "SyntheticHandSpec JSON");
  t->add_option("-o,--output", tpl.output, "Output PLY")->required();
  t->add_option("--format", tpl.format, "ascii or binary")->check(CLI::IsMember(formats));
  add_json(t);
  t->callback([&] { action = [&, tseed] { return run_template(tpl, tseed->count() > 0); }; });

  SampleMeshOptions sm;
  auto* m = app.add_subcommand("sample-mesh", "Area-weighted surface sampling of a triangle mesh");
  m->add_option("--mesh", sm.mesh, "Mesh PLY with faces (default: synthetic hand surface)");
  m->add_option("--hand-spec", sm.spec, "SyntheticHandSpec JSON for the synthetic hand");
  m->add_option("--n", sm.n, "Point count")->required()->check(CLI::PositiveNumber);
  m->add_option("--seed", sm.seed, "Sampling seed")->required();
  m->add_option("-o,--output", sm.output, "Output PLY")->required();
  m->add_option("--format", sm.format, "ascii or binary")->check(CLI::IsMember(formats));
  add_json(m);
  m->callback([&] { action = [&] { return run_sample_mesh(sm); }; });

  TrainDemoOptions td;
  auto* d = app.add_subcommand("train-demo", "Train a folding decoder on synthetic hands");
  d->add_option("--template", td.kind, "grid, hand or local")->required()->check(CLI::IsMember({"grid", "hand", "local"}));
  d->add_option("--scenes", td.scenes, "Number of synthetic poses");
  d->add_option("--epochs", td.epochs, "Training epochs");
  d->add_option("--points", td.points, "Points per cloud")->check(CLI::Range(6, 1 << 20));
  d->add_option("--hidden", td.hidden, "Hidden width of each folding stage")->check(CLI::PositiveNumber);
  d->add_option("--batch", td.batch, "Batch size")->check(CLI::PositiveNumber);
  d->add_option("--lr", td.lr, "ADAM learning rate")->check(CLI::PositiveNumber);
  d->add_option("--seed", td.seed, "Seed for scenes, template, initialization and shuffling")->required();
  d->add_option("--out", td.out, "Per-epoch CSV log")->required();
  d->add_option("--weights", td.weights, "Weight blob (default: log path with .hcfd extension)");
  add_json(d);
  d->callback([&] { action = [&] { return run_train_demo(td, progress); }; });

  PoseOptions po;
  auto* p = app.add_subcommand("pose-metrics", "MPJPE, PCK and AUC of 21-joint poses");
  p->add_option("--pred", po.pred, "Predicted poses JSON")->required();
  p->add_option("--gt", po.gt, "Ground-truth poses JSON")->required();
  p->add_option("--thresholds", po.thresholds, "Ascending PCK thresholds in mm, comma separated");
  add_json(p);
  p->callback([&] { action = [&] { return run_pose_metrics(po); }; });

  CommandResult result;
  std::vector<std::string> argv_storage;
  argv_storage.reserve(args.size() + 1);
  argv_storage.emplace_back("handcloud");
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    auto subs = app.get_subcommands();
    result.out = subs.empty() ? app.help() : subs.front()->help();
    return result;
  } catch (const CLI::CallForAllHelp&) {
    result.out = app.help("", CLI::AppFormatMode::All);
    return result;
  } catch (const CLI::ParseError& err) {
    auto subs = app.get_subcommands();
    result.exit_code = kExitUsage;
    result.err = "error: " + std::string(err.what()) + "\n\n" + (subs.empty() ? app.help() : subs.front()->help());
    return result;
  }

  try {
    const Json doc = action();
    result.out = json ? doc.dump(2) + "\n" : human(doc);
  } catch (const Error& err) {
    result.exit_code = exit_code_for(err.kind());
    result.err = "error: " + std::string(err.what()) + "\n";
  } catch (const std::exception& err) {
    result.exit_code = kExitData;
    result.err = "error: " + std::string(err.what()) + "\n";
  }
  return result;
}

}  // namespace handcloud::cli
