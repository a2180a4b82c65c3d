#include "glift/io.hpp"
#include "glift/labeling.hpp"
#include "glift/pipeline.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace glift;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir, const char* ext) {
  if (!fs::is_directory(dir))
    throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ext)
      files.push_back(e.path());
  std::sort(files.begin(), files.end());
  return files;
}

MapProvider map_provider_for(std::vector<fs::path> files) {
  return [files = std::move(files)](uint32_t view) {
    return load_feature_map(files.at(view));
  };
}

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    std::ofstream out(out_path);
    if (!out) throw ConfigError("cannot open for writing: " + out_path);
    out << j.dump(2) << '\n';
  }
}

// Pipeline options shared by lift/disp/ablate; a JSON config file provides
// the base values and explicit flags override it.
struct PipelineCli {
  std::string config_path;
  std::string aggregator = "cosine-median";
  bool no_gating = false;
  PipelineConfig cfg;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file");
    cmd->add_option("--tau-view", cfg.gate.tau_view,
                    "gate mass-coverage fraction");
    cmd->add_option("--tau-abs", cfg.gate.tau_abs, "gate absolute floor");
    cmd->add_option("--gate-q", cfg.gate.q, "gate quantile parameter");
    cmd->add_option("--aggregator", aggregator,
                    "cosine-median | weighted-mean | l1-median");
    cmd->add_flag("--no-gating", no_gating, "disable the visibility gate");
    cmd->add_option("--weiszfeld-iters", cfg.weiszfeld_iters,
                    "l1-median iteration cap");
    cmd->add_option("--weiszfeld-eps", cfg.weiszfeld_eps,
                    "l1-median convergence threshold");
  }

  PipelineConfig resolve(const CLI::App* cmd) {
    PipelineConfig out;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot open config: " + config_path);
      json j;
      try {
        in >> j;
        if (j.contains("tau_view")) out.gate.tau_view = j["tau_view"];
        if (j.contains("tau_abs")) out.gate.tau_abs = j["tau_abs"];
        if (j.contains("gate_q")) out.gate.q = j["gate_q"];
        if (j.contains("aggregator"))
          out.aggregator = aggregator_from_string(j["aggregator"]);
        if (j.contains("gating")) out.gating_enabled = j["gating"];
        if (j.contains("weiszfeld_iters"))
          out.weiszfeld_iters = j["weiszfeld_iters"];
        if (j.contains("weiszfeld_eps"))
          out.weiszfeld_eps = j["weiszfeld_eps"];
      } catch (const json::exception& e) {
        throw ConfigError(config_path + ": " + e.what());
      }
    }
    // flags given on the command line take precedence
    if (cmd->count("--tau-view")) out.gate.tau_view = cfg.gate.tau_view;
    if (cmd->count("--tau-abs")) out.gate.tau_abs = cfg.gate.tau_abs;
    if (cmd->count("--gate-q")) out.gate.q = cfg.gate.q;
    if (cmd->count("--aggregator"))
      out.aggregator = aggregator_from_string(aggregator);
    if (cmd->count("--no-gating")) out.gating_enabled = !no_gating;
    if (cmd->count("--weiszfeld-iters"))
      out.weiszfeld_iters = cfg.weiszfeld_iters;
    if (cmd->count("--weiszfeld-eps")) out.weiszfeld_eps = cfg.weiszfeld_eps;

    const std::string warning = out.gate.validate();
    if (!warning.empty()) std::cerr << "warning: " << warning << '\n';
    return out;
  }
};

json metrics_json(const SegMetrics& m) {
  json per_class;
  for (const auto& [cls, iou] : m.per_class_iou)
    per_class[std::to_string(cls)] = {{"iou", iou},
                                      {"acc", m.per_class_acc.at(cls)}};
  return {{"miou", m.miou}, {"macc", m.macc}, {"per_class", per_class}};
}

int run(int argc, char** argv) {
  CLI::App app{"training-free visibility-aware language lifting for 3D "
               "gaussian scenes"};
  app.require_subcommand(1);

  // ---- lift -------------------------------------------------------------
  auto* lift_cmd = app.add_subcommand("lift", "aggregate 2D feature maps "
                                              "into a per-gaussian field");
  std::string scene_path, cameras_path, maps_dir, out_path;
  PipelineCli lift_opts;
  lift_cmd->add_option("--scene", scene_path, "scene .vgsc")->required();
  lift_cmd->add_option("--cameras", cameras_path, "cameras .json")->required();
  lift_cmd->add_option("--maps", maps_dir, "directory of per-view .vfmp")
      ->required();
  lift_cmd->add_option("--out", out_path, "output field .vgft")->required();
  lift_opts.attach(lift_cmd);

  // ---- label ------------------------------------------------------------
  auto* label_cmd =
      app.add_subcommand("label", "propagate point labels to gaussians");
  std::string points_path;
  LabelConfig label_cfg;
  label_cmd->add_option("--scene", scene_path)->required();
  label_cmd->add_option("--points", points_path, "labeled cloud .vlpc")
      ->required();
  label_cmd->add_option("--out", out_path, "output labels .vglb")->required();
  label_cmd->add_option("--tau-radius", label_cfg.tau_radius);
  label_cmd->add_option("--k-fallback", label_cfg.k_fallback);
  label_cmd->add_option("--chunk-size", label_cfg.chunk_size);

  // ---- query ------------------------------------------------------------
  auto* query_cmd =
      app.add_subcommand("query", "select gaussians matching a text query");
  std::string field_path, queries_path, query_name;
  double threshold_3d = 0.6;
  query_cmd->add_option("--field", field_path)->required();
  query_cmd->add_option("--queries", queries_path)->required();
  query_cmd->add_option("--name", query_name, "query name (default: all)");
  query_cmd->add_option("--threshold", threshold_3d, "relevancy threshold");
  query_cmd->add_option("--out", out_path);

  // ---- eval -------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "segmentation metrics");
  std::string mode = "semseg", gt_labels_path, gt_masks_dir, csv_path;
  double eval_threshold = -1.0;
  double mask_threshold = 0.5;
  eval_cmd->add_option("--mode", mode, "semseg | 3d | 2d");
  eval_cmd->add_option("--field", field_path)->required();
  eval_cmd->add_option("--queries", queries_path)->required();
  eval_cmd->add_option("--threshold", eval_threshold,
                       "relevancy threshold (default 0.6 in 3d, 0.5 in 2d)");
  eval_cmd->add_option("--mask-threshold", mask_threshold,
                       "accumulated-weight binarization for 3d masks");
  eval_cmd->add_option("--scene", scene_path);
  eval_cmd->add_option("--cameras", cameras_path);
  eval_cmd->add_option("--gt-labels", gt_labels_path, "per-gaussian .vglb");
  eval_cmd->add_option("--gt-masks", gt_masks_dir,
                       "directory: <query>/<view>.vmsk");
  eval_cmd->add_option("--out", out_path);
  eval_cmd->add_option("--csv", csv_path);

  // ---- corrupt ----------------------------------------------------------
  auto* corrupt_cmd =
      app.add_subcommand("corrupt", "morphological mask corruption");
  std::string masks_dir, corrupt_out;
  int radius = 10;
  uint64_t seed = 42;
  uint32_t tau_min = 64;
  corrupt_cmd->add_option("--masks", masks_dir)->required();
  corrupt_cmd->add_option("--out", corrupt_out)->required();
  corrupt_cmd->add_option("--radius", radius)->required();
  corrupt_cmd->add_option("--seed", seed);
  corrupt_cmd->add_option("--tau-min", tau_min);

  // ---- synth ------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "synthetic benchmarks");
  synth_cmd->require_subcommand(1);
  auto* synth_occ = synth_cmd->add_subcommand("occlusion", "two-wall scene");
  std::string spec_path, out_dir;
  synth_occ->add_option("--spec", spec_path, "spec .json (optional)");
  synth_occ->add_option("--out-dir", out_dir)->required();
  auto* synth_stream = synth_cmd->add_subcommand("stream", "feature stream");
  synth_stream->add_option("--spec", spec_path, "spec .json (optional)");
  synth_stream->add_option("--out", out_path)->required();

  // ---- disp -------------------------------------------------------------
  auto* disp_cmd =
      app.add_subcommand("disp", "multi-view dispersion of a field");
  PipelineCli disp_opts;
  disp_cmd->add_option("--scene", scene_path)->required();
  disp_cmd->add_option("--cameras", cameras_path)->required();
  disp_cmd->add_option("--maps", maps_dir)->required();
  disp_cmd->add_option("--field", field_path)->required();
  disp_cmd->add_option("--out", out_path);
  disp_opts.attach(disp_cmd);

  // ---- ablate -----------------------------------------------------------
  auto* ablate_cmd =
      app.add_subcommand("ablate", "gating/aggregator grid on the "
                                   "occlusion benchmark");
  PipelineCli ablate_opts;
  ablate_cmd->add_option("--spec", spec_path, "occlusion spec .json");
  ablate_cmd->add_option("--out", out_path);
  ablate_cmd->add_option("--csv", csv_path);
  ablate_opts.attach(ablate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // bad usage is a config error
  }

  if (*lift_cmd) {
    const PipelineConfig cfg = lift_opts.resolve(lift_cmd);
    const GaussianScene scene = load_scene(scene_path);
    const auto cameras = load_cameras(cameras_path);
    const auto maps = sorted_files(maps_dir, ".vfmp");
    if (maps.size() != cameras.size())
      throw ConfigError("need one feature map per camera");
    LiftStats stats;
    const GaussianFeatureField field =
        lift(scene, cameras, map_provider_for(maps), cfg, &stats);
    save_field(field, out_path);
    std::cerr << "lift: " << stats.records_kept << "/" << stats.records_total
              << " records kept, " << stats.observations_consumed
              << " observations consumed\n";
  } else if (*label_cmd) {
    const GaussianScene scene = load_scene(scene_path);
    const LabeledPointCloud cloud = load_point_cloud(points_path);
    label_cfg.validate();
    save_labels(assign_labels(scene, cloud, label_cfg), out_path);
  } else if (*query_cmd) {
    const GaussianFeatureField field = load_field(field_path);
    const QuerySet qs = load_queries(queries_path);
    json result = json::array();
    for (const auto& q : qs.queries) {
      if (!query_name.empty() && q.name != query_name) continue;
      const auto selected =
          select_3d(field, q.vec, qs.negatives, threshold_3d);
      result.push_back({{"name", q.name},
                        {"threshold", threshold_3d},
                        {"count", selected.size()},
                        {"indices", selected}});
    }
    if (!query_name.empty() && result.empty())
      throw ConfigError("no query named '" + query_name + "'");
    emit(result, out_path);
  } else if (*eval_cmd) {
    const GaussianFeatureField field = load_field(field_path);
    const QuerySet qs = load_queries(queries_path);
    json out;
    if (mode == "semseg") {
      if (gt_labels_path.empty())
        throw ConfigError("semseg mode needs --gt-labels");
      const GaussianLabels gt = load_labels(gt_labels_path);
      if (gt.size() != field.count())
        throw ValidationError("gt labels and field length differ");
      const auto pred = semantic_segment(field, qs.queries);
      // gaussians the field never observed stay out of the metric
      std::vector<uint32_t> pred_kept, gt_kept;
      for (size_t i = 0; i < field.count(); ++i) {
        if (field.weights[i] == 0.0f || gt.labels[i] == kUnlabeled) continue;
        pred_kept.push_back(pred[i]);
        gt_kept.push_back(gt.labels[i]);
      }
      const SegMetrics m = miou_macc(
          pred_kept, gt_kept, static_cast<uint32_t>(qs.queries.size()));
      out = metrics_json(m);
    } else if (mode == "3d" || mode == "2d") {
      if (scene_path.empty() || cameras_path.empty() || gt_masks_dir.empty())
        throw ConfigError(mode + " mode needs --scene, --cameras, --gt-masks");
      const double threshold =
          eval_threshold > 0 ? eval_threshold : (mode == "3d" ? 0.6 : 0.5);
      const GaussianScene scene = load_scene(scene_path);
      const auto cameras = load_cameras(cameras_path);

      // 2d mode renders one feature image per view, shared across queries
      std::vector<FeatureMap> rendered;
      if (mode == "2d")
        for (const Camera& cam : cameras)
          rendered.push_back(render_feature_image(scene, cam, field));

      json per_query;
      double miou = 0, macc = 0;
      size_t scored_queries = 0;
      for (const auto& q : qs.queries) {
        const fs::path qdir = fs::path(gt_masks_dir) / q.name;
        if (!fs::is_directory(qdir)) continue;
        const auto mask_files = sorted_files(qdir, ".vmsk");
        std::vector<uint32_t> selected;
        if (mode == "3d")
          selected = select_3d(field, q.vec, qs.negatives, threshold);
        double q_iou = 0, q_acc = 0;
        size_t views = 0;
        for (const auto& mask_file : mask_files) {
          uint32_t view = 0;
          try {
            view = static_cast<uint32_t>(std::stoul(mask_file.stem().string()));
          } catch (const std::exception&) {
            throw ConfigError("mask filename is not a view index: " +
                              mask_file.string());
          }
          if (view >= cameras.size())
            throw ConfigError("mask view index out of range: " +
                              mask_file.string());
          const BinaryMask gt_mask = load_mask(mask_file);
          BinaryMask pred;
          if (mode == "3d") {
            pred = render_selection(scene, cameras[view], selected,
                                    mask_threshold);
          } else {
            const FeatureMap& img = rendered[view];
            pred.height = img.height;
            pred.width = img.width;
            pred.bits.assign(
                static_cast<size_t>(img.height) * img.width, 0);
            GaussianFeatureField pixel_field;
            pixel_field.dim = img.dim;
            pixel_field.features = img.data;
            pixel_field.weights.assign(
                static_cast<size_t>(img.height) * img.width, 0.0f);
            for (size_t px = 0; px < pixel_field.weights.size(); ++px)
              if (!pixel_field.feature_vec(px).isZero())
                pixel_field.weights[px] = 1.0f;
            const auto scores = relevancy(pixel_field, q.vec, qs.negatives);
            for (size_t px = 0; px < scores.size(); ++px)
              pred.bits[px] = scores[px] >= threshold ? 1 : 0;
          }
          const auto [iou, acc] = mask_iou_acc(pred, gt_mask);
          q_iou += iou;
          q_acc += acc;
          ++views;
        }
        if (views == 0) continue;
        per_query[q.name] = {{"iou", q_iou / views}, {"acc", q_acc / views}};
        miou += q_iou / views;
        macc += q_acc / views;
        ++scored_queries;
      }
      if (scored_queries == 0)
        throw ConfigError("no ground-truth masks matched any query");
      out = {{"miou", miou / scored_queries},
             {"macc", macc / scored_queries},
             {"per_query", per_query}};
    } else {
      throw ConfigError("unknown eval mode '" + mode + "'");
    }
    emit(out, out_path);
    if (!csv_path.empty()) {
      std::ofstream csv(csv_path);
      csv << "miou,macc\n"
          << out["miou"].get<double>() << ',' << out["macc"].get<double>()
          << '\n';
    }
  } else if (*corrupt_cmd) {
    const auto files = sorted_files(masks_dir, ".vmsk");
    if (files.empty()) throw ConfigError("no .vmsk masks in " + masks_dir);
    fs::create_directories(corrupt_out);
    for (size_t i = 0; i < files.size(); ++i) {
      const BinaryMask mask = load_mask(files[i]);
      save_mask(corrupt_mask(mask, radius, seed, i, tau_min),
                fs::path(corrupt_out) / files[i].filename());
    }
  } else if (*synth_occ) {
    const OcclusionSceneSpec spec = spec_path.empty()
                                        ? OcclusionSceneSpec{}
                                        : load_occlusion_spec(spec_path);
    save_occlusion_scene(make_occlusion_scene(spec), out_dir);
  } else if (*synth_stream) {
    const StreamSpec spec =
        spec_path.empty() ? StreamSpec{} : load_stream_spec(spec_path);
    const FeatureStream stream = make_feature_stream(spec);
    save_stream(stream.observations, spec.dim, out_path);
  } else if (*disp_cmd) {
    const PipelineConfig cfg = disp_opts.resolve(disp_cmd);
    const GaussianScene scene = load_scene(scene_path);
    const auto cameras = load_cameras(cameras_path);
    const auto maps = sorted_files(maps_dir, ".vfmp");
    if (maps.size() != cameras.size())
      throw ConfigError("need one feature map per camera");
    const GaussianFeatureField field = load_field(field_path);
    const DispersionResult res = dispersion_of_field(
        scene, cameras, map_provider_for(maps), field, cfg);
    emit({{"scene_dispersion", res.scene}, {"scored", res.scored}}, out_path);
  } else if (*ablate_cmd) {
    const PipelineConfig base = ablate_opts.resolve(ablate_cmd);
    const OcclusionSceneSpec spec = spec_path.empty()
                                        ? OcclusionSceneSpec{}
                                        : load_occlusion_spec(spec_path);
    const OcclusionScene occ = make_occlusion_scene(spec);
    std::vector<AblationCell> grid;
    for (const bool gating : {true, false})
      for (const Aggregator agg :
           {Aggregator::CosineMedian, Aggregator::WeightedMean,
            Aggregator::L1Median})
        grid.push_back({gating, agg});
    const auto rows = ablation_run(occ, grid, base);
    json out = json::array();
    for (const auto& row : rows) {
      out.push_back({{"gating", row.cell.gating},
                     {"aggregator", to_string(row.cell.aggregator)},
                     {"miou", row.miou},
                     {"macc", row.macc},
                     {"dispersion", row.dispersion},
                     {"mean_cos_front", row.mean_cos_front},
                     {"mean_cos_back", row.mean_cos_back},
                     {"min_cos_back", row.min_cos_back}});
    }
    emit(out, out_path);
    if (!csv_path.empty()) {
      std::ofstream csv(csv_path);
      csv << "gating,aggregator,miou,macc,dispersion,mean_cos_front,"
             "mean_cos_back\n";
      for (const auto& row : rows)
        csv << (row.cell.gating ? "on" : "off") << ','
            << to_string(row.cell.aggregator) << ',' << row.miou << ','
            << row.macc << ',' << row.dispersion << ','
            << row.mean_cos_front << ',' << row.mean_cos_back << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
