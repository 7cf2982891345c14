#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mapeval/mapeval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Exit codes: 0 success, 2 parse/format error, 3 temporal no-overlap,
// 4 undefined metric, 1 anything else.
constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitParse = 2;
constexpr int kExitNoOverlap = 3;
constexpr int kExitUndefined = 4;

json report_to_json(const mapeval::MetricReport& r) {
    json j;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) {
            j[key] = *v;
        } else {
            j[key] = nullptr;
        }
    };
    put("ate", r.ate);
    put("rpe", r.rpe);
    put("ame_nn", r.ame_nn);
    put("ame_raycast", r.ame_raycast);
    put("iou", r.iou);
    j["pair_count"] = r.pair_count;
    j["matched_count"] = r.matched_count;
    j["miss_count"] = r.miss_count;
    j["alignment_mode"] = r.alignment_mode;
    j["per_pose_errors"] = r.per_pose_errors;
    j["warnings"] = r.warnings;
    return j;
}

void print_report(const mapeval::MetricReport& r, bool as_json) {
    if (as_json) {
        std::cout << report_to_json(r).dump(2) << '\n';
    } else {
        mapeval::write_report_text(r, std::cout);
    }
}

mapeval::AlignMode parse_align(const std::string& name) {
    if (name == "none") return mapeval::AlignMode::None;
    if (name == "first-pose") return mapeval::AlignMode::FirstPose;
    if (name == "umeyama") return mapeval::AlignMode::Umeyama;
    if (name == "umeyama-scale") return mapeval::AlignMode::UmeyamaScale;
    throw mapeval::InvalidInputError("unknown alignment mode: " + name);
}

struct EvalTrajArgs {
    std::string gt_file, est_file;
    double max_dt = 0.02;
    std::string align = "umeyama";
    bool as_json = false;
};

int run_eval_traj(const EvalTrajArgs& args) {
    mapeval::EvalBundle gt, est;
    gt.trajectory = mapeval::load_trajectory(args.gt_file);
    est.trajectory = mapeval::load_trajectory(args.est_file);
    mapeval::EvalOptions opts;
    opts.max_dt = args.max_dt;
    opts.align = parse_align(args.align);
    print_report(mapeval::evaluate(gt, est, opts), args.as_json);
    return kExitOk;
}

struct EvalMapArgs {
    std::string gt_map, pred_map;
    std::string gt_traj, pred_traj;
    std::string assoc = "nn";
    std::string align = "auto";
    std::optional<double> remove_floor;
    double max_range = 100.0;
    double max_dt = 0.02;
    double cell = 0.05;
    bool swap_rotation = false;
    bool as_json = false;
};

int run_eval_map(const EvalMapArgs& args) {
    mapeval::EvalBundle gt, est;
    gt.map = mapeval::load_point_cloud(args.gt_map);
    est.map = mapeval::load_point_cloud(args.pred_map);
    if (!args.gt_traj.empty()) gt.trajectory = mapeval::load_trajectory(args.gt_traj);
    if (!args.pred_traj.empty()) est.trajectory = mapeval::load_trajectory(args.pred_traj);

    const bool have_traj = gt.trajectory && est.trajectory;
    if (args.assoc != "nn" && !have_traj) {
        throw mapeval::ParseError("--assoc " + args.assoc +
                                  " requires --gt-traj and --pred-traj");
    }

    mapeval::EvalOptions opts;
    opts.assoc_nn = args.assoc == "nn" || args.assoc == "both";
    opts.assoc_raycast = args.assoc == "raycast" || args.assoc == "both";
    opts.align = args.align == "auto"
                     ? (have_traj ? mapeval::AlignMode::Umeyama : mapeval::AlignMode::None)
                     : parse_align(args.align);
    opts.remove_floor_z = args.remove_floor;
    opts.max_range = args.max_range;
    opts.max_dt = args.max_dt;
    opts.cell_size = args.cell;
    opts.swap_rotation = args.swap_rotation;

    const mapeval::MetricReport report = mapeval::evaluate(gt, est, opts);
    print_report(report, args.as_json);
    if (!args.as_json && opts.assoc_raycast) {
        const std::size_t total = report.matched_count + report.miss_count;
        std::cout << "miss_rate="
                  << mapeval::detail::fmt_sig(
                         total ? static_cast<double>(report.miss_count) / total : 0.0, 6)
                  << '\n';
    }
    return kExitOk;
}

/// Locate the two per-run ground-truth maps inside a dataset sample
/// directory. Tries the common naming patterns, then falls back to the
/// first two point-cloud files that do not look like a merged map.
std::pair<std::string, std::string> find_sample_maps(const std::string& dir) {
    const std::vector<std::pair<std::string, std::string>> patterns = {
        {"map1.pcd", "map2.pcd"},       {"map_1.pcd", "map_2.pcd"},
        {"gt_map1.pcd", "gt_map2.pcd"}, {"map1.txt", "map2.txt"},
    };
    for (const auto& [a, b] : patterns) {
        if (fs::exists(fs::path(dir) / a) && fs::exists(fs::path(dir) / b)) {
            return {(fs::path(dir) / a).string(), (fs::path(dir) / b).string()};
        }
    }
    std::vector<std::string> clouds;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string name = entry.path().filename().string();
        if (name.find("merge") != std::string::npos) continue;
        if (entry.path().extension() == ".pcd") clouds.push_back(entry.path().string());
    }
    std::sort(clouds.begin(), clouds.end());
    if (clouds.size() < 2) {
        throw mapeval::ParseError("sample directory has no recognizable map pair: " + dir);
    }
    return {clouds[0], clouds[1]};
}

struct IouArgs {
    std::string map_a, map_b, sample_dir;
    double cell = 0.05;
    bool as_json = false;
};

int run_iou(const IouArgs& args) {
    std::string file_a = args.map_a, file_b = args.map_b;
    if (!args.sample_dir.empty()) {
        std::tie(file_a, file_b) = find_sample_maps(args.sample_dir);
    }
    const auto grid_a =
        mapeval::project_to_2d(mapeval::voxelize(mapeval::load_point_cloud(file_a), args.cell));
    const auto grid_b =
        mapeval::project_to_2d(mapeval::voxelize(mapeval::load_point_cloud(file_b), args.cell));
    const double value = mapeval::iou2d(grid_a, grid_b);
    if (args.as_json) {
        json j;
        j["iou"] = value;
        std::cout << j.dump(2) << '\n';
    } else {
        std::cout << "iou=" << mapeval::detail::fmt_sig(value, 6) << '\n';
    }
    return kExitOk;
}

struct BuildMapArgs {
    std::string depth_dir, traj_file, out_file;
    double cell = 0.05;
    double max_range = 1e9;
    std::string pgm_file;
};

int run_build_gt_map(const BuildMapArgs& args) {
    const mapeval::Trajectory traj = mapeval::load_trajectory(args.traj_file);
    std::vector<std::string> depth_files;
    for (const auto& entry : fs::directory_iterator(args.depth_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".pgm") {
            depth_files.push_back(entry.path().string());
        }
    }
    std::sort(depth_files.begin(), depth_files.end());
    if (depth_files.empty()) {
        throw mapeval::ParseError("no .pgm depth images in " + args.depth_dir);
    }
    if (depth_files.size() != traj.size()) {
        throw mapeval::ParseError("depth image count (" + std::to_string(depth_files.size()) +
                                  ") does not match trajectory pose count (" +
                                  std::to_string(traj.size()) + ")");
    }
    std::vector<mapeval::DepthFrame> frames;
    frames.reserve(depth_files.size());
    std::size_t valid_pixels = 0, total_pixels = 0;
    for (std::size_t i = 0; i < depth_files.size(); ++i) {
        const mapeval::DepthImage img = mapeval::load_depth_pgm(depth_files[i]);
        frames.push_back(
            mapeval::make_depth_frame(img, traj.poses[i], args.max_range, i));
        total_pixels += img.samples.size();
        for (const auto s : img.samples) valid_pixels += s != 0;
    }
    const mapeval::VoxelGrid grid = mapeval::build_gt_map(frames, args.cell);
    mapeval::save_point_cloud(grid.to_cloud(), args.out_file);
    if (!args.pgm_file.empty()) {
        std::ofstream out(args.pgm_file);
        if (!out) throw mapeval::Error("cannot write file: " + args.pgm_file);
        mapeval::write_grid_pgm(mapeval::project_to_2d(grid), out);
    }
    std::cout << "frames=" << frames.size() << '\n';
    std::cout << "cells=" << grid.size() << '\n';
    std::cout << "pixels_skipped=" << (total_pixels - valid_pixels) << '\n';
    return kExitOk;
}

struct SynthArgs {
    std::string spec_file, out_dir;
};

int run_synth(const SynthArgs& args) {
    std::ifstream in(args.spec_file);
    if (!in) throw mapeval::ParseError("cannot open spec file: " + args.spec_file);
    const mapeval::SynthSpec spec = mapeval::parse_synth_spec(in);
    const mapeval::SynthBundle bundle = mapeval::generate_bundle(spec);

    fs::create_directories(args.out_dir);
    const fs::path dir(args.out_dir);
    mapeval::save_trajectory(bundle.gt_trajectory, (dir / "gt_traj.txt").string());
    mapeval::save_trajectory(bundle.est_trajectory, (dir / "est_traj.txt").string());
    mapeval::save_point_cloud(bundle.gt_cloud, (dir / "gt_map.pcd").string());
    mapeval::save_point_cloud(bundle.est_cloud, (dir / "est_map.pcd").string());
    {
        std::ofstream out(dir / "gt_map_2d.pgm");
        if (!out) throw mapeval::Error("cannot write gt_map_2d.pgm");
        mapeval::write_grid_pgm(mapeval::project_to_2d(bundle.gt_map), out);
    }
    std::cout << "poses=" << bundle.gt_trajectory.size() << '\n';
    std::cout << "map_cells=" << bundle.gt_map.size() << '\n';
    std::cout << "map_points=" << bundle.est_cloud.size() << '\n';
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evaluation toolkit for visual SLAM trajectories and maps"};
    app.require_subcommand(1);

    EvalTrajArgs traj_args;
    CLI::App* eval_traj = app.add_subcommand(
        "eval-traj", "Trajectory accuracy (ATE/RPE) of an estimated trajectory");
    eval_traj->add_option("gt", traj_args.gt_file, "ground-truth trajectory file")->required();
    eval_traj->add_option("est", traj_args.est_file, "estimated trajectory file")->required();
    eval_traj->add_option("--max-dt", traj_args.max_dt, "timestamp pairing tolerance [s]");
    eval_traj->add_option("--align", traj_args.align, "umeyama|umeyama-scale|first-pose|none");
    eval_traj->add_flag("--json", traj_args.as_json, "print a JSON report");

    EvalMapArgs map_args;
    CLI::App* eval_map =
        app.add_subcommand("eval-map", "Mapping accuracy (AME) of a predicted map");
    eval_map->add_option("gt_map", map_args.gt_map, "ground-truth map (.pcd or xyz text)")
        ->required();
    eval_map->add_option("pred_map", map_args.pred_map, "predicted map (.pcd or xyz text)")
        ->required();
    eval_map->add_option("--gt-traj", map_args.gt_traj, "ground-truth trajectory file");
    eval_map->add_option("--pred-traj", map_args.pred_traj, "predicted trajectory file");
    eval_map->add_option("--assoc", map_args.assoc, "association method: nn|raycast|both");
    eval_map->add_option("--align", map_args.align,
                         "auto|umeyama|umeyama-scale|first-pose|none (auto: umeyama when "
                         "trajectories are given)");
    double floor_z = 0.0;
    CLI::Option* floor_opt =
        eval_map->add_option("--remove-floor", floor_z, "drop points with z <= value [m]");
    eval_map->add_option("--max-range", map_args.max_range, "ray-cast range limit [m]");
    eval_map->add_option("--max-dt", map_args.max_dt, "timestamp pairing tolerance [s]");
    eval_map->add_option("--cell", map_args.cell, "voxel cell size [m]");
    eval_map->add_flag("--swap-rotation", map_args.swap_rotation,
                       "compose the two rotations in the opposite order (diagnostic)");
    eval_map->add_flag("--json", map_args.as_json, "print a JSON report");

    IouArgs iou_args;
    CLI::App* iou_cmd =
        app.add_subcommand("iou", "Overlap (IoU) of two maps' 2D projections");
    iou_cmd->add_option("map_a", iou_args.map_a, "first map file");
    iou_cmd->add_option("map_b", iou_args.map_b, "second map file");
    iou_cmd->add_option("--sample", iou_args.sample_dir,
                        "dataset sample directory (auto-detects the two run maps)");
    iou_cmd->add_option("--cell", iou_args.cell, "voxel cell size [m]");
    iou_cmd->add_flag("--json", iou_args.as_json, "print a JSON report");

    BuildMapArgs build_args;
    CLI::App* build_cmd = app.add_subcommand(
        "build-gt-map", "Back-project 16-bit PGM depth frames into a voxel map");
    build_cmd->add_option("depth_dir", build_args.depth_dir, "directory of .pgm depth images")
        ->required();
    build_cmd->add_option("traj", build_args.traj_file, "trajectory file (one pose per frame)")
        ->required();
    build_cmd->add_option("out", build_args.out_file, "output map (.pcd or xyz text)")
        ->required();
    build_cmd->add_option("--cell", build_args.cell, "voxel cell size [m]");
    build_cmd->add_option("--max-range", build_args.max_range, "drop depths beyond this [m]");
    build_cmd->add_option("--pgm", build_args.pgm_file, "also write the 2D projection as PGM");

    SynthArgs synth_args;
    CLI::App* synth_cmd = app.add_subcommand(
        "synth", "Generate a synthetic scene, trajectory, and fake SLAM output");
    synth_cmd->add_option("spec", synth_args.spec_file, "key=value spec file")->required();
    synth_cmd->add_option("out_dir", synth_args.out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitParse;
    }

    try {
        if (app.got_subcommand(eval_traj)) return run_eval_traj(traj_args);
        if (app.got_subcommand(eval_map)) {
            if (floor_opt->count() > 0) map_args.remove_floor = floor_z;
            return run_eval_map(map_args);
        }
        if (app.got_subcommand(iou_cmd)) {
            if (iou_args.sample_dir.empty() && (iou_args.map_a.empty() || iou_args.map_b.empty())) {
                throw mapeval::ParseError("iou needs two map files or --sample DIR");
            }
            return run_iou(iou_args);
        }
        if (app.got_subcommand(build_cmd)) return run_build_gt_map(build_args);
        if (app.got_subcommand(synth_cmd)) return run_synth(synth_args);
    } catch (const mapeval::ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitParse;
    } catch (const mapeval::NoOverlapError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNoOverlap;
    } catch (const mapeval::UndefinedMetricError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUndefined;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitOther;
    }
    return kExitOther;
}
