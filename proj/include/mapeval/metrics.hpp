#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "mapeval/alignment.hpp"
#include "mapeval/association.hpp"
#include "mapeval/geometry.hpp"
#include "mapeval/grid.hpp"
#include "mapeval/map_builder.hpp"

namespace mapeval {

struct TrajectoryErrorStats {
    double rmse = 0.0;
    std::vector<double> per_pose;
};

/// Absolute trajectory error: RMSE of position differences over paired
/// poses, sqrt(1/T * sum ||p_t - p*_t||^2).
inline TrajectoryErrorStats ate(const std::vector<std::pair<Pose, Pose>>& pairs) {
    if (pairs.empty()) {
        throw InvalidInputError("ATE needs at least one pose pair");
    }
    TrajectoryErrorStats stats;
    stats.per_pose.reserve(pairs.size());
    double sum = 0.0;
    for (const auto& [gt, est] : pairs) {
        const double e = (gt.position - est.position).norm();
        stats.per_pose.push_back(e);
        sum += e * e;
    }
    stats.rmse = std::sqrt(sum / static_cast<double>(pairs.size()));
    return stats;
}

/// Relative pose error: RMSE over consecutive pose pairs of the difference
/// between the two step vectors, each expressed in its own camera frame at
/// the step start,
///   sqrt(1/(T-1) * sum ||M(q_t)^-1 (p_{t+1}-p_t) - M(q*_t)^-1 (p*_{t+1}-p*_t)||^2).
/// Translation only; pairs must be in temporal order.
inline TrajectoryErrorStats rpe(const std::vector<std::pair<Pose, Pose>>& pairs) {
    if (pairs.size() < 2) {
        throw InvalidInputError("RPE needs at least two pose pairs");
    }
    TrajectoryErrorStats stats;
    stats.per_pose.reserve(pairs.size() - 1);
    double sum = 0.0;
    for (std::size_t t = 0; t + 1 < pairs.size(); ++t) {
        const auto& [gt0, est0] = pairs[t];
        const auto& [gt1, est1] = pairs[t + 1];
        const Vec3 delta_gt = gt0.rotation().transpose() * (gt1.position - gt0.position);
        const Vec3 delta_est = est0.rotation().transpose() * (est1.position - est0.position);
        const double e = (delta_gt - delta_est).norm();
        stats.per_pose.push_back(e);
        sum += e * e;
    }
    stats.rmse = std::sqrt(sum / static_cast<double>(pairs.size() - 1));
    return stats;
}

struct AmeResult {
    double rmse = 0.0;
    std::size_t matched = 0;
    std::size_t missed = 0;
};

/// Absolute mapping error: RMSE of distances between predicted points and
/// their associated ground-truth points. Unmatched points are excluded
/// from the RMSE and reported as a miss count.
inline AmeResult ame(const Association& assoc, const PointCloud& pred) {
    if (assoc.pairs.empty()) {
        throw UndefinedMetricError("mapping error undefined: association has zero matched pairs");
    }
    AmeResult result;
    result.matched = assoc.pairs.size();
    result.missed = assoc.unmatched.size();
    double sum = 0.0;
    for (const auto& [idx, gt_point] : assoc.pairs) {
        if (idx >= pred.size()) {
            throw InvalidInputError("association references a point outside the cloud");
        }
        sum += (pred.points[idx].xyz - gt_point.xyz).squaredNorm();
    }
    result.rmse = std::sqrt(sum / static_cast<double>(result.matched));
    return result;
}

/// Intersection over union of two 2D occupancy grids, compared on the
/// shared world lattice (both sets of cells are re-anchored to the global
/// lattice of the common cell size before the set comparison).
inline double iou2d(const OccupancyGrid2D& a, const OccupancyGrid2D& b) {
    const double rel = std::abs(a.cell_size() - b.cell_size());
    if (rel > 1e-12 * std::max(a.cell_size(), b.cell_size())) {
        throw InvalidInputError("IoU needs grids with equal cell size");
    }
    if (a.empty() && b.empty()) {
        throw UndefinedMetricError("IoU undefined: both grids are empty");
    }
    std::unordered_set<Cell2Index, detail::Cell2Hash> set_a;
    set_a.reserve(a.size());
    for (const Cell2Index& c : a.cells()) set_a.insert(a.world_cell(c));
    std::unordered_set<Cell2Index, detail::Cell2Hash> set_b;
    set_b.reserve(b.size());
    for (const Cell2Index& c : b.cells()) set_b.insert(b.world_cell(c));

    std::size_t inter = 0;
    for (const Cell2Index& c : set_a) inter += set_b.count(c);
    const std::size_t uni = set_a.size() + set_b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

// ------------------------------------------------------------------ reports

struct MetricReport {
    std::optional<double> ate;
    std::optional<double> rpe;
    std::optional<double> ame_nn;
    std::optional<double> ame_raycast;
    std::optional<double> iou;
    std::size_t pair_count = 0;
    std::size_t matched_count = 0;
    std::size_t miss_count = 0;
    std::string alignment_mode = "none";
    std::vector<double> per_pose_errors;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::string fmt_sig(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, v);
    return buf;
}

inline std::string opt_str(const std::optional<double>& v, int digits) {
    return v ? fmt_sig(*v, digits) : "null";
}

}  // namespace detail

/// Flat "key=value" serialization, one metric per line. Missing metrics
/// are written as explicit nulls; numeric values use `digits` significant
/// digits so output is stable for golden-file comparison.
inline void write_report_text(const MetricReport& r, std::ostream& out, int digits = 6) {
    out << "ate=" << detail::opt_str(r.ate, digits) << '\n';
    out << "rpe=" << detail::opt_str(r.rpe, digits) << '\n';
    out << "ame_nn=" << detail::opt_str(r.ame_nn, digits) << '\n';
    out << "ame_raycast=" << detail::opt_str(r.ame_raycast, digits) << '\n';
    out << "iou=" << detail::opt_str(r.iou, digits) << '\n';
    out << "pair_count=" << r.pair_count << '\n';
    out << "matched_count=" << r.matched_count << '\n';
    out << "miss_count=" << r.miss_count << '\n';
    out << "alignment_mode=" << r.alignment_mode << '\n';
    out << "per_pose_errors=";
    for (std::size_t i = 0; i < r.per_pose_errors.size(); ++i) {
        if (i) out << ',';
        out << detail::fmt_sig(r.per_pose_errors[i], digits);
    }
    out << '\n';
    for (const std::string& w : r.warnings) {
        out << "warning=" << w << '\n';
    }
}

enum class AlignMode { None, FirstPose, Umeyama, UmeyamaScale };

inline std::string align_mode_name(AlignMode m) {
    switch (m) {
        case AlignMode::None: return "none";
        case AlignMode::FirstPose: return "first-pose";
        case AlignMode::Umeyama: return "umeyama";
        case AlignMode::UmeyamaScale: return "umeyama+scale";
    }
    return "none";
}

/// Trajectory and/or map cloud, as loaded from a dataset sample or
/// produced by the synthetic harness.
struct EvalBundle {
    std::optional<Trajectory> trajectory;
    std::optional<PointCloud> map;
};

struct EvalOptions {
    double max_dt = 0.02;
    AlignMode align = AlignMode::Umeyama;
    double cell_size = 0.05;
    double max_range = 100.0;
    std::optional<double> remove_floor_z;
    bool swap_rotation = false;
    bool assoc_nn = true;
    bool assoc_raycast = true;
    bool fov_check = true;
};

/// Run the full evaluation pipeline: pair poses by timestamp, align the
/// estimate into the ground-truth frame, then compute trajectory metrics
/// and (when both bundles carry maps) mapping error under the requested
/// association methods plus the 2D-projection IoU. Trajectory-free bundles
/// are allowed with AlignMode::None and without ray-cast association.
/// Deterministic for fixed inputs.
inline MetricReport evaluate(const EvalBundle& gt, const EvalBundle& est,
                             const EvalOptions& opts = {}) {
    MetricReport report;
    report.alignment_mode = align_mode_name(opts.align);

    const bool have_trajectories = gt.trajectory && est.trajectory;
    if (!have_trajectories && opts.align != AlignMode::None) {
        throw InvalidInputError("alignment mode '" + align_mode_name(opts.align) +
                                "' requires both trajectories");
    }

    RigidTransform transform;
    std::vector<std::pair<Pose, Pose>> pairs;
    if (have_trajectories) {
        pairs = associate_timestamps(*gt.trajectory, *est.trajectory, opts.max_dt);
        report.pair_count = pairs.size();

        switch (opts.align) {
            case AlignMode::None:
                break;
            case AlignMode::FirstPose:
                transform = first_pose_alignment(*gt.trajectory, *est.trajectory);
                break;
            case AlignMode::Umeyama:
            case AlignMode::UmeyamaScale: {
                std::vector<Vec3> gt_pts, est_pts;
                gt_pts.reserve(pairs.size());
                est_pts.reserve(pairs.size());
                for (const auto& [g, e] : pairs) {
                    gt_pts.push_back(g.position);
                    est_pts.push_back(e.position);
                }
                transform = umeyama_align(gt_pts, est_pts, opts.align == AlignMode::UmeyamaScale);
                break;
            }
        }

        if (opts.align != AlignMode::None) {
            for (auto& [g, e] : pairs) {
                e = Pose(e.timestamp, transform.apply(e.position),
                         Quat(transform.rotation) * e.orientation);
            }
        }

        const auto ate_stats = ate(pairs);
        report.ate = ate_stats.rmse;
        report.per_pose_errors = ate_stats.per_pose;
        if (pairs.size() >= 2) {
            report.rpe = rpe(pairs).rmse;
        } else {
            report.warnings.push_back("rpe skipped: fewer than two pose pairs");
        }
    }

    if (!gt.map || !est.map) return report;

    PointCloud gt_cloud = *gt.map;
    PointCloud est_cloud = apply_alignment(*est.map, transform);

    if (opts.remove_floor_z) {
        gt_cloud = remove_floor(gt_cloud, *opts.remove_floor_z);
        est_cloud = remove_floor(est_cloud, *opts.remove_floor_z);
        if (est_cloud.empty() || gt_cloud.empty()) {
            throw UndefinedMetricError("mapping error undefined: no points above floor threshold");
        }
    }

    if (opts.assoc_nn) {
        const Association assoc = nn_associate(est_cloud, gt_cloud);
        const AmeResult result = ame(assoc, est_cloud);
        report.ame_nn = result.rmse;
        report.matched_count = result.matched;
        report.miss_count = result.missed;
    }

    const VoxelGrid gt_grid = voxelize(gt_cloud, opts.cell_size);

    if (opts.assoc_raycast) {
        if (!have_trajectories) {
            throw InvalidInputError("ray-cast association requires both trajectories");
        }
        RaycastAssociateOptions ropts;
        ropts.max_range = opts.max_range;
        ropts.max_dt = opts.max_dt;
        ropts.swap_rotation = opts.swap_rotation;
        const Trajectory est_traj_aligned = apply_alignment(*est.trajectory, transform);
        const auto tagged = infer_frame_ids(est_cloud, est_traj_aligned, opts.fov_check);
        if (!tagged.fallback.empty()) {
            report.warnings.push_back(std::to_string(tagged.fallback.size()) +
                                      " points behind every camera; tagged by nearest pose");
        }
        const Association assoc =
            raycast_associate(tagged.cloud, est_traj_aligned, *gt.trajectory, gt_grid, ropts);
        const AmeResult result = ame(assoc, tagged.cloud);
        report.ame_raycast = result.rmse;
        report.matched_count = result.matched;
        report.miss_count = result.missed;
    }

    const VoxelGrid est_grid = voxelize(est_cloud, opts.cell_size);
    report.iou = iou2d(project_to_2d(gt_grid), project_to_2d(est_grid));
    return report;
}

}  // namespace mapeval
