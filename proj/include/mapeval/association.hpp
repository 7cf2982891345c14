#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mapeval/alignment.hpp"
#include "mapeval/geometry.hpp"
#include "mapeval/grid.hpp"

namespace mapeval {

/// First occupied cell along a ray. alpha is the distance from the ray
/// origin to the point where the ray enters the cell (0 when the origin's
/// own cell is occupied); hit_point is the cell center.
struct RayHit {
    CellIndex cell;
    double alpha = 0.0;
    Vec3 hit_point = Vec3::Zero();
};

namespace detail {

/// Static median-split k-d tree over 3D points. Built once, queried for
/// exact nearest neighbors; equal distances resolve to the lowest index.
class KdTree3 {
public:
    explicit KdTree3(const std::vector<Vec3>& pts) : pts_(pts), order_(pts.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        nodes_.reserve(pts.size());
        root_ = build(0, pts_.size(), 0);
    }

    std::pair<std::size_t, double> nearest(const Vec3& q) const {
        std::size_t best = std::numeric_limits<std::size_t>::max();
        double best_d2 = std::numeric_limits<double>::infinity();
        search(root_, q, best, best_d2);
        return {best, best_d2};
    }

private:
    struct Node {
        std::size_t point;
        int axis;
        std::int64_t left = -1, right = -1;
    };

    std::int64_t build(std::size_t lo, std::size_t hi, int depth) {
        if (lo >= hi) return -1;
        const int axis = depth % 3;
        const std::size_t mid = (lo + hi) / 2;
        std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                         [&](std::size_t a, std::size_t b) {
                             if (pts_[a][axis] != pts_[b][axis]) return pts_[a][axis] < pts_[b][axis];
                             return a < b;
                         });
        const std::size_t point = order_[mid];
        const std::int64_t id = static_cast<std::int64_t>(nodes_.size());
        nodes_.push_back({point, axis, -1, -1});
        const std::int64_t left = build(lo, mid, depth + 1);
        const std::int64_t right = build(mid + 1, hi, depth + 1);
        nodes_[id].left = left;
        nodes_[id].right = right;
        return id;
    }

    void search(std::int64_t id, const Vec3& q, std::size_t& best, double& best_d2) const {
        if (id < 0) return;
        const Node& node = nodes_[static_cast<std::size_t>(id)];
        const double d2 = (pts_[node.point] - q).squaredNorm();
        if (d2 < best_d2 || (d2 == best_d2 && node.point < best)) {
            best = node.point;
            best_d2 = d2;
        }
        const double delta = q[node.axis] - pts_[node.point][node.axis];
        const std::int64_t near = delta < 0.0 ? node.left : node.right;
        const std::int64_t far = delta < 0.0 ? node.right : node.left;
        search(near, q, best, best_d2);
        if (delta * delta <= best_d2) {
            search(far, q, best, best_d2);
        }
    }

    const std::vector<Vec3>& pts_;
    std::vector<std::size_t> order_;
    std::vector<Node> nodes_;
    std::int64_t root_ = -1;
};

inline std::size_t nearest_brute(const std::vector<Vec3>& pts, const Vec3& q) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const double d2 = (pts[i] - q).squaredNorm();
        if (d2 < best_d2) {
            best = i;
            best_d2 = d2;
        }
    }
    return best;
}

}  // namespace detail

/// Associate every predicted point with its Euclidean-nearest ground-truth
/// point. Ties resolve to the lowest ground-truth index; nothing goes
/// unmatched. Small reference clouds are scanned directly, larger ones
/// through a k-d tree.
inline Association nn_associate(const PointCloud& pred, const PointCloud& gt) {
    if (pred.empty() || gt.empty()) {
        throw InvalidInputError("nearest-neighbor association needs non-empty clouds");
    }
    std::vector<Vec3> gt_pts(gt.size());
    for (std::size_t i = 0; i < gt.size(); ++i) gt_pts[i] = gt.points[i].xyz;

    Association assoc;
    assoc.pairs.reserve(pred.size());
    if (gt.size() < 256) {
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const std::size_t j = detail::nearest_brute(gt_pts, pred.points[i].xyz);
            assoc.pairs.emplace_back(i, gt.points[j]);
        }
    } else {
        detail::KdTree3 tree(gt_pts);
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const auto [j, d2] = tree.nearest(pred.points[i].xyz);
            assoc.pairs.emplace_back(i, gt.points[j]);
        }
    }
    return assoc;
}

/// Walk a ray through the voxel lattice (Amanatides-Woo style traversal,
/// one step per crossed cell) and return the first occupied cell within
/// max_range, if any.
inline std::optional<RayHit> raycast(const VoxelGrid& grid, const Vec3& origin, const Vec3& dir,
                                     double max_range) {
    if (!finite(origin) || !finite(dir)) {
        throw InvalidInputError("raycast origin/direction must be finite");
    }
    const double norm = dir.norm();
    if (norm < 1e-12) {
        throw InvalidInputError("raycast direction must be non-zero");
    }
    if (!(max_range > 0.0)) {
        throw InvalidInputError("raycast max_range must be positive");
    }
    const Vec3 d = dir / norm;
    const double s = grid.cell_size();

    CellIndex cell = grid.cell_of(origin);
    if (grid.contains(cell)) {
        return RayHit{cell, 0.0, grid.center_of(cell)};
    }

    std::int64_t* idx[3] = {&cell.x, &cell.y, &cell.z};
    std::int64_t step[3];
    double t_max[3], t_delta[3];
    for (int a = 0; a < 3; ++a) {
        if (std::abs(d[a]) < 1e-15) {
            step[a] = 0;
            t_max[a] = std::numeric_limits<double>::infinity();
            t_delta[a] = std::numeric_limits<double>::infinity();
        } else if (d[a] > 0.0) {
            step[a] = 1;
            const double boundary = grid.origin()[a] + (static_cast<double>(*idx[a]) + 1.0) * s;
            t_max[a] = (boundary - origin[a]) / d[a];
            t_delta[a] = s / d[a];
        } else {
            step[a] = -1;
            const double boundary = grid.origin()[a] + static_cast<double>(*idx[a]) * s;
            t_max[a] = (boundary - origin[a]) / d[a];
            t_delta[a] = -s / d[a];
        }
    }

    while (true) {
        int axis = 0;
        if (t_max[1] < t_max[axis]) axis = 1;
        if (t_max[2] < t_max[axis]) axis = 2;
        const double t = t_max[axis];
        if (!(t <= max_range)) return std::nullopt;
        *idx[axis] += step[axis];
        t_max[axis] += t_delta[axis];
        if (grid.contains(cell)) {
            return RayHit{cell, t, grid.center_of(cell)};
        }
    }
}

struct RaycastAssociateOptions {
    double max_range = 100.0;
    double max_dt = 0.02;      // timestamp pairing tolerance between trajectories
    bool swap_rotation = false;  // diagnostic: compose the rotations in the other order
};

/// Trajectory-aware association. Each predicted point, observed from
/// predicted pose (p*, q*) at its frame and paired by timestamp with
/// ground-truth pose (p, q), defines the direction
///     r = M(q*)^-1 * M(q) * (point - p*)        (default)
///     r = M(q) * M(q*)^-1 * (point - p*)        (swap_rotation)
/// The point is matched with the center of the first occupied ground-truth
/// cell along the ray from p in direction r; rays that miss within
/// max_range leave the point unmatched.
inline Association raycast_associate(const PointCloud& pred, const Trajectory& pred_traj,
                                     const Trajectory& gt_traj, const VoxelGrid& gt_map,
                                     const RaycastAssociateOptions& opts = {}) {
    if (gt_map.empty()) {
        throw InvalidInputError("ray-cast association needs a non-empty ground-truth map");
    }
    if (pred_traj.empty() || gt_traj.empty()) {
        throw InvalidInputError("ray-cast association needs both trajectories");
    }

    // Map predicted pose index -> paired ground-truth pose.
    const auto pairs = associate_timestamps(pred_traj, gt_traj, opts.max_dt);
    std::vector<std::optional<Pose>> gt_for_frame(pred_traj.size());
    {
        std::size_t k = 0;
        for (std::size_t i = 0; i < pred_traj.size() && k < pairs.size(); ++i) {
            if (pred_traj.poses[i].timestamp == pairs[k].first.timestamp) {
                gt_for_frame[i] = pairs[k].second;
                ++k;
            }
        }
    }

    std::vector<std::size_t> unresolved;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto& fid = pred.points[i].frame_id;
        if (!fid || *fid >= pred_traj.size() || !gt_for_frame[*fid]) {
            unresolved.push_back(i);
        }
    }
    if (!unresolved.empty()) {
        std::string msg = "points with unresolvable frame ids:";
        for (std::size_t k = 0; k < unresolved.size() && k < 10; ++k) {
            msg += ' ' + std::to_string(unresolved[k]);
        }
        if (unresolved.size() > 10) msg += " ... (" + std::to_string(unresolved.size()) + " total)";
        throw InvalidInputError(msg);
    }

    // Rotation composition per frame, computed once.
    std::vector<std::optional<Mat3>> frame_rot(pred_traj.size());
    Association assoc;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const std::size_t f = *pred.points[i].frame_id;
        const Pose& est_pose = pred_traj.poses[f];
        const Pose& gt_pose = *gt_for_frame[f];
        if (!frame_rot[f]) {
            const Mat3 r_est = est_pose.rotation();
            const Mat3 r_gt = gt_pose.rotation();
            frame_rot[f] = opts.swap_rotation ? Mat3(r_gt * r_est.transpose())
                                              : Mat3(r_est.transpose() * r_gt);
        }
        const Vec3 v = pred.points[i].xyz - est_pose.position;
        if (v.norm() < 1e-12) {
            assoc.unmatched.push_back(i);
            continue;
        }
        const Vec3 dir = (*frame_rot[f] * v).normalized();
        const auto hit = raycast(gt_map, gt_pose.position, dir, opts.max_range);
        if (hit) {
            assoc.pairs.emplace_back(i, Point3(hit->hit_point));
        } else {
            assoc.unmatched.push_back(i);
        }
    }
    return assoc;
}

/// Drop every point with z <= z_threshold; order is preserved.
inline PointCloud remove_floor(const PointCloud& cloud, double z_threshold) {
    if (!std::isfinite(z_threshold)) {
        throw InvalidInputError("floor threshold must be finite");
    }
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point3& p : cloud.points) {
        if (p.xyz.z() > z_threshold) out.points.push_back(p);
    }
    return out;
}

struct FrameIdResult {
    PointCloud cloud;
    /// Indices of points that were behind every camera and fell back to
    /// the plain nearest pose (only populated with fov_check set).
    std::vector<std::size_t> fallback;
};

/// Give every untagged point the index of the closest trajectory pose.
/// With fov_check set, only poses that have the point in front of the
/// camera (positive optical-axis component) are eligible; a point behind
/// every camera falls back to the nearest pose and is flagged.
inline FrameIdResult infer_frame_ids(const PointCloud& pred, const Trajectory& traj,
                                     bool fov_check = true) {
    if (traj.empty()) {
        throw InvalidInputError("cannot infer frame ids from an empty trajectory");
    }
    std::vector<Mat3> rotations(traj.size());
    for (std::size_t i = 0; i < traj.size(); ++i) rotations[i] = traj.poses[i].rotation();

    FrameIdResult result;
    result.cloud = pred;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        Point3& p = result.cloud.points[i];
        if (p.frame_id) continue;
        std::size_t best = 0, best_visible = traj.size();
        double best_d2 = std::numeric_limits<double>::infinity();
        double best_visible_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const Vec3 offset = p.xyz - traj.poses[t].position;
            const double d2 = offset.squaredNorm();
            if (d2 < best_d2) {
                best = t;
                best_d2 = d2;
            }
            if (fov_check) {
                const double forward = (rotations[t].transpose() * offset).x();
                if (forward > 0.0 && d2 < best_visible_d2) {
                    best_visible = t;
                    best_visible_d2 = d2;
                }
            }
        }
        if (!fov_check) {
            p.frame_id = best;
        } else if (best_visible < traj.size()) {
            p.frame_id = best_visible;
        } else {
            p.frame_id = best;
            result.fallback.push_back(i);
        }
    }
    return result;
}

}  // namespace mapeval
