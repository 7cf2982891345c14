#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "mapeval/geometry.hpp"

namespace mapeval {

/// Pair poses of two trajectories by timestamp. Greedy two-pointer sweep
/// over the sorted sequences: each reference pose grabs the closest
/// still-unused query pose within max_dt. Pairs come back sorted by the
/// first trajectory's timestamps, each pose used at most once.
inline std::vector<std::pair<Pose, Pose>> associate_timestamps(const Trajectory& gt,
                                                               const Trajectory& est,
                                                               double max_dt = 0.02) {
    if (gt.empty() || est.empty()) {
        throw InvalidInputError("cannot associate empty trajectories");
    }
    if (!(max_dt > 0.0)) {
        throw InvalidInputError("max_dt must be positive");
    }
    std::vector<std::pair<Pose, Pose>> pairs;
    std::size_t j = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const double t = gt.poses[i].timestamp;
        while (j + 1 < est.size() &&
               std::abs(est.poses[j + 1].timestamp - t) <= std::abs(est.poses[j].timestamp - t)) {
            ++j;
        }
        if (j < est.size() && std::abs(est.poses[j].timestamp - t) <= max_dt) {
            pairs.emplace_back(gt.poses[i], est.poses[j]);
            ++j;
            if (j == est.size()) break;
        }
    }
    if (pairs.empty()) {
        throw NoOverlapError("no timestamp pairs within max_dt");
    }
    return pairs;
}

/// Least-squares similarity fit: the transform minimizing
/// sum_i ||gt_i - s*R*est_i - t||^2 with det(R) = +1, s fixed to 1 unless
/// with_scale is set. Requires >= 3 correspondences spanning at least a
/// plane; rank-deficient geometry raises DegenerateGeometryError.
inline RigidTransform umeyama_align(std::span<const Vec3> gt_pts, std::span<const Vec3> est_pts,
                                    bool with_scale = false) {
    const std::size_t n = gt_pts.size();
    if (n != est_pts.size()) {
        throw InvalidInputError("point sets must have equal size");
    }
    if (n < 3) {
        throw InvalidInputError("alignment needs at least 3 point pairs");
    }

    Vec3 mean_gt = Vec3::Zero(), mean_est = Vec3::Zero();
    for (std::size_t i = 0; i < n; ++i) {
        mean_gt += gt_pts[i];
        mean_est += est_pts[i];
    }
    mean_gt /= static_cast<double>(n);
    mean_est /= static_cast<double>(n);

    Mat3 cov = Mat3::Zero();
    double est_var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec3 dg = gt_pts[i] - mean_gt;
        const Vec3 de = est_pts[i] - mean_est;
        cov += dg * de.transpose();
        est_var += de.squaredNorm();
    }
    cov /= static_cast<double>(n);
    est_var /= static_cast<double>(n);

    Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec3 sv = svd.singularValues();
    if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
        throw DegenerateGeometryError("point sets are collinear or coincident");
    }

    Vec3 sign = Vec3::Ones();
    if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) {
        sign(2) = -1.0;
    }

    RigidTransform out;
    out.rotation = svd.matrixU() * sign.asDiagonal() * svd.matrixV().transpose();
    out.scale = with_scale ? sv.dot(sign) / est_var : 1.0;
    out.translation = mean_gt - out.scale * (out.rotation * mean_est);
    return out;
}

inline RigidTransform umeyama_align(const std::vector<Vec3>& gt_pts,
                                    const std::vector<Vec3>& est_pts, bool with_scale = false) {
    return umeyama_align(std::span<const Vec3>(gt_pts), std::span<const Vec3>(est_pts),
                         with_scale);
}

/// Mean squared fit residual of a candidate alignment.
inline double alignment_residual(const RigidTransform& t, std::span<const Vec3> gt_pts,
                                 std::span<const Vec3> est_pts) {
    double sum = 0.0;
    for (std::size_t i = 0; i < gt_pts.size(); ++i) {
        sum += (gt_pts[i] - t.apply(est_pts[i])).squaredNorm();
    }
    return gt_pts.empty() ? 0.0 : sum / static_cast<double>(gt_pts.size());
}

/// Transform every pose: positions mapped through T, orientations
/// left-composed with T's rotation, timestamps untouched.
inline Trajectory apply_alignment(const Trajectory& traj, const RigidTransform& t) {
    Trajectory out;
    out.poses.reserve(traj.size());
    const Quat rot(t.rotation);
    for (const Pose& p : traj.poses) {
        out.poses.emplace_back(p.timestamp, t.apply(p.position), rot * p.orientation);
    }
    return out;
}

/// Transform point positions; colors and frame tags ride along unchanged.
inline PointCloud apply_alignment(const PointCloud& cloud, const RigidTransform& t) {
    PointCloud out;
    out.points.reserve(cloud.size());
    for (const Point3& p : cloud.points) {
        Point3 q(t.apply(p.xyz));
        q.color = p.color;
        q.frame_id = p.frame_id;
        out.points.push_back(q);
    }
    return out;
}

/// Transform composing the inverse of the first estimated pose with the
/// first reference pose, so the two trajectories coincide at the start.
inline RigidTransform first_pose_alignment(const Trajectory& gt, const Trajectory& est) {
    if (gt.empty() || est.empty()) {
        throw InvalidInputError("first-pose alignment needs non-empty trajectories");
    }
    const Mat3 r_gt = gt.poses.front().rotation();
    const Mat3 r_est = est.poses.front().rotation();
    RigidTransform out;
    out.rotation = r_gt * r_est.transpose();
    out.translation = gt.poses.front().position - out.rotation * est.poses.front().position;
    return out;
}

}  // namespace mapeval
