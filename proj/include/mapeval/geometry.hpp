#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "mapeval/errors.hpp"

namespace mapeval {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;
using Rgb = std::array<std::uint8_t, 3>;

inline bool finite(const Vec3& v) {
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

/// Rotation matrix for a quaternion. The input need not be exactly unit
/// length; it is normalized first. Zero or non-finite quaternions are
/// rejected.
inline Mat3 quaternion_to_matrix(const Quat& q) {
    const double n = q.norm();
    if (!std::isfinite(n) || n < 1e-12) {
        throw InvalidInputError("quaternion has zero or non-finite norm");
    }
    Quat unit = q;
    unit.normalize();
    return unit.toRotationMatrix();
}

/// Inverse of quaternion_to_matrix up to sign (q and -q encode the same
/// rotation).
inline Quat matrix_to_quaternion(const Mat3& m) {
    Quat q(m);
    q.normalize();
    return q;
}

/// Timestamped 6-DoF camera state. The orientation is normalized on
/// construction; the camera optical axis is the +x direction of the
/// rotated frame (right-handed, z-up world).
struct Pose {
    double timestamp = 0.0;
    Vec3 position = Vec3::Zero();
    Quat orientation = Quat::Identity();

    Pose() = default;

    Pose(double t, const Vec3& p, const Quat& q)
        : timestamp(t), position(p), orientation(q) {
        if (!std::isfinite(t) || t < 0.0) {
            throw InvalidInputError("pose timestamp must be finite and non-negative");
        }
        if (!finite(p)) {
            throw InvalidInputError("pose position must be finite");
        }
        const double n = orientation.norm();
        if (!std::isfinite(n) || n < 1e-12) {
            throw InvalidInputError("pose orientation has zero or non-finite norm");
        }
        orientation.normalize();
    }

    Mat3 rotation() const { return orientation.toRotationMatrix(); }
};

/// Ordered pose sequence with strictly increasing timestamps.
struct Trajectory {
    std::vector<Pose> poses;

    std::size_t size() const { return poses.size(); }
    bool empty() const { return poses.empty(); }

    /// Throws if timestamps are not strictly increasing.
    void validate() const {
        for (std::size_t i = 1; i < poses.size(); ++i) {
            if (!(poses[i].timestamp > poses[i - 1].timestamp)) {
                throw InvalidInputError("trajectory timestamps must be strictly increasing");
            }
        }
    }
};

/// One map element: a 3D point in meters, optionally colored and optionally
/// tagged with the index of the pose it was observed from.
struct Point3 {
    Vec3 xyz = Vec3::Zero();
    std::optional<Rgb> color;
    std::optional<std::size_t> frame_id;

    Point3() = default;
    explicit Point3(const Vec3& p) : xyz(p) {}
    Point3(double x, double y, double z) : xyz(x, y, z) {}
};

struct PointCloud {
    std::vector<Point3> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Similarity transform y = s * R * x + t with R a proper rotation.
/// scale defaults to 1 (rigid).
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();
    double scale = 1.0;

    static RigidTransform identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return scale * (rotation * p) + translation; }

    RigidTransform inverse() const {
        RigidTransform inv;
        inv.rotation = rotation.transpose();
        inv.scale = 1.0 / scale;
        inv.translation = -inv.scale * (inv.rotation * translation);
        return inv;
    }
};

/// compose(a, b): the transform equivalent to applying b first, then a.
inline RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
    RigidTransform out;
    out.rotation = a.rotation * b.rotation;
    out.scale = a.scale * b.scale;
    out.translation = a.scale * (a.rotation * b.translation) + a.translation;
    return out;
}

/// Correspondences from predicted-map points to ground-truth points.
/// `pairs` holds (predicted point index, matched ground-truth point);
/// `unmatched` holds predicted indices with no match. Together they
/// partition the predicted indices the association covered.
struct Association {
    std::vector<std::pair<std::size_t, Point3>> pairs;
    std::vector<std::size_t> unmatched;
};

}  // namespace mapeval
