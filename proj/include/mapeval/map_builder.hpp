#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "mapeval/geometry.hpp"
#include "mapeval/grid.hpp"
#include "mapeval/io.hpp"

namespace mapeval {

/// One depth observation: an H x W range image plus the observing pose.
/// Depth values are Euclidean range in meters along the pixel ray;
/// non-finite or non-positive entries mark invalid pixels. The camera
/// model is a fixed pinhole whose image plane spans [-1, 1] in normalized
/// coordinates at unit forward distance (90-degree half-angle per axis
/// corner to corner), optical axis +x.
struct DepthFrame {
    int width = 0;
    int height = 0;
    std::vector<double> depth;  // row-major, height * width
    Pose pose;
    double max_range = std::numeric_limits<double>::infinity();
    std::optional<std::vector<std::optional<Rgb>>> colors;  // per pixel, row-major
    std::optional<std::size_t> frame_id;

    double at(int row, int col) const {
        return depth[static_cast<std::size_t>(row) * width + col];
    }
};

/// Unit ray for a real image coordinate (row, col) in [0, H] x [0, W]:
/// the camera-frame direction (1, (col - W/2)/(W/2), (row - H/2)/(H/2))
/// rotated into the world and normalized. (W/2, H/2) is the optical axis.
inline Vec3 pixel_direction(int width, int height, double row, double col, const Mat3& rotation) {
    const double u = (col - 0.5 * width) / (0.5 * width);
    const double v = (row - 0.5 * height) / (0.5 * height);
    Vec3 dir = rotation * Vec3(1.0, u, v);
    return dir.normalized();
}

/// Unit ray through the center of integer pixel (row, col). Rays sample
/// pixel centers, i.e. image coordinate (row + 0.5, col + 0.5).
inline Vec3 pixel_ray(const DepthFrame& frame, int row, int col) {
    if (row < 0 || row >= frame.height || col < 0 || col >= frame.width) {
        throw InvalidInputError("pixel index out of range");
    }
    return pixel_direction(frame.width, frame.height, row + 0.5, col + 0.5,
                           frame.pose.rotation());
}

/// Back-project every valid pixel to a world point at its measured range:
/// point = position + depth * ray. Pixels with invalid depth or depth
/// beyond max_range are skipped. Points inherit the frame's id and the
/// pixel color when the frame carries an RGB image.
inline PointCloud backproject_frame(const DepthFrame& frame) {
    if (frame.width < 1 || frame.height < 1) {
        throw InvalidInputError("depth frame must be at least 1x1");
    }
    if (frame.depth.size() != static_cast<std::size_t>(frame.width) * frame.height) {
        throw InvalidInputError("depth buffer size does not match frame dimensions");
    }
    PointCloud cloud;
    cloud.points.reserve(frame.depth.size());
    const Mat3 rot = frame.pose.rotation();
    for (int h = 0; h < frame.height; ++h) {
        for (int w = 0; w < frame.width; ++w) {
            const double d = frame.at(h, w);
            if (!std::isfinite(d) || d <= 0.0 || d > frame.max_range) continue;
            const Vec3 ray = pixel_direction(frame.width, frame.height, h + 0.5, w + 0.5, rot);
            Point3 p(frame.pose.position + d * ray);
            p.frame_id = frame.frame_id;
            if (frame.colors) {
                p.color = (*frame.colors)[static_cast<std::size_t>(h) * frame.width + w];
            }
            cloud.points.push_back(p);
        }
    }
    return cloud;
}

/// Union of the voxelized back-projections of all frames. Occupancy is a
/// set union, so the result is independent of frame order and duplicate
/// frames; per-cell color is first write wins in the given frame order.
inline VoxelGrid build_gt_map(const std::vector<DepthFrame>& frames, double cell_size = 0.05) {
    if (frames.empty()) {
        throw InvalidInputError("cannot build a map from zero frames");
    }
    VoxelGrid grid(cell_size);
    for (const DepthFrame& frame : frames) {
        const PointCloud cloud = backproject_frame(frame);
        for (const Point3& p : cloud.points) grid.insert_point(p.xyz, p.color);
    }
    return grid;
}

/// Collapse a voxel map onto the ground plane: 2D cell (i, j) is occupied
/// iff any (i, j, k) is occupied.
inline OccupancyGrid2D project_to_2d(const VoxelGrid& grid) {
    OccupancyGrid2D out(grid.cell_size(), grid.origin().head<2>());
    for (const auto& [c, color] : grid.cells()) out.insert_cell({c.x, c.y});
    return out;
}

/// Assemble a DepthFrame from a 16-bit PGM depth image (millimeters,
/// 0 = invalid) and the observing pose.
inline DepthFrame make_depth_frame(const DepthImage& img, const Pose& pose, double max_range,
                                   std::optional<std::size_t> frame_id = std::nullopt) {
    DepthFrame frame;
    frame.width = img.width;
    frame.height = img.height;
    frame.pose = pose;
    frame.max_range = max_range;
    frame.frame_id = frame_id;
    frame.depth.resize(img.samples.size());
    for (std::size_t i = 0; i < img.samples.size(); ++i) {
        frame.depth[i] = img.samples[i] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                             : img.samples[i] / 1000.0;
    }
    return frame;
}

}  // namespace mapeval
