#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "mapeval/geometry.hpp"
#include "mapeval/grid.hpp"
#include "mapeval/io.hpp"
#include "mapeval/map_builder.hpp"
#include "mapeval/association.hpp"

namespace mapeval {

/// Deterministic random source for the harness: a Mersenne Twister
/// (std::mt19937_64) mapped to doubles explicitly, so a seed produces the
/// same stream on every standard library. Gaussians come from Box-Muller.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double gaussian() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Vec3 gaussian3() { return {gaussian(), gaussian(), gaussian()}; }

private:
    std::mt19937_64 engine_;
};

struct AlignedBox {
    Vec3 min = Vec3::Zero();
    Vec3 max = Vec3::Zero();
};

/// Axis-aligned hollow room: the outermost wall_thickness cell layers of
/// the extent box are occupied (floor, ceiling, walls), the interior is
/// free except for the obstacle boxes.
struct SceneSpec {
    Vec3 extents = Vec3(2.0, 2.0, 2.0);  // meters
    double cell_size = 0.05;
    int wall_thickness = 1;  // cells
    std::vector<AlignedBox> obstacles;
    std::uint64_t seed = 0;
};

/// Error model for fake SLAM output: a pose random walk (per-step
/// translation and yaw), a global scale about the first pose, and radial
/// depth noise on map points.
struct NoiseSpec {
    double translation_sigma = 0.0;  // meters per step
    double yaw_sigma = 0.0;          // radians per step
    double scale = 1.0;
    double depth_sigma = 0.0;  // meters
    std::uint64_t seed = 0;
};

inline VoxelGrid gen_scene(const SceneSpec& spec) {
    if (!(spec.extents.minCoeff() > 0.0) || !finite(spec.extents)) {
        throw InvalidInputError("scene extents must be positive");
    }
    const double s = spec.cell_size;
    const std::int64_t nx = static_cast<std::int64_t>(std::llround(spec.extents.x() / s));
    const std::int64_t ny = static_cast<std::int64_t>(std::llround(spec.extents.y() / s));
    const std::int64_t nz = static_cast<std::int64_t>(std::llround(spec.extents.z() / s));
    const std::int64_t w = spec.wall_thickness;
    if (nx <= 2 * w || ny <= 2 * w || nz <= 2 * w) {
        throw InvalidInputError("scene extents leave no interior");
    }
    VoxelGrid grid(s);
    for (std::int64_t x = 0; x < nx; ++x) {
        for (std::int64_t y = 0; y < ny; ++y) {
            for (std::int64_t z = 0; z < nz; ++z) {
                const bool shell = x < w || x >= nx - w || y < w || y >= ny - w || z < w ||
                                   z >= nz - w;
                if (shell) grid.insert_cell({x, y, z});
            }
        }
    }
    for (const AlignedBox& box : spec.obstacles) {
        if (box.min.minCoeff() < w * s || (box.max - spec.extents + Vec3::Constant(w * s)).maxCoeff() > 0.0) {
            throw InvalidInputError("obstacle box must lie inside the room interior");
        }
        const CellIndex lo = grid.cell_of(box.min);
        const CellIndex hi = grid.cell_of(box.max);
        for (std::int64_t x = lo.x; x <= hi.x; ++x) {
            for (std::int64_t y = lo.y; y <= hi.y; ++y) {
                for (std::int64_t z = lo.z; z <= hi.z; ++z) {
                    grid.insert_cell({x, y, z});
                }
            }
        }
    }
    return grid;
}

namespace detail {

inline Vec3 catmull_rom(const Vec3& p0, const Vec3& p1, const Vec3& p2, const Vec3& p3,
                        double t) {
    const double t2 = t * t, t3 = t2 * t;
    return 0.5 * ((2.0 * p1) + (-p0 + p2) * t + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * t2 +
                  (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * t3);
}

}  // namespace detail

/// Smooth random tour of the room interior: Catmull-Rom spline through
/// random waypoints at mid-room height, sampled at `rate` Hz, yaw facing
/// the direction of motion.
inline Trajectory gen_trajectory(const SceneSpec& spec, double duration_s, double rate, Rng& rng) {
    if (!(duration_s > 0.0) || !(rate > 0.0)) {
        throw InvalidInputError("trajectory duration and rate must be positive");
    }
    const int waypoint_count = std::max(4, static_cast<int>(std::lround(duration_s / 2.5)));
    const Vec3 lo = 0.30 * spec.extents;
    const Vec3 hi = 0.70 * spec.extents;
    const double z = 0.5 * spec.extents.z();
    std::vector<Vec3> wp(waypoint_count);
    for (Vec3& p : wp) {
        p = Vec3(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()), z);
    }

    const int samples = static_cast<int>(std::lround(duration_s * rate)) + 1;
    std::vector<Vec3> pos(samples);
    const int segments = waypoint_count - 1;
    for (int i = 0; i < samples; ++i) {
        const double u = segments * static_cast<double>(i) / (samples - 1);
        int seg = std::min(static_cast<int>(u), segments - 1);
        const double t = u - seg;
        const Vec3& p0 = wp[std::max(seg - 1, 0)];
        const Vec3& p1 = wp[seg];
        const Vec3& p2 = wp[seg + 1];
        const Vec3& p3 = wp[std::min(seg + 2, waypoint_count - 1)];
        pos[i] = detail::catmull_rom(p0, p1, p2, p3, t);
    }

    Trajectory traj;
    traj.poses.reserve(samples);
    double yaw = 0.0;
    for (int i = 0; i < samples; ++i) {
        const Vec3 dir = (i + 1 < samples) ? Vec3(pos[i + 1] - pos[i]) : Vec3(pos[i] - pos[i - 1]);
        if (dir.head<2>().norm() > 1e-12) {
            yaw = std::atan2(dir.y(), dir.x());
        }
        const Quat q(Eigen::AngleAxisd(yaw, Vec3::UnitZ()));
        traj.poses.emplace_back(i / rate, pos[i], q);
    }
    return traj;
}

/// Render a depth frame by casting one ray per pixel into the scene.
/// Depth is the range to the midpoint of the ray's chord through the
/// first occupied cell, so back-projecting a rendered frame lands strictly
/// inside occupied cells. Misses leave the pixel invalid (NaN).
inline DepthFrame render_depth(const VoxelGrid& scene, const Pose& pose, int width, int height,
                               double max_range) {
    if (width < 1 || height < 1) {
        throw InvalidInputError("render size must be at least 1x1");
    }
    if (scene.contains(scene.cell_of(pose.position))) {
        throw InvalidInputError("camera pose is inside an occupied cell");
    }
    DepthFrame frame;
    frame.width = width;
    frame.height = height;
    frame.pose = pose;
    frame.max_range = max_range;
    frame.depth.assign(static_cast<std::size_t>(width) * height,
                       std::numeric_limits<double>::quiet_NaN());
    const Mat3 rot = pose.rotation();
    const double s = scene.cell_size();
    for (int h = 0; h < height; ++h) {
        for (int w = 0; w < width; ++w) {
            const Vec3 dir = pixel_direction(width, height, h + 0.5, w + 0.5, rot);
            const auto hit = raycast(scene, pose.position, dir, max_range);
            if (!hit) continue;
            // exit distance of the hit cell along the ray (slab test)
            double t_exit = std::numeric_limits<double>::infinity();
            const Vec3 cell_lo =
                scene.origin() + s * Vec3(static_cast<double>(hit->cell.x),
                                          static_cast<double>(hit->cell.y),
                                          static_cast<double>(hit->cell.z));
            for (int a = 0; a < 3; ++a) {
                if (std::abs(dir[a]) < 1e-15) continue;
                const double bound = dir[a] > 0.0 ? cell_lo[a] + s : cell_lo[a];
                t_exit = std::min(t_exit, (bound - pose.position[a]) / dir[a]);
            }
            frame.depth[static_cast<std::size_t>(h) * width + w] = 0.5 * (hit->alpha + t_exit);
        }
    }
    return frame;
}

/// Apply the noise model. Pose t gets the accumulated walk (drift d_t,
/// yaw theta_t) and the global scale about the first pose:
///   p'_t = p_0 + scale * Rz(theta_t) * (p_t - p_0) + d_t
/// and each map point tagged with frame t moves with its pose (plus radial
/// depth noise). Untagged points only see the global scale. The first pose
/// is exact (d_0 = 0, theta_0 = 0); a zero-noise spec is the identity.
inline std::pair<Trajectory, PointCloud> perturb(const Trajectory& traj, const PointCloud& cloud,
                                                 const NoiseSpec& noise) {
    if (traj.empty()) {
        throw InvalidInputError("perturb needs a non-empty trajectory");
    }
    if (!(noise.scale > 0.0)) {
        throw InvalidInputError("noise scale must be positive");
    }
    Rng rng(noise.seed);
    const Vec3 anchor = traj.poses.front().position;

    std::vector<double> yaws(traj.size());
    std::vector<Vec3> drifts(traj.size());
    yaws[0] = 0.0;
    drifts[0] = Vec3::Zero();
    for (std::size_t t = 1; t < traj.size(); ++t) {
        yaws[t] = yaws[t - 1] + noise.yaw_sigma * rng.gaussian();
        drifts[t] = drifts[t - 1] + noise.translation_sigma * rng.gaussian3();
    }

    auto transform_point = [&](const Vec3& p, std::size_t t) {
        // exact identity when this pose saw no noise (keeps zero-noise
        // specs bit-identical and the first pose anchored)
        if (yaws[t] == 0.0 && noise.scale == 1.0 && drifts[t].squaredNorm() == 0.0) {
            return p;
        }
        const Mat3 rz = Eigen::AngleAxisd(yaws[t], Vec3::UnitZ()).toRotationMatrix();
        return Vec3(anchor + noise.scale * (rz * (p - anchor)) + drifts[t]);
    };

    Trajectory out_traj;
    out_traj.poses.reserve(traj.size());
    for (std::size_t t = 0; t < traj.size(); ++t) {
        const Pose& p = traj.poses[t];
        const Quat rz(Eigen::AngleAxisd(yaws[t], Vec3::UnitZ()));
        out_traj.poses.emplace_back(p.timestamp, transform_point(p.position, t),
                                    rz * p.orientation);
    }

    PointCloud out_cloud;
    out_cloud.points.reserve(cloud.size());
    for (const Point3& p : cloud.points) {
        Vec3 x = p.xyz;
        const std::size_t t = p.frame_id.value_or(0);
        if (t >= traj.size()) {
            throw InvalidInputError("point frame id outside trajectory");
        }
        if (p.frame_id && noise.depth_sigma > 0.0) {
            const Vec3 radial = x - traj.poses[t].position;
            const double r = radial.norm();
            if (r > 1e-12) {
                x += (noise.depth_sigma * rng.gaussian() / r) * radial;
            }
        }
        Point3 q(transform_point(x, t));
        q.color = p.color;
        q.frame_id = p.frame_id;
        out_cloud.points.push_back(q);
    }
    return {std::move(out_traj), std::move(out_cloud)};
}

// --------------------------------------------------------------- spec files

/// Everything cmd-line generation needs, read from a flat key=value file.
struct SynthSpec {
    SceneSpec scene;
    NoiseSpec noise;
    double duration_s = 20.0;
    double rate_hz = 10.0;
    int camera_width = 32;
    int camera_height = 24;
    double max_range = 10.0;
};

/// Parse "key=value" lines ('#' comments). Unknown keys are rejected.
/// Keys: room_x room_y room_z cell wall_thickness obstacle seed duration
/// rate camera_width camera_height max_range noise_translation_sigma
/// noise_yaw_sigma noise_scale noise_depth_sigma.
inline SynthSpec parse_synth_spec(std::istream& in) {
    SynthSpec spec;
    std::string line;
    int line_no = 0;
    bool have_room = false;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::blank(line) || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ParseError("expected key=value", line_no);
        }
        const std::string key = line.substr(0, eq);
        const std::string value = line.substr(eq + 1);
        auto num = [&] { return detail::parse_double(value, line_no); };
        if (key == "room_x") {
            spec.scene.extents.x() = num();
            have_room = true;
        } else if (key == "room_y") {
            spec.scene.extents.y() = num();
            have_room = true;
        } else if (key == "room_z") {
            spec.scene.extents.z() = num();
            have_room = true;
        } else if (key == "cell") {
            spec.scene.cell_size = num();
        } else if (key == "wall_thickness") {
            spec.scene.wall_thickness = static_cast<int>(num());
        } else if (key == "obstacle") {
            const auto toks = detail::split_ws(value);
            if (toks.size() != 6) {
                throw ParseError("obstacle expects 6 numbers (min xyz, max xyz)", line_no);
            }
            AlignedBox box;
            for (int i = 0; i < 3; ++i) box.min[i] = detail::parse_double(toks[i], line_no);
            for (int i = 0; i < 3; ++i) box.max[i] = detail::parse_double(toks[3 + i], line_no);
            spec.scene.obstacles.push_back(box);
        } else if (key == "seed") {
            spec.scene.seed = static_cast<std::uint64_t>(num());
            spec.noise.seed = spec.scene.seed;
        } else if (key == "duration") {
            spec.duration_s = num();
        } else if (key == "rate") {
            spec.rate_hz = num();
        } else if (key == "camera_width") {
            spec.camera_width = static_cast<int>(num());
        } else if (key == "camera_height") {
            spec.camera_height = static_cast<int>(num());
        } else if (key == "max_range") {
            spec.max_range = num();
        } else if (key == "noise_translation_sigma") {
            spec.noise.translation_sigma = num();
        } else if (key == "noise_yaw_sigma") {
            spec.noise.yaw_sigma = num();
        } else if (key == "noise_scale") {
            spec.noise.scale = num();
        } else if (key == "noise_depth_sigma") {
            spec.noise.depth_sigma = num();
        } else {
            throw ParseError("unknown key '" + key + "'", line_no);
        }
    }
    if (!have_room) {
        throw ParseError("spec must set room_x/room_y/room_z");
    }
    return spec;
}

/// A full synthetic sample: the scene, the true trajectory and map, and
/// the fake SLAM output (perturbed trajectory and voxel-resolution map
/// with per-point frame tags).
struct SynthBundle {
    VoxelGrid scene;
    Trajectory gt_trajectory;
    VoxelGrid gt_map;
    PointCloud gt_cloud;
    Trajectory est_trajectory;
    PointCloud est_cloud;
};

inline SynthBundle generate_bundle(const SynthSpec& spec) {
    SynthBundle bundle{gen_scene(spec.scene), {}, VoxelGrid(spec.scene.cell_size), {}, {}, {}};
    Rng rng(spec.scene.seed);
    bundle.gt_trajectory = gen_trajectory(spec.scene, spec.duration_s, spec.rate_hz, rng);

    std::vector<DepthFrame> frames;
    frames.reserve(bundle.gt_trajectory.size());
    for (std::size_t i = 0; i < bundle.gt_trajectory.size(); ++i) {
        DepthFrame f = render_depth(bundle.scene, bundle.gt_trajectory.poses[i],
                                    spec.camera_width, spec.camera_height, spec.max_range);
        f.frame_id = i;
        frames.push_back(std::move(f));
    }
    bundle.gt_map = build_gt_map(frames, spec.scene.cell_size);
    bundle.gt_cloud = bundle.gt_map.to_cloud();

    // Perfect SLAM output at voxel resolution: per frame, the set of cells
    // it observed, as tagged cell-center points.
    PointCloud perfect;
    for (const DepthFrame& frame : frames) {
        const PointCloud raw = backproject_frame(frame);
        VoxelGrid seen(spec.scene.cell_size);
        for (const Point3& p : raw.points) seen.insert_point(p.xyz);
        for (const CellIndex& c : seen.sorted_cells()) {
            Point3 p(bundle.gt_map.center_of(c));
            p.frame_id = frame.frame_id;
            perfect.points.push_back(p);
        }
    }
    auto [est_traj, est_cloud] = perturb(bundle.gt_trajectory, perfect, spec.noise);
    bundle.est_trajectory = std::move(est_traj);
    bundle.est_cloud = std::move(est_cloud);
    return bundle;
}

}  // namespace mapeval
