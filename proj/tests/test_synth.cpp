#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mapeval/metrics.hpp"
#include "mapeval/synth.hpp"

using namespace mapeval;

TEST_CASE("gen_scene builds a hollow shell with a closed-form cell count") {
    SceneSpec spec;
    spec.extents = Vec3(1.0, 1.0, 1.0);  // 20^3 cells at 0.05
    const VoxelGrid grid = gen_scene(spec);
    // 20^3 - 18^3 shell cells
    CHECK(grid.size() == 8000 - 5832);
    CHECK(grid.contains({0, 0, 0}));
    CHECK(grid.contains({19, 19, 19}));
    CHECK(!grid.contains({10, 10, 10}));
}

TEST_CASE("gen_scene places obstacles and validates them") {
    SceneSpec spec;
    spec.extents = Vec3(2.0, 2.0, 1.0);
    SECTION("an obstacle box occupies its cells") {
        spec.obstacles.push_back({Vec3(0.5, 0.5, 0.2), Vec3(0.6, 0.6, 0.4)});
        const VoxelGrid with = gen_scene(spec);
        const VoxelGrid without = gen_scene(SceneSpec{spec.extents, 0.05, 1, {}, 0});
        CHECK(with.size() > without.size());
        CHECK(with.contains(with.cell_of(Vec3(0.55, 0.55, 0.3))));
    }
    SECTION("obstacles outside the interior are rejected") {
        spec.obstacles.push_back({Vec3(-0.5, 0.5, 0.2), Vec3(0.6, 0.6, 0.4)});
        CHECK_THROWS_AS(gen_scene(spec), InvalidInputError);
    }
    SECTION("degenerate extents are rejected") {
        spec.obstacles.clear();
        spec.extents = Vec3(0.05, 1.0, 1.0);
        CHECK_THROWS_AS(gen_scene(spec), InvalidInputError);
        spec.extents = Vec3(-1.0, 1.0, 1.0);
        CHECK_THROWS_AS(gen_scene(spec), InvalidInputError);
    }
}

TEST_CASE("generation is deterministic in the seed") {
    SceneSpec spec;
    spec.extents = Vec3(1.5, 1.2, 1.0);
    spec.seed = 7;
    Rng a(spec.seed), b(spec.seed);
    const Trajectory ta = gen_trajectory(spec, 5.0, 10.0, a);
    const Trajectory tb = gen_trajectory(spec, 5.0, 10.0, b);
    REQUIRE(ta.size() == tb.size());
    for (std::size_t i = 0; i < ta.size(); ++i) {
        CHECK(ta.poses[i].position == tb.poses[i].position);
        CHECK(ta.poses[i].timestamp == tb.poses[i].timestamp);
    }
}

TEST_CASE("generated trajectories stay in free space at the sample rate") {
    SceneSpec spec;
    spec.extents = Vec3(1.5, 1.2, 1.0);
    spec.seed = 11;
    const VoxelGrid scene = gen_scene(spec);
    Rng rng(spec.seed);
    const Trajectory traj = gen_trajectory(spec, 8.0, 10.0, rng);
    CHECK(traj.size() == 81);
    traj.validate();
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(!scene.contains(scene.cell_of(traj.poses[i].position)));
        if (i) CHECK(traj.poses[i].timestamp - traj.poses[i - 1].timestamp ==
                     Catch::Approx(0.1).margin(1e-12));
    }
}

TEST_CASE("render_depth sees a wall at its range") {
    VoxelGrid wall(0.05);
    for (std::int64_t j = -40; j <= 40; ++j) {
        for (std::int64_t k = -40; k <= 40; ++k) {
            wall.insert_cell({40, j, k});  // plane x in [2.0, 2.05)
        }
    }
    const Pose pose(0.0, Vec3(0.0, 0.025, 0.025), Quat::Identity());
    const DepthFrame frame = render_depth(wall, pose, 5, 5, 10.0);
    const double center = frame.at(2, 2);
    REQUIRE(std::isfinite(center));
    CHECK(std::abs(center - 2.0) <= 0.05);  // within one cell of the true range
}

TEST_CASE("render_depth marks misses invalid and rejects buried poses") {
    VoxelGrid sparse(0.05);
    sparse.insert_cell({40, 0, 0});
    SECTION("rays that exceed max_range are invalid") {
        const Pose away(0.0, Vec3(0.0, 5.0, 5.0), Quat::Identity());
        const DepthFrame frame = render_depth(sparse, away, 4, 4, 1.0);
        for (double d : frame.depth) CHECK(!std::isfinite(d));
    }
    SECTION("camera inside an occupied cell is an error") {
        const Pose buried(0.0, Vec3(2.01, 0.01, 0.01), Quat::Identity());
        CHECK_THROWS_AS(render_depth(sparse, buried, 4, 4, 10.0), InvalidInputError);
    }
}

TEST_CASE("render then backproject lands only in occupied scene cells") {
    SceneSpec spec;
    spec.extents = Vec3(1.5, 1.2, 1.0);
    spec.seed = 13;
    const VoxelGrid scene = gen_scene(spec);
    Rng rng(spec.seed);
    const Trajectory traj = gen_trajectory(spec, 3.0, 10.0, rng);

    std::size_t total_points = 0;
    for (std::size_t i = 0; i < traj.size(); i += 7) {
        const DepthFrame frame = render_depth(scene, traj.poses[i], 24, 18, 10.0);
        const PointCloud cloud = backproject_frame(frame);
        total_points += cloud.size();
        for (const Point3& p : cloud.points) {
            CHECK(scene.contains(scene.cell_of(p.xyz)));
        }
    }
    CHECK(total_points > 1000);  // the room encloses the camera, most rays hit
}

TEST_CASE("perturb is the identity for a zero noise spec") {
    SceneSpec sspec;
    sspec.extents = Vec3(1.5, 1.2, 1.0);
    Rng rng(3);
    const Trajectory traj = gen_trajectory(sspec, 4.0, 10.0, rng);
    PointCloud cloud;
    for (int i = 0; i < 30; ++i) {
        Point3 p(0.1 * i, 0.5, 0.4);
        p.frame_id = static_cast<std::size_t>(i % traj.size());
        cloud.points.push_back(p);
    }
    const auto [ptraj, pcloud] = perturb(traj, cloud, NoiseSpec{});
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(ptraj.poses[i].position == traj.poses[i].position);
        CHECK(ptraj.poses[i].orientation.coeffs() == traj.poses[i].orientation.coeffs());
    }
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(pcloud.points[i].xyz == cloud.points[i].xyz);
    }
}

TEST_CASE("pure scale perturbation matches the closed-form ATE") {
    SceneSpec sspec;
    sspec.extents = Vec3(2.0, 2.0, 1.0);
    sspec.seed = 17;
    Rng rng(sspec.seed);
    const Trajectory traj = gen_trajectory(sspec, 6.0, 10.0, rng);

    NoiseSpec noise;
    noise.scale = 2.0;
    const auto [scaled, cloud] = perturb(traj, PointCloud{}, noise);

    const Vec3 anchor = traj.poses.front().position;
    double sum = 0.0;
    for (const Pose& p : traj.poses) {
        sum += ((noise.scale - 1.0) * (p.position - anchor)).squaredNorm();
    }
    const double expect = std::sqrt(sum / traj.size());

    const auto pairs = associate_timestamps(traj, scaled, 0.02);
    REQUIRE(pairs.size() == traj.size());
    CHECK(ate(pairs).rmse == Catch::Approx(expect).margin(1e-9));
}

TEST_CASE("perturb streams are seed-deterministic") {
    Trajectory traj;
    for (int i = 0; i < 40; ++i) {
        traj.poses.emplace_back(0.1 * i, Vec3(0.05 * i, 0.2, 0.5), Quat::Identity());
    }
    PointCloud cloud;
    for (int i = 0; i < 40; ++i) {
        Point3 p(1.0, 0.01 * i, 0.5);
        p.frame_id = static_cast<std::size_t>(i);
        cloud.points.push_back(p);
    }
    NoiseSpec noise;
    noise.translation_sigma = 0.01;
    noise.yaw_sigma = 0.002;
    noise.depth_sigma = 0.01;
    noise.seed = 99;
    const auto [t1, c1] = perturb(traj, cloud, noise);
    const auto [t2, c2] = perturb(traj, cloud, noise);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(t1.poses[i].position == t2.poses[i].position);
        CHECK(c1.points[i].xyz == c2.points[i].xyz);
    }
    // and actually noisy
    double moved = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
        moved += (t1.poses[i].position - traj.poses[i].position).norm();
    }
    CHECK(moved > 0.0);
}

TEST_CASE("synth spec files parse and validate") {
    SECTION("a full spec round-trips into fields") {
        std::istringstream in(
            "# demo spec\nroom_x=2.0\nroom_y=1.5\nroom_z=1.0\ncell=0.05\nwall_thickness=1\n"
            "obstacle=0.5 0.5 0.2 0.7 0.7 0.5\nseed=42\nduration=8\nrate=10\n"
            "camera_width=24\ncamera_height=18\nmax_range=9\n"
            "noise_translation_sigma=0.01\nnoise_yaw_sigma=0.001\nnoise_scale=1.05\n"
            "noise_depth_sigma=0.02\n");
        const SynthSpec spec = parse_synth_spec(in);
        CHECK(spec.scene.extents == Vec3(2.0, 1.5, 1.0));
        CHECK(spec.scene.obstacles.size() == 1);
        CHECK(spec.scene.seed == 42);
        CHECK(spec.noise.scale == 1.05);
        CHECK(spec.camera_width == 24);
        CHECK(spec.duration_s == 8.0);
    }
    SECTION("unknown keys and missing room are errors") {
        std::istringstream unknown("room_x=1\nroom_y=1\nroom_z=1\nbogus=3\n");
        CHECK_THROWS_AS(parse_synth_spec(unknown), ParseError);
        std::istringstream missing("seed=1\n");
        CHECK_THROWS_AS(parse_synth_spec(missing), ParseError);
        std::istringstream garbled("room_x\n");
        CHECK_THROWS_AS(parse_synth_spec(garbled), ParseError);
    }
}

TEST_CASE("a zero-noise bundle evaluates perfectly end to end") {
    SynthSpec spec;
    spec.scene.extents = Vec3(1.5, 1.2, 1.0);  // 30 x 24 x 20 cells
    spec.scene.seed = 23;
    spec.noise.seed = 23;
    spec.duration_s = 6.0;
    spec.camera_width = 24;
    spec.camera_height = 18;
    spec.max_range = 10.0;

    const SynthBundle bundle = generate_bundle(spec);
    CHECK(bundle.gt_map.size() > 500);

    EvalBundle gt{bundle.gt_trajectory, bundle.gt_cloud};
    EvalBundle est{bundle.est_trajectory, bundle.est_cloud};
    EvalOptions opts;
    opts.align = AlignMode::None;
    opts.max_range = 10.0;
    const MetricReport report = evaluate(gt, est, opts);

    CHECK(*report.ate <= 1e-9);
    CHECK(*report.rpe <= 1e-9);
    CHECK(*report.ame_nn <= 1e-9);
    CHECK(*report.ame_raycast <= 0.05 * std::sqrt(3.0));
    CHECK(*report.iou == 1.0);
    CHECK(report.miss_count == 0);
}
