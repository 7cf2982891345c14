#include <catch2/catch_amalgamated.hpp>

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <sys/wait.h>

#include "mapeval/mapeval.hpp"

namespace fs = std::filesystem;
using namespace mapeval;

namespace {

struct CmdResult {
    int code = -1;
    std::string out;
};

CmdResult run(const std::string& args) {
    const std::string cmd = std::string(MAPEVAL_BIN) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult r;
    char buf[4096];
    while (fgets(buf, sizeof buf, pipe)) r.out += buf;
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

fs::path workspace(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "mapeval_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

Trajectory curved_trajectory(int n) {
    Trajectory traj;
    for (int i = 0; i < n; ++i) {
        traj.poses.emplace_back(0.1 * i, Vec3(0.1 * i, std::sin(0.3 * i), 0.02 * i),
                                Quat(Eigen::AngleAxisd(0.1 * i, Vec3::UnitZ())));
    }
    return traj;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("eval-traj on identical trajectories") {
    const fs::path dir = workspace("traj_self");
    const Trajectory traj = curved_trajectory(30);
    save_trajectory(traj, (dir / "gt.txt").string());

    const CmdResult r =
        run("eval-traj " + (dir / "gt.txt").string() + " " + (dir / "gt.txt").string() +
            " --align none");
    REQUIRE(r.code == 0);
    const auto kv = parse_kv(r.out);
    CHECK(kv.at("ate") == "0");
    CHECK(kv.at("rpe") == "0");
    CHECK(kv.at("pair_count") == "30");
    CHECK(kv.at("alignment_mode") == "none");
}

TEST_CASE("eval-traj closed-form translation with --align none") {
    const fs::path dir = workspace("traj_offset");
    const Trajectory gt = curved_trajectory(25);
    Trajectory est;
    for (const Pose& p : gt.poses) {
        est.poses.emplace_back(p.timestamp, p.position + Vec3(0.3, 0.4, 0.0), p.orientation);
    }
    save_trajectory(gt, (dir / "gt.txt").string());
    save_trajectory(est, (dir / "est.txt").string());

    const CmdResult r = run("eval-traj " + (dir / "gt.txt").string() + " " +
                            (dir / "est.txt").string() + " --align none");
    REQUIRE(r.code == 0);
    const auto kv = parse_kv(r.out);
    CHECK(std::abs(std::stod(kv.at("ate")) - 0.5) < 1e-9);
    CHECK(std::stod(kv.at("rpe")) < 1e-9);

    // umeyama alignment wipes the offset out
    const CmdResult aligned = run("eval-traj " + (dir / "gt.txt").string() + " " +
                                  (dir / "est.txt").string() + " --align umeyama");
    REQUIRE(aligned.code == 0);
    CHECK(std::stod(parse_kv(aligned.out).at("ate")) < 1e-9);
}

TEST_CASE("eval-traj exit codes") {
    const fs::path dir = workspace("traj_errors");
    {
        std::ofstream bad(dir / "bad.txt");
        bad << "this is not a trajectory\n";
    }
    const Trajectory gt = curved_trajectory(5);
    save_trajectory(gt, (dir / "gt.txt").string());

    SECTION("parse error is exit 2") {
        const CmdResult r = run("eval-traj " + (dir / "gt.txt").string() + " " +
                                (dir / "bad.txt").string());
        CHECK(r.code == 2);
    }
    SECTION("missing file is exit 2") {
        const CmdResult r =
            run("eval-traj " + (dir / "gt.txt").string() + " " + (dir / "nope.txt").string());
        CHECK(r.code == 2);
    }
    SECTION("temporal no-overlap is exit 3") {
        Trajectory late;
        for (const Pose& p : gt.poses) {
            late.poses.emplace_back(p.timestamp + 1000.0, p.position, p.orientation);
        }
        save_trajectory(late, (dir / "late.txt").string());
        const CmdResult r = run("eval-traj " + (dir / "gt.txt").string() + " " +
                                (dir / "late.txt").string());
        CHECK(r.code == 3);
    }
    SECTION("unknown flag is exit 2") {
        const CmdResult r = run("eval-traj " + (dir / "gt.txt").string() + " " +
                                (dir / "gt.txt").string() + " --bogus");
        CHECK(r.code == 2);
    }
}

TEST_CASE("eval-traj json mode mirrors the text keys") {
    const fs::path dir = workspace("traj_json");
    const Trajectory traj = curved_trajectory(10);
    save_trajectory(traj, (dir / "gt.txt").string());
    const CmdResult r = run("eval-traj " + (dir / "gt.txt").string() + " " +
                            (dir / "gt.txt").string() + " --align none --json");
    REQUIRE(r.code == 0);
    const nlohmann::json j = nlohmann::json::parse(r.out);
    CHECK(j["ate"].get<double>() == 0.0);
    CHECK(j["rpe"].get<double>() == 0.0);
    CHECK(j["ame_nn"].is_null());
    CHECK(j["pair_count"].get<int>() == 10);
    CHECK(j["per_pose_errors"].size() == 10);
}

TEST_CASE("eval-map nearest neighbor on identical maps") {
    const fs::path dir = workspace("map_nn");
    PointCloud map;
    std::mt19937 rng(401);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 200; ++i) map.points.emplace_back(u(rng), u(rng), u(rng));
    save_point_cloud(map, (dir / "map.pcd").string());

    const CmdResult r = run("eval-map " + (dir / "map.pcd").string() + " " +
                            (dir / "map.pcd").string() + " --assoc nn");
    REQUIRE(r.code == 0);
    const auto kv = parse_kv(r.out);
    CHECK(kv.at("ame_nn") == "0");
    CHECK(kv.at("ate") == "null");
    CHECK(kv.at("iou") == "1");
    CHECK(kv.at("alignment_mode") == "none");
}

TEST_CASE("eval-map is byte-deterministic across invocations") {
    const fs::path dir = workspace("map_repeat");
    PointCloud map;
    std::mt19937 rng(409);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    for (int i = 0; i < 150; ++i) map.points.emplace_back(u(rng), u(rng), u(rng));
    PointCloud pred = map;
    for (Point3& p : pred.points) p.xyz += Vec3(0.01, 0.0, 0.0);
    save_point_cloud(map, (dir / "gt.pcd").string());
    save_point_cloud(pred, (dir / "pred.pcd").string());

    const std::string cmd = "eval-map " + (dir / "gt.pcd").string() + " " +
                            (dir / "pred.pcd").string() + " --assoc nn";
    const CmdResult a = run(cmd);
    const CmdResult b = run(cmd);
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
}

TEST_CASE("eval-map floor removal raises the reported error on a misassociation scene") {
    const fs::path dir = workspace("map_floor");
    PointCloud gt;
    for (int i = 0; i <= 60; ++i) {
        for (int j = -10; j <= 10; ++j) {
            gt.points.emplace_back(0.1 * i, 0.1 * j, 0.025);  // floor
        }
    }
    for (int j = -10; j <= 10; ++j) {
        for (int k = 2; k <= 20; ++k) {
            gt.points.emplace_back(5.025, 0.1 * j, 0.1 * k);  // wall
        }
    }
    PointCloud pred;
    for (int j = -8; j <= 8; ++j) pred.points.emplace_back(5.5, 0.1 * j, 0.2);
    save_point_cloud(gt, (dir / "gt.pcd").string());
    save_point_cloud(pred, (dir / "pred.pcd").string());

    const std::string base = "eval-map " + (dir / "gt.pcd").string() + " " +
                             (dir / "pred.pcd").string() + " --assoc nn";
    const CmdResult with_floor = run(base);
    const CmdResult without_floor = run(base + " --remove-floor 0.1");
    REQUIRE(with_floor.code == 0);
    REQUIRE(without_floor.code == 0);
    CHECK(std::stod(parse_kv(without_floor.out).at("ame_nn")) >
          std::stod(parse_kv(with_floor.out).at("ame_nn")));
}

TEST_CASE("eval-map error paths") {
    const fs::path dir = workspace("map_errors");
    PointCloud map;
    map.points.emplace_back(0.0, 0.0, 0.5);
    save_point_cloud(map, (dir / "map.pcd").string());

    SECTION("raycast without trajectories is exit 2") {
        const CmdResult r = run("eval-map " + (dir / "map.pcd").string() + " " +
                                (dir / "map.pcd").string() + " --assoc raycast");
        CHECK(r.code == 2);
    }
    SECTION("floor removal that leaves nothing is exit 4") {
        const CmdResult r = run("eval-map " + (dir / "map.pcd").string() + " " +
                                (dir / "map.pcd").string() + " --assoc nn --remove-floor 10");
        CHECK(r.code == 4);
    }
}

TEST_CASE("iou command") {
    const fs::path dir = workspace("iou");
    PointCloud a, b;
    for (int x = 0; x < 10; ++x) {
        for (int y = 0; y < 10; ++y) {
            a.points.emplace_back(0.05 * x + 0.025, 0.05 * y + 0.025, 0.0);
            b.points.emplace_back(0.05 * (x + 5) + 0.025, 0.05 * y + 0.025, 0.7);
        }
    }
    save_point_cloud(a, (dir / "a.pcd").string());
    save_point_cloud(b, (dir / "b.pcd").string());

    SECTION("self IoU is one") {
        const CmdResult r = run("iou " + (dir / "a.pcd").string() + " " +
                                (dir / "a.pcd").string());
        REQUIRE(r.code == 0);
        CHECK(parse_kv(r.out).at("iou") == "1");
    }
    SECTION("counted overlap") {
        const CmdResult r =
            run("iou " + (dir / "a.pcd").string() + " " + (dir / "b.pcd").string());
        REQUIRE(r.code == 0);
        CHECK(std::abs(std::stod(parse_kv(r.out).at("iou")) - 1.0 / 3.0) < 1e-6);
    }
    SECTION("sample directory auto-detection") {
        const fs::path sample = dir / "sample1";
        fs::create_directories(sample);
        save_point_cloud(a, (sample / "map1.pcd").string());
        save_point_cloud(b, (sample / "map2.pcd").string());
        const CmdResult r = run("iou --sample " + sample.string());
        REQUIRE(r.code == 0);
        CHECK(std::abs(std::stod(parse_kv(r.out).at("iou")) - 1.0 / 3.0) < 1e-6);
    }
    SECTION("missing arguments is exit 2") {
        CHECK(run("iou " + (dir / "a.pcd").string()).code == 2);
    }
}

TEST_CASE("build-gt-map from a single depth pixel") {
    const fs::path dir = workspace("build_map");
    const fs::path depth_dir = dir / "depth";
    fs::create_directories(depth_dir);
    {
        std::ofstream pgm(depth_dir / "frame_0000.pgm");
        pgm << "P2\n1 1\n65535\n2000\n";  // 2 m straight ahead
    }
    Trajectory traj;
    traj.poses.emplace_back(0.0, Vec3::Zero(), Quat::Identity());
    save_trajectory(traj, (dir / "traj.txt").string());

    const std::string out_pcd = (dir / "out.pcd").string();
    const CmdResult r = run("build-gt-map " + depth_dir.string() + " " +
                            (dir / "traj.txt").string() + " " + out_pcd);
    REQUIRE(r.code == 0);
    CHECK(parse_kv(r.out).at("cells") == "1");

    const PointCloud cloud = load_point_cloud(out_pcd);
    REQUIRE(cloud.size() == 1);
    // cell center of the voxel containing (2, 0, 0)
    CHECK((cloud.points[0].xyz - Vec3(2.025, 0.025, 0.025)).norm() < 1e-9);

    SECTION("re-running produces a byte-identical file") {
        const std::string first = read_file(out_pcd);
        const CmdResult again = run("build-gt-map " + depth_dir.string() + " " +
                                    (dir / "traj.txt").string() + " " + out_pcd);
        REQUIRE(again.code == 0);
        CHECK(read_file(out_pcd) == first);
    }
    SECTION("frame/pose count mismatch is exit 2") {
        std::ofstream pgm(depth_dir / "frame_0001.pgm");
        pgm << "P2\n1 1\n65535\n1000\n";
        pgm.close();
        const CmdResult bad = run("build-gt-map " + depth_dir.string() + " " +
                                  (dir / "traj.txt").string() + " " + out_pcd);
        CHECK(bad.code == 2);
    }
}

TEST_CASE("synth generates a deterministic, perfectly-scoring bundle") {
    const fs::path dir = workspace("synth");
    {
        std::ofstream spec(dir / "spec.txt");
        spec << "room_x=1.5\nroom_y=1.2\nroom_z=1.0\nseed=5\nduration=5\n"
                "camera_width=24\ncamera_height=18\nmax_range=10\n";
    }
    const fs::path out_a = dir / "a";
    const fs::path out_b = dir / "b";
    REQUIRE(run("synth " + (dir / "spec.txt").string() + " " + out_a.string()).code == 0);
    REQUIRE(run("synth " + (dir / "spec.txt").string() + " " + out_b.string()).code == 0);

    SECTION("two runs produce identical trees") {
        const char* names[] = {"gt_traj.txt", "est_traj.txt", "gt_map.pcd", "est_map.pcd",
                               "gt_map_2d.pgm"};
        for (const char* name : names) {
            REQUIRE(fs::exists(out_a / name));
            CHECK(read_file(out_a / name) == read_file(out_b / name));
        }
    }
    SECTION("the zero-noise bundle scores perfectly") {
        const CmdResult traj = run("eval-traj " + (out_a / "gt_traj.txt").string() + " " +
                                   (out_a / "est_traj.txt").string() + " --align none");
        REQUIRE(traj.code == 0);
        CHECK(parse_kv(traj.out).at("ate") == "0");

        const CmdResult map = run(
            "eval-map " + (out_a / "gt_map.pcd").string() + " " +
            (out_a / "est_map.pcd").string() + " --gt-traj " + (out_a / "gt_traj.txt").string() +
            " --pred-traj " + (out_a / "est_traj.txt").string() +
            " --assoc both --align none --max-range 10");
        REQUIRE(map.code == 0);
        const auto kv = parse_kv(map.out);
        CHECK(kv.at("ame_nn") == "0");
        CHECK(std::stod(kv.at("ame_raycast")) <= 0.05 * std::sqrt(3.0));
        CHECK(kv.count("miss_rate") == 1);
    }
    SECTION("malformed spec is exit 2") {
        std::ofstream spec(dir / "bad.txt");
        spec << "room_x=1.5\nnot a key value line\n";
        spec.close();
        CHECK(run("synth " + (dir / "bad.txt").string() + " " + (dir / "c").string()).code == 2);
    }
}
