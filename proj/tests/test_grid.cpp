#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mapeval/grid.hpp"

using namespace mapeval;

TEST_CASE("cell ownership uses half-open intervals") {
    VoxelGrid g(0.05);
    CHECK(g.cell_of(Vec3(0.0, 0.0, 0.0)) == CellIndex{0, 0, 0});
    CHECK(g.cell_of(Vec3(0.049, 0.0, 0.0)) == CellIndex{0, 0, 0});
    CHECK(g.cell_of(Vec3(0.05, 0.0, 0.0)) == CellIndex{1, 0, 0});  // boundary goes up
    CHECK(g.cell_of(Vec3(-0.01, 0.0, 0.0)) == CellIndex{-1, 0, 0});
}

TEST_CASE("voxel grid rejects bad cell size") {
    CHECK_THROWS_AS(VoxelGrid(0.0), InvalidInputError);
    CHECK_THROWS_AS(VoxelGrid(-1.0), InvalidInputError);
}

TEST_CASE("re-voxelizing cell centers reproduces the occupied set") {
    std::mt19937 rng(21);
    std::uniform_real_distribution<double> u(-8.0, 8.0);
    PointCloud cloud;
    for (int i = 0; i < 2000; ++i) cloud.points.emplace_back(u(rng), u(rng), u(rng));

    const VoxelGrid grid = voxelize(cloud, 0.05);
    const VoxelGrid again = voxelize(grid.to_cloud(), 0.05);
    REQUIRE(again.size() == grid.size());
    for (const auto& [c, color] : grid.cells()) CHECK(again.contains(c));
}

TEST_CASE("per-cell color is first write wins") {
    VoxelGrid g(0.1);
    g.insert_point(Vec3(0.01, 0.01, 0.01), Rgb{255, 0, 0});
    g.insert_point(Vec3(0.02, 0.02, 0.02), Rgb{0, 255, 0});
    REQUIRE(g.size() == 1);
    CHECK(g.color_of(g.cell_of(Vec3(0.01, 0.01, 0.01))) == Rgb{255, 0, 0});
}

TEST_CASE("sorted cells come back in lexicographic order") {
    VoxelGrid g(1.0);
    g.insert_cell({2, 0, 0});
    g.insert_cell({0, 3, 1});
    g.insert_cell({0, 3, 0});
    g.insert_cell({-1, 5, 5});
    const auto cells = g.sorted_cells();
    REQUIRE(cells.size() == 4);
    CHECK(cells[0] == CellIndex{-1, 5, 5});
    CHECK(cells[1] == CellIndex{0, 3, 0});
    CHECK(cells[2] == CellIndex{0, 3, 1});
    CHECK(cells[3] == CellIndex{2, 0, 0});
}

TEST_CASE("2D grid tracks bounding-box extents") {
    OccupancyGrid2D g(0.05);
    CHECK(g.width() == 0);
    CHECK(g.height() == 0);
    g.insert_cell({3, 4});
    CHECK(g.width() == 1);
    CHECK(g.height() == 1);
    g.insert_cell({5, -2});
    CHECK(g.width() == 3);   // x in [3, 5]
    CHECK(g.height() == 7);  // y in [-2, 4]
    CHECK(static_cast<std::size_t>(g.width() * g.height()) >= g.size());
}

TEST_CASE("world cell re-anchoring aligns shifted origins") {
    OccupancyGrid2D a(0.05, {0.0, 0.0});
    OccupancyGrid2D b(0.05, {0.25, 0.0});  // 5 cells over
    a.insert_cell({5, 0});
    b.insert_cell({0, 0});
    CHECK(a.world_cell({5, 0}) == b.world_cell({0, 0}));
}
