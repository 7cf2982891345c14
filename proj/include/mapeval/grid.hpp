#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mapeval/geometry.hpp"

namespace mapeval {

struct CellIndex {
    std::int64_t x = 0, y = 0, z = 0;
    bool operator==(const CellIndex&) const = default;
};

struct Cell2Index {
    std::int64_t x = 0, y = 0;
    bool operator==(const Cell2Index&) const = default;
};

namespace detail {

inline std::size_t mix_hash(std::size_t seed, std::int64_t v) {
    // splitmix64 step
    std::uint64_t h = static_cast<std::uint64_t>(v) + 0x9e3779b97f4a7c15ull + seed;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return static_cast<std::size_t>(h ^ (h >> 31));
}

struct CellHash {
    std::size_t operator()(const CellIndex& c) const {
        return mix_hash(mix_hash(mix_hash(0, c.x), c.y), c.z);
    }
};

struct Cell2Hash {
    std::size_t operator()(const Cell2Index& c) const {
        return mix_hash(mix_hash(0, c.x), c.y);
    }
};

}  // namespace detail

/// Sparse occupancy over a regular 3D lattice. A point p owns the cell
/// floor((p - origin) / cell_size), i.e. cells are half-open boxes
/// [k*s, (k+1)*s) per axis. Cells may carry a color; the first write wins.
class VoxelGrid {
public:
    explicit VoxelGrid(double cell_size = 0.05, const Vec3& origin = Vec3::Zero())
        : cell_size_(cell_size), origin_(origin) {
        if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
            throw InvalidInputError("voxel cell size must be positive and finite");
        }
    }

    double cell_size() const { return cell_size_; }
    const Vec3& origin() const { return origin_; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    CellIndex cell_of(const Vec3& p) const {
        return {static_cast<std::int64_t>(std::floor((p.x() - origin_.x()) / cell_size_)),
                static_cast<std::int64_t>(std::floor((p.y() - origin_.y()) / cell_size_)),
                static_cast<std::int64_t>(std::floor((p.z() - origin_.z()) / cell_size_))};
    }

    Vec3 center_of(const CellIndex& c) const {
        return origin_ + cell_size_ * Vec3(static_cast<double>(c.x) + 0.5,
                                           static_cast<double>(c.y) + 0.5,
                                           static_cast<double>(c.z) + 0.5);
    }

    bool contains(const CellIndex& c) const { return cells_.count(c) != 0; }

    void insert_cell(const CellIndex& c, std::optional<Rgb> color = std::nullopt) {
        cells_.try_emplace(c, color);
    }

    void insert_point(const Vec3& p, std::optional<Rgb> color = std::nullopt) {
        insert_cell(cell_of(p), color);
    }

    std::optional<Rgb> color_of(const CellIndex& c) const {
        auto it = cells_.find(c);
        return it == cells_.end() ? std::nullopt : it->second;
    }

    const std::unordered_map<CellIndex, std::optional<Rgb>, detail::CellHash>& cells() const {
        return cells_;
    }

    /// Occupied cells in lexicographic (x, y, z) order. Hash iteration order
    /// is unspecified, so anything written to disk goes through this.
    std::vector<CellIndex> sorted_cells() const {
        std::vector<CellIndex> out;
        out.reserve(cells_.size());
        for (const auto& [c, col] : cells_) out.push_back(c);
        std::sort(out.begin(), out.end(), [](const CellIndex& a, const CellIndex& b) {
            if (a.x != b.x) return a.x < b.x;
            if (a.y != b.y) return a.y < b.y;
            return a.z < b.z;
        });
        return out;
    }

    /// One point per occupied cell, at the cell center, carrying the cell
    /// color when present. Deterministic (sorted) order.
    PointCloud to_cloud() const {
        PointCloud cloud;
        cloud.points.reserve(cells_.size());
        for (const CellIndex& c : sorted_cells()) {
            Point3 p(center_of(c));
            p.color = cells_.at(c);
            cloud.points.push_back(p);
        }
        return cloud;
    }

private:
    double cell_size_;
    Vec3 origin_;
    std::unordered_map<CellIndex, std::optional<Rgb>, detail::CellHash> cells_;
};

/// Voxelize a point cloud: one occupied cell per covered lattice cell,
/// first point's color winning per cell.
inline VoxelGrid voxelize(const PointCloud& cloud, double cell_size = 0.05,
                          const Vec3& origin = Vec3::Zero()) {
    VoxelGrid grid(cell_size, origin);
    for (const Point3& p : cloud.points) grid.insert_point(p.xyz, p.color);
    return grid;
}

/// Boolean ground-plane projection of a voxel map. Cells are indexed from
/// the grid's own origin; width/height are the occupied bounding-box
/// extents in cells (zero for an empty grid).
class OccupancyGrid2D {
public:
    explicit OccupancyGrid2D(double cell_size = 0.05,
                             const Eigen::Vector2d& origin = Eigen::Vector2d::Zero())
        : cell_size_(cell_size), origin_(origin) {
        if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
            throw InvalidInputError("grid cell size must be positive and finite");
        }
    }

    double cell_size() const { return cell_size_; }
    const Eigen::Vector2d& origin() const { return origin_; }
    std::size_t size() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }

    void insert_cell(const Cell2Index& c) {
        cells_.insert(c);
        min_x_ = std::min(min_x_, c.x);
        min_y_ = std::min(min_y_, c.y);
        max_x_ = std::max(max_x_, c.x);
        max_y_ = std::max(max_y_, c.y);
    }

    bool contains(const Cell2Index& c) const { return cells_.count(c) != 0; }

    std::int64_t width() const { return cells_.empty() ? 0 : max_x_ - min_x_ + 1; }
    std::int64_t height() const { return cells_.empty() ? 0 : max_y_ - min_y_ + 1; }
    std::int64_t min_x() const { return cells_.empty() ? 0 : min_x_; }
    std::int64_t min_y() const { return cells_.empty() ? 0 : min_y_; }

    const std::unordered_set<Cell2Index, detail::Cell2Hash>& cells() const { return cells_; }

    /// World-lattice index of a cell, anchored to the global lattice of the
    /// same cell size at origin zero. Lets grids with different (sub-cell)
    /// origins be compared on one lattice.
    Cell2Index world_cell(const Cell2Index& c) const {
        const double wx = origin_.x() + (static_cast<double>(c.x) + 0.5) * cell_size_;
        const double wy = origin_.y() + (static_cast<double>(c.y) + 0.5) * cell_size_;
        return {static_cast<std::int64_t>(std::floor(wx / cell_size_)),
                static_cast<std::int64_t>(std::floor(wy / cell_size_))};
    }

private:
    double cell_size_;
    Eigen::Vector2d origin_;
    std::unordered_set<Cell2Index, detail::Cell2Hash> cells_;
    std::int64_t min_x_ = std::numeric_limits<std::int64_t>::max();
    std::int64_t min_y_ = std::numeric_limits<std::int64_t>::max();
    std::int64_t max_x_ = std::numeric_limits<std::int64_t>::min();
    std::int64_t max_y_ = std::numeric_limits<std::int64_t>::min();
};

}  // namespace mapeval
