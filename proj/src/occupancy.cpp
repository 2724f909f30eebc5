#include "vantage/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace vantage {

OccupancyGrid build_occupancy(const std::vector<PosedDepthImage>& images, double resolution,
                              std::pair<double, double> height_band, const GridBounds2D& bounds) {
    if (images.empty()) {
        throw ConfigError("build_occupancy: no depth images");
    }
    if (!(resolution > 0.0)) {
        throw ConfigError("build_occupancy: resolution must be positive");
    }
    if (!(bounds.min_x < bounds.max_x) || !(bounds.min_y < bounds.max_y)) {
        throw ConfigError("build_occupancy: degenerate bounds");
    }
    if (!(height_band.first < height_band.second)) {
        throw ConfigError("build_occupancy: z_min must be below z_max");
    }

    OccupancyGrid grid;
    grid.resolution = resolution;
    grid.origin_x = bounds.min_x;
    grid.origin_y = bounds.min_y;
    grid.nx = static_cast<int>(std::ceil((bounds.max_x - bounds.min_x) / resolution));
    grid.ny = static_cast<int>(std::ceil((bounds.max_y - bounds.min_y) / resolution));
    grid.z_min = height_band.first;
    grid.z_max = height_band.second;
    grid.cells.assign(static_cast<size_t>(grid.nx) * grid.ny,
                      static_cast<std::uint8_t>(CellState::Unknown));

    const std::int64_t n_images = static_cast<std::int64_t>(images.size());
#pragma omp parallel
    {
        // Per-thread grid merged at the end; merge is elementwise max, which
        // is commutative, so the result does not depend on thread count.
        std::vector<std::uint8_t> local(grid.cells.size(),
                                        static_cast<std::uint8_t>(CellState::Unknown));
#pragma omp for schedule(static) nowait
        for (std::int64_t i = 0; i < n_images; ++i) {
            const auto& obs = images[static_cast<size_t>(i)];
            const auto& K = obs.intrinsics;
            for (int r = 0; r < obs.depth.height; ++r) {
                for (int c = 0; c < obs.depth.width; ++c) {
                    const float d = obs.depth.at(r, c);
                    if (!(d > 0.0f) || !std::isfinite(d)) continue;
                    const Eigen::Vector3d p_world =
                        obs.camera * unproject_pixel(c, r, d, K);
                    if (!grid.point_in_bounds(p_world.x(), p_world.y())) continue;
                    const auto [ix, iy] = grid.cell_of(p_world.x(), p_world.y());
                    auto& cell = local[static_cast<size_t>(iy) * grid.nx + ix];
                    const bool in_band =
                        p_world.z() >= grid.z_min && p_world.z() <= grid.z_max;
                    const auto state = in_band ? CellState::Occupied : CellState::Free;
                    cell = std::max(cell, static_cast<std::uint8_t>(state));
                }
            }
        }
#pragma omp critical
        {
            for (size_t i = 0; i < grid.cells.size(); ++i) {
                grid.cells[i] = std::max(grid.cells[i], local[i]);
            }
        }
    }
    return grid;
}

CollisionQuery collision_free(const Pose2D& pose, const OccupancyGrid& grid,
                              const RobotFootprint& footprint) {
    if (!(footprint.radius > 0.0)) {
        throw ConfigError("collision_free: footprint radius must be positive");
    }
    CollisionQuery q;
    if (!grid.point_in_bounds(pose.x, pose.y)) {
        q.out_of_bounds = true;
        return q;
    }
    const double r = footprint.radius;
    // A disc extending past the mapped area touches unmapped (unknown) space.
    if (pose.x - r < grid.origin_x || pose.x + r > grid.max_x() || pose.y - r < grid.origin_y ||
        pose.y + r > grid.max_y()) {
        return q;
    }

    const auto [ix0, iy0] = grid.cell_of(pose.x - r, pose.y - r);
    const auto [ix1, iy1] = grid.cell_of(pose.x + r, pose.y + r);
    const double r2 = r * r;
    for (int iy = std::max(0, iy0); iy <= std::min(grid.ny - 1, iy1); ++iy) {
        const double cy0 = grid.origin_y + iy * grid.resolution;
        const double cy1 = cy0 + grid.resolution;
        const double dy = std::max({cy0 - pose.y, 0.0, pose.y - cy1});
        for (int ix = std::max(0, ix0); ix <= std::min(grid.nx - 1, ix1); ++ix) {
            const double cx0 = grid.origin_x + ix * grid.resolution;
            const double cx1 = cx0 + grid.resolution;
            const double dx = std::max({cx0 - pose.x, 0.0, pose.x - cx1});
            if (dx * dx + dy * dy > r2) continue; // cell does not touch the disc
            if (grid.at(ix, iy) != CellState::Free) {
                return q;
            }
        }
    }
    q.free = true;
    return q;
}

namespace {
constexpr char kGridMagic[4] = {'O', 'G', 'R', 'D'};
}

void save_grid(const OccupancyGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("save_grid: cannot open " + path.string());
    }
    out.write(kGridMagic, 4);
    const double header_d[5] = {grid.resolution, grid.origin_x, grid.origin_y, grid.z_min,
                                grid.z_max};
    out.write(reinterpret_cast<const char*>(header_d), sizeof(header_d));
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(grid.nx),
                                   static_cast<std::uint32_t>(grid.ny)};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    out.write(reinterpret_cast<const char*>(grid.cells.data()),
              static_cast<std::streamsize>(grid.cells.size()));
    if (!out) {
        throw ConfigError("save_grid: write failed for " + path.string());
    }
}

OccupancyGrid load_grid(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("grid file not found: " + path.string());
    }
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kGridMagic, 4) != 0) {
        throw ParseError("grid file has bad magic: " + path.string());
    }
    double header_d[5];
    std::uint32_t dims[2];
    in.read(reinterpret_cast<char*>(header_d), sizeof(header_d));
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!in) {
        throw ParseError("grid file truncated header: " + path.string());
    }
    OccupancyGrid grid;
    grid.resolution = header_d[0];
    grid.origin_x = header_d[1];
    grid.origin_y = header_d[2];
    grid.z_min = header_d[3];
    grid.z_max = header_d[4];
    grid.nx = static_cast<int>(dims[0]);
    grid.ny = static_cast<int>(dims[1]);
    if (!(grid.resolution > 0.0) || grid.nx <= 0 || grid.ny <= 0) {
        throw ParseError("grid file has invalid header values: " + path.string());
    }
    grid.cells.resize(static_cast<size_t>(grid.nx) * grid.ny);
    in.read(reinterpret_cast<char*>(grid.cells.data()),
            static_cast<std::streamsize>(grid.cells.size()));
    if (!in) {
        throw ParseError("grid file truncated payload: " + path.string());
    }
    for (auto c : grid.cells) {
        if (c > static_cast<std::uint8_t>(CellState::Occupied)) {
            throw ParseError("grid file has invalid cell state: " + path.string());
        }
    }
    return grid;
}

} // namespace vantage
