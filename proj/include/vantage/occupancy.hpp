#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "vantage/geometry.hpp"
#include "vantage/image.hpp"

namespace vantage {

/// Cell priority is encoded in the value: Occupied beats Free beats Unknown,
/// so merging observations is an elementwise max.
enum class CellState : std::uint8_t { Unknown = 0, Free = 1, Occupied = 2 };

struct OccupancyGrid {
    double resolution = 0.05;      // meters per cell
    double origin_x = 0.0;         // world coords of cell (0, 0) corner
    double origin_y = 0.0;
    int nx = 0;
    int ny = 0;
    double z_min = 0.1;            // height band considered an obstacle
    double z_max = 1.6;
    std::vector<std::uint8_t> cells; // nx * ny, x-major within a row of y

    CellState at(int ix, int iy) const {
        return static_cast<CellState>(cells[static_cast<size_t>(iy) * nx + ix]);
    }
    void set(int ix, int iy, CellState s) {
        auto& c = cells[static_cast<size_t>(iy) * nx + ix];
        c = std::max(c, static_cast<std::uint8_t>(s));
    }
    bool cell_in_bounds(int ix, int iy) const { return ix >= 0 && ix < nx && iy >= 0 && iy < ny; }
    bool point_in_bounds(double x, double y) const {
        return x >= origin_x && x < origin_x + nx * resolution && y >= origin_y &&
               y < origin_y + ny * resolution;
    }
    std::pair<int, int> cell_of(double x, double y) const {
        return {static_cast<int>(std::floor((x - origin_x) / resolution)),
                static_cast<int>(std::floor((y - origin_y) / resolution))};
    }
    double max_x() const { return origin_x + nx * resolution; }
    double max_y() const { return origin_y + ny * resolution; }
};

struct RobotFootprint {
    double radius = 0.35;
};

struct GridBounds2D {
    double min_x = 0.0, min_y = 0.0, max_x = 0.0, max_y = 0.0;
};

struct PosedDepthImage {
    ImageDepth depth;
    RigidTransformSE3 camera; // camera pose in world frame
    CameraIntrinsics intrinsics;
};

/// Unproject every valid depth pixel to the world frame and bin into cells:
/// a point inside the height band marks its cell Occupied, a point outside
/// the band marks it Free (unless already Occupied), untouched cells stay
/// Unknown. Order-invariant over input images.
OccupancyGrid build_occupancy(const std::vector<PosedDepthImage>& images, double resolution,
                              std::pair<double, double> height_band, const GridBounds2D& bounds);

struct CollisionQuery {
    bool free = false;
    bool out_of_bounds = false;
};

/// 1 iff every cell intersecting the footprint disc is Free. Unknown counts
/// as blocked; a disc extending past the grid is blocked. Heading-invariant.
CollisionQuery collision_free(const Pose2D& pose, const OccupancyGrid& grid,
                              const RobotFootprint& footprint);

/// Portable grid file: "OGRD", doubles (resolution, origin, band), uint32
/// dims, then one byte per cell.
void save_grid(const OccupancyGrid& grid, const std::filesystem::path& path);
OccupancyGrid load_grid(const std::filesystem::path& path);

} // namespace vantage
