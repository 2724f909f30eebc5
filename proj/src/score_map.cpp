#include "vantage/score_map.hpp"

#include <algorithm>
#include <cmath>

namespace vantage {

void rainbow_color(double value, float rgb[3]) {
    const double v = std::clamp(value, 0.0, 1.0);
    rgb[0] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0));
    rgb[1] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0));
    rgb[2] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0));
}

namespace {

struct Canvas {
    ImageRGB image;
    const OccupancyGrid* grid;
    int scale;

    double px(double x) const { return (x - grid->origin_x) / grid->resolution * scale; }
    double py(double y) const {
        return image.height - (y - grid->origin_y) / grid->resolution * scale;
    }

    void set(int r, int c, const float rgb[3]) {
        if (r < 0 || r >= image.height || c < 0 || c >= image.width) return;
        float* p = image.px(r, c);
        p[0] = rgb[0];
        p[1] = rgb[1];
        p[2] = rgb[2];
    }

    void blob(int r, int c, const float rgb[3]) {
        for (int dr = -1; dr <= 1; ++dr) {
            for (int dc = -1; dc <= 1; ++dc) set(r + dr, c + dc, rgb);
        }
    }

    void line(double x0, double y0, double x1, double y1, const float rgb[3]) {
        const double len = std::hypot(x1 - x0, y1 - y0);
        const int steps = std::max(1, static_cast<int>(std::ceil(len)));
        for (int i = 0; i <= steps; ++i) {
            const double t = static_cast<double>(i) / steps;
            set(static_cast<int>(std::lround(y0 + (y1 - y0) * t)),
                static_cast<int>(std::lround(x0 + (x1 - x0) * t)), rgb);
        }
    }

    void arrow(const Pose2D& pose, const float rgb[3]) {
        const double arrow_len_m = 0.30;
        const double x0 = px(pose.x);
        const double y0 = py(pose.y);
        const double x1 = px(pose.x + arrow_len_m * std::cos(pose.theta));
        const double y1 = py(pose.y + arrow_len_m * std::sin(pose.theta));
        line(x0, y0, x1, y1, rgb);
        // Head barbs.
        const double heading = std::atan2(y1 - y0, x1 - x0);
        const double barb = 0.35 * std::hypot(x1 - x0, y1 - y0);
        for (double side : {2.5, -2.5}) {
            line(x1, y1, x1 + barb * std::cos(heading + side), y1 + barb * std::sin(heading + side),
                 rgb);
        }
        blob(static_cast<int>(std::lround(y0)), static_cast<int>(std::lround(x0)), rgb);
    }
};

} // namespace

ImageRGB emit_score_map(const std::vector<ScoreResult>& trace, const OccupancyGrid& grid,
                        const std::optional<Pose2D>& oracle, const std::optional<Pose2D>& start) {
    if (trace.empty()) {
        throw ConfigError("emit_score_map: empty trace");
    }
    bool any_inside = false;
    for (const auto& r : trace) {
        if (grid.point_in_bounds(r.pose.x, r.pose.y)) {
            any_inside = true;
            break;
        }
    }
    if (!any_inside) {
        throw ConfigError("emit_score_map: trace/grid frame mismatch (no pose inside the grid)");
    }

    Canvas canvas;
    canvas.grid = &grid;
    canvas.scale = std::max(1, 512 / std::max(grid.nx, grid.ny));
    canvas.image = ImageRGB(grid.ny * canvas.scale, grid.nx * canvas.scale);

    using namespace score_map_colors;
    for (int iy = 0; iy < grid.ny; ++iy) {
        for (int ix = 0; ix < grid.nx; ++ix) {
            const float* rgb = kUnknown;
            if (grid.at(ix, iy) == CellState::Free) rgb = kFree;
            else if (grid.at(ix, iy) == CellState::Occupied) rgb = kOccupied;
            const int r0 = (grid.ny - 1 - iy) * canvas.scale;
            const int c0 = ix * canvas.scale;
            for (int r = r0; r < r0 + canvas.scale; ++r) {
                for (int c = c0; c < c0 + canvas.scale; ++c) canvas.set(r, c, rgb);
            }
        }
    }

    for (const auto& result : trace) {
        float rgb[3];
        if (result.k_col == 0) {
            std::copy(kCollision, kCollision + 3, rgb);
        } else if (result.k_obj == 0) {
            std::copy(kNoObject, kNoObject + 3, rgb);
        } else {
            rainbow_color(result.k_id, rgb);
        }
        canvas.arrow(result.pose, rgb);
    }
    if (start) canvas.arrow(*start, kStart);
    if (oracle) canvas.arrow(*oracle, kOracle);
    return canvas.image;
}

} // namespace vantage
