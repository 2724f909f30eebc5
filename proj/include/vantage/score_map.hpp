#pragma once

#include <optional>
#include <vector>

#include "vantage/image.hpp"
#include "vantage/occupancy.hpp"
#include "vantage/scoring.hpp"

namespace vantage {

/// Fixed score-map palette (RGB in [0, 1]).
namespace score_map_colors {
inline constexpr float kFree[3] = {1.0f, 1.0f, 1.0f};
inline constexpr float kOccupied[3] = {0.5f, 0.5f, 0.5f};
inline constexpr float kUnknown[3] = {0.86f, 0.86f, 0.86f};
inline constexpr float kCollision[3] = {1.0f, 105.0f / 255.0f, 180.0f / 255.0f}; // pink
inline constexpr float kNoObject[3] = {0.0f, 0.0f, 0.0f};                        // black
inline constexpr float kOracle[3] = {139.0f / 255.0f, 0.0f, 0.0f};               // dark red
inline constexpr float kStart[3] = {0.0f, 100.0f / 255.0f, 0.0f};                // dark green
} // namespace score_map_colors

/// Classic rainbow (jet) map over [0, 1].
void rainbow_color(double value, float rgb[3]);

/// Top-down visualization: occupancy background (free white, occupied gray,
/// unknown light gray), evaluated poses as arrows (pink when the collision
/// gate failed, black when the object was not in view, rainbow over k_id
/// otherwise), optional oracle (dark red) and start (dark green) poses.
/// Deterministic layout. Throws when the trace is empty or lies entirely
/// outside the grid (frame mismatch).
ImageRGB emit_score_map(const std::vector<ScoreResult>& trace, const OccupancyGrid& grid,
                        const std::optional<Pose2D>& oracle = std::nullopt,
                        const std::optional<Pose2D>& start = std::nullopt);

} // namespace vantage
