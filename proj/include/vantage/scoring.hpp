#pragma once

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vantage/descriptor.hpp"
#include "vantage/geometry.hpp"
#include "vantage/occupancy.hpp"
#include "vantage/splat.hpp"

namespace vantage {

/// Decides whether the task object is visible in a rendered view.
class VisibilityBackend {
public:
    virtual ~VisibilityBackend() = default;
    virtual std::string name() const = 0;
    virtual std::string object_query() const = 0;
    virtual bool visible(const RenderResult& view) const = 0;
};

/// Reference backend: thresholds the render's tagged-object weight channel at
/// 0.5 into a mask (resized to 224x224) and reports visible when the mask
/// covers at least min_pixels pixels. Requires a scene with a tagged object.
class MaskVisibilityBackend final : public VisibilityBackend {
public:
    explicit MaskVisibilityBackend(std::string query = "object", int min_pixels = 50)
        : query_(std::move(query)), min_pixels_(min_pixels) {}

    std::string name() const override { return "mask"; }
    std::string object_query() const override { return query_; }
    int min_pixels() const { return min_pixels_; }
    bool visible(const RenderResult& view) const override;

private:
    std::string query_;
    int min_pixels_;
};

/// Hook for an out-of-process detector: the view is written as a PNG and the
/// command is run as `command <png-path> <query>`; stdout containing "yes"
/// counts as visible. No client ships with the toolkit.
class ExternalVisibilityBackend final : public VisibilityBackend {
public:
    ExternalVisibilityBackend(std::string command, std::string query)
        : command_(std::move(command)), query_(std::move(query)) {}

    std::string name() const override { return "external"; }
    std::string object_query() const override { return query_; }
    bool visible(const RenderResult& view) const override;

private:
    std::string command_;
    std::string query_;
};

struct ViewConfig {
    std::string name = "default";
    RigidTransformSE3 rig;
    CameraIntrinsics intrinsics;
};

struct ViewScore {
    std::string view;
    double k_id = 0.0;
    int k_obj = 0;
};

struct ScoreResult {
    Pose2D pose;
    double height = 0.0;
    double k_id = 0.0;
    int k_obj = 0;
    int k_col = 0;
    double combined = 0.0;
    bool id_skipped = false;
    std::vector<ViewScore> per_view;
};

nlohmann::json score_result_to_json(const ScoreResult& r);
ScoreResult score_result_from_json(const nlohmann::json& j);

/// Trace files are JSON-lines, one ScoreResult per line.
std::string trace_to_jsonl(const std::vector<ScoreResult>& trace);
std::vector<ScoreResult> load_trace_jsonl(const std::filesystem::path& path);

/// Everything needed to score a pose. All referenced objects are immutable
/// during scoring, so poses may be evaluated concurrently.
struct ScoringContext {
    const SplatScene* scene = nullptr;
    const OccupancyGrid* grid = nullptr;
    RobotFootprint footprint;
    const DemoDataset* dataset = nullptr;
    const DescriptorBackend* descriptor = nullptr;
    const VisibilityBackend* visibility = nullptr;
    std::vector<ViewConfig> views;
    int knn_k = 5;
    double height_offset = 0.0;
    /// When set, gated sub-scores are evaluated anyway (diagnostics only;
    /// the combined score is unchanged).
    bool evaluate_gated_id = false;

    void validate() const;
};

/// Binary visibility check for one camera pose (renders internally).
int object_visible(const SplatScene& scene, const RigidTransformSE3& cam,
                   const CameraIntrinsics& K, const VisibilityBackend& backend);

/// Hybrid pose score: k_id gated by object visibility and collision. Gates
/// are evaluated cheapest-first (collision, then visibility); a gated k_id is
/// recorded as 0 and flagged id_skipped.
ScoreResult hybrid_score(const Pose2D& pose, const ScoringContext& ctx);
ScoreResult hybrid_score(const Pose2D& pose, const ScoringContext& ctx, double height_offset);

/// Multi-camera variant (requires >= 2 views): per view compute (k_id, k_obj),
/// take the max of the gated per-view values, then compose with the shared
/// collision gate.
ScoreResult hybrid_score_multiview(const Pose2D& pose, const ScoringContext& ctx);
ScoreResult hybrid_score_multiview(const Pose2D& pose, const ScoringContext& ctx,
                                   double height_offset);

/// Sub-dataset whose task labels equal the query exactly. Errors when the
/// result would be empty.
DemoDataset filter_dataset_by_task(const DemoDataset& dataset, const std::string& task);

struct SweepOptions {
    int n_poses = 36;
    double radius = 0.0; // 0: derived from scene bounds
    double resolution = 0.05;
    double z_min = 0.1;
    double z_max = 1.6;
    double margin = 0.5; // grid margin beyond scene bounds, meters
};

/// Build an occupancy grid by rendering depth from a ring of poses around the
/// scene center (stand-in for mapping-run depth data).
OccupancyGrid build_occupancy_from_scene(const SplatScene& scene, const ViewConfig& view,
                                         const SweepOptions& options);

} // namespace vantage
