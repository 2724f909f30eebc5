#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vantage/bopt.hpp"
#include "vantage/geometry.hpp"
#include "vantage/harness.hpp"
#include "vantage/scoring.hpp"

namespace vantage {

struct ScoringOptions {
    int knn_k = 5;
    int min_pixels = 50;
    std::string object_query = "object";
    std::optional<std::string> task;
    bool evaluate_gated_id = false;
};

struct OccupancyOptions {
    double resolution = 0.05;
    double z_min = 0.1;
    double z_max = 1.6;
    double footprint_radius = 0.35;
    int sweep_poses = 36;
    double sweep_radius = 0.0; // 0: derived from scene bounds
    double margin = 0.5;
};

struct MetricsOptions {
    std::optional<std::filesystem::path> decay_samples;
    std::vector<double> sigmas;
    int episodes_per_sigma = 150;
    std::optional<SuccessModel> success_model;
    int n_views = 10;
    double view_radius = 0.1;                      // near-optimal pose sampling, meters
    double view_heading = 10.0 * M_PI / 180.0;     // radians
};

struct HarnessOptions {
    int n_scenes = 10;
    int n_seeds = 3;
    int episodes_per_scene = 5;
    std::vector<std::string> methods = {"ours", "naive", "stay", "oracle"};
};

struct RunConfig {
    std::string profile = "sim"; // "sim" | "real"
    std::optional<std::filesystem::path> scene_ply;
    std::optional<std::filesystem::path> scene_spec;
    std::optional<std::filesystem::path> dataset_dir;
    std::optional<std::filesystem::path> grid_path;
    std::optional<Aabb> object_region;
    std::map<std::string, CameraConfig> cameras; // name -> camera
    std::vector<std::string> views;              // selected camera names, in order
    std::optional<Pose2D> oracle_pose;
    ScoringOptions scoring;
    OccupancyOptions occupancy;
    BOConfig bo;             // profile preset overlaid with explicit fields
    bool bo_bounds_set = false;
    MetricsOptions metrics;
    HarnessOptions harness;
    std::filesystem::path base_dir; // for resolving relative paths
};

/// Parse a run config. Profile presets (sim: N_init=2500, kappa=1.96;
/// real: N_init=1000, kappa=0.5) fill BO fields the file leaves unset.
/// Referenced paths must exist.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::optional<std::string>& profile_override = std::nullopt);

/// Write a file atomically (temp file + rename); partial artifacts are never
/// left behind on error paths.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes);

} // namespace vantage
