#include "vantage/config.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

namespace vantage {

namespace {

using nlohmann::json;

Pose2D pose_from_json(const json& j) {
    return Pose2D{j.at("x").get<double>(), j.at("y").get<double>(),
                  j.value("theta", 0.0)};
}

CameraConfig camera_from_json(const json& j) {
    CameraConfig cam;
    cam.intrinsics.fx = j.at("fx").get<double>();
    cam.intrinsics.fy = j.at("fy").get<double>();
    cam.intrinsics.cx = j.at("cx").get<double>();
    cam.intrinsics.cy = j.at("cy").get<double>();
    cam.intrinsics.width = j.at("width").get<int>();
    cam.intrinsics.height = j.at("height").get<int>();
    cam.intrinsics.validate();
    const auto q = j.at("rig_rotation").get<std::vector<double>>();
    const auto t = j.at("rig_translation").get<std::vector<double>>();
    if (q.size() != 4 || t.size() != 3) {
        throw ParseError("camera: rig_rotation needs 4 values (wxyz), rig_translation needs 3");
    }
    cam.rig = se3_from_quat_wxyz(q[0], q[1], q[2], q[3], {t[0], t[1], t[2]});
    return cam;
}

BOConfig::Dim dim_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw ParseError("bo bounds must be [lo, hi] arrays");
    }
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base / path;
}

void require_exists(const std::filesystem::path& p, const char* what) {
    if (!std::filesystem::exists(p)) {
        throw ConfigError(std::string(what) + " not found: " + p.string());
    }
}

} // namespace

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::optional<std::string>& profile_override) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config not found: " + path.string());
    }
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }

    RunConfig cfg;
    cfg.base_dir = path.parent_path();
    try {
        cfg.profile = profile_override.value_or(j.value("profile", std::string("sim")));
        if (cfg.profile != "sim" && cfg.profile != "real") {
            throw ConfigError("profile must be 'sim' or 'real', got '" + cfg.profile + "'");
        }
        cfg.bo = cfg.profile == "sim" ? BOConfig::sim_profile() : BOConfig::real_profile();

        if (j.contains("scene")) {
            cfg.scene_ply = resolve(cfg.base_dir, j.at("scene").get<std::string>());
            require_exists(*cfg.scene_ply, "scene");
        }
        if (j.contains("scene_spec")) {
            cfg.scene_spec = resolve(cfg.base_dir, j.at("scene_spec").get<std::string>());
            require_exists(*cfg.scene_spec, "scene spec");
        }
        if (j.contains("dataset")) {
            cfg.dataset_dir = resolve(cfg.base_dir, j.at("dataset").get<std::string>());
            require_exists(*cfg.dataset_dir, "dataset");
        }
        if (j.contains("grid")) {
            // May be built on the fly, so existence is optional here.
            cfg.grid_path = resolve(cfg.base_dir, j.at("grid").get<std::string>());
        }
        if (j.contains("object_region")) {
            Aabb region;
            const auto& r = j.at("object_region");
            for (int i = 0; i < 3; ++i) {
                region.min[i] = r.at("min").at(i).get<double>();
                region.max[i] = r.at("max").at(i).get<double>();
            }
            cfg.object_region = region;
        }
        if (j.contains("oracle_pose")) {
            cfg.oracle_pose = pose_from_json(j.at("oracle_pose"));
        }

        if (j.contains("cameras")) {
            for (const auto& [name, value] : j.at("cameras").items()) {
                if (value.is_string()) {
                    cfg.cameras[name] =
                        load_camera_config(resolve(cfg.base_dir, value.get<std::string>()));
                } else {
                    cfg.cameras[name] = camera_from_json(value);
                }
            }
        }
        if (j.contains("views")) {
            cfg.views = j.at("views").get<std::vector<std::string>>();
        } else {
            for (const auto& [name, cam] : cfg.cameras) cfg.views.push_back(name);
        }
        for (const auto& v : cfg.views) {
            if (!cfg.cameras.count(v)) {
                throw ConfigError("view '" + v + "' has no camera definition");
            }
        }

        if (j.contains("scoring")) {
            const auto& s = j.at("scoring");
            cfg.scoring.knn_k = s.value("knn_k", cfg.scoring.knn_k);
            cfg.scoring.min_pixels = s.value("min_pixels", cfg.scoring.min_pixels);
            cfg.scoring.object_query = s.value("object_query", cfg.scoring.object_query);
            if (s.contains("task") && !s.at("task").is_null()) {
                cfg.scoring.task = s.at("task").get<std::string>();
            }
            cfg.scoring.evaluate_gated_id =
                s.value("evaluate_gated_id", cfg.scoring.evaluate_gated_id);
        }

        if (j.contains("occupancy")) {
            const auto& o = j.at("occupancy");
            cfg.occupancy.resolution = o.value("resolution", cfg.occupancy.resolution);
            cfg.occupancy.z_min = o.value("z_min", cfg.occupancy.z_min);
            cfg.occupancy.z_max = o.value("z_max", cfg.occupancy.z_max);
            cfg.occupancy.footprint_radius =
                o.value("footprint_radius", cfg.occupancy.footprint_radius);
            cfg.occupancy.sweep_poses = o.value("sweep_poses", cfg.occupancy.sweep_poses);
            cfg.occupancy.sweep_radius = o.value("sweep_radius", cfg.occupancy.sweep_radius);
            cfg.occupancy.margin = o.value("margin", cfg.occupancy.margin);
        }

        if (j.contains("bo")) {
            const auto& b = j.at("bo");
            cfg.bo.n_init = b.value("n_init", cfg.bo.n_init);
            cfg.bo.n_iter = b.value("n_iter", cfg.bo.n_iter);
            cfg.bo.n_batch = b.value("n_batch", cfg.bo.n_batch);
            cfg.bo.kappa = b.value("kappa", cfg.bo.kappa);
            cfg.bo.candidate_pool = b.value("candidate_pool", cfg.bo.candidate_pool);
            cfg.bo.max_gp_observations =
                b.value("max_gp_observations", cfg.bo.max_gp_observations);
            cfg.bo.optimize_height = b.value("optimize_height", cfg.bo.optimize_height);
            if (b.contains("x_bounds") && b.contains("y_bounds")) {
                cfg.bo.x_bounds = dim_from_json(b.at("x_bounds"));
                cfg.bo.y_bounds = dim_from_json(b.at("y_bounds"));
                cfg.bo_bounds_set = true;
            } else if (b.contains("x_bounds") || b.contains("y_bounds")) {
                throw ConfigError("bo: x_bounds and y_bounds must be given together");
            }
            if (b.contains("theta_bounds")) {
                cfg.bo.theta_bounds = dim_from_json(b.at("theta_bounds"));
            }
            if (b.contains("height_bounds")) {
                cfg.bo.height_bounds = dim_from_json(b.at("height_bounds"));
            }
            if (b.contains("exclusion_zones")) {
                for (const auto& z : b.at("exclusion_zones")) {
                    ExclusionZone zone;
                    zone.center = pose_from_json(z);
                    zone.radius = z.at("radius").get<double>();
                    cfg.bo.exclusion_zones.push_back(zone);
                }
            }
            if (b.contains("seed")) cfg.bo.seed = b.at("seed").get<std::uint64_t>();
            if (b.contains("gp")) {
                const auto& g = b.at("gp");
                cfg.bo.gp.signal_variance = g.value("signal_variance", cfg.bo.gp.signal_variance);
                cfg.bo.gp.length_scale = g.value("length_scale", cfg.bo.gp.length_scale);
                cfg.bo.gp.noise_variance = g.value("noise_variance", cfg.bo.gp.noise_variance);
            }
        }

        if (j.contains("metrics")) {
            const auto& m = j.at("metrics");
            if (m.contains("decay_samples")) {
                cfg.metrics.decay_samples =
                    resolve(cfg.base_dir, m.at("decay_samples").get<std::string>());
                require_exists(*cfg.metrics.decay_samples, "decay samples file");
            }
            if (m.contains("sigmas")) {
                cfg.metrics.sigmas = m.at("sigmas").get<std::vector<double>>();
            }
            cfg.metrics.episodes_per_sigma =
                m.value("episodes_per_sigma", cfg.metrics.episodes_per_sigma);
            if (m.contains("success_model")) {
                const auto& s = m.at("success_model");
                SuccessModel model;
                model.oracle_pose = pose_from_json(s.at("oracle_pose"));
                model.peak = s.value("peak", model.peak);
                model.s_x = s.value("s_x", model.s_x);
                model.s_y = s.value("s_y", model.s_y);
                if (s.contains("s_theta_deg")) {
                    model.s_theta = s.at("s_theta_deg").get<double>() * M_PI / 180.0;
                }
                cfg.metrics.success_model = model;
            }
            cfg.metrics.n_views = m.value("n_views", cfg.metrics.n_views);
            cfg.metrics.view_radius = m.value("view_radius", cfg.metrics.view_radius);
            if (m.contains("view_heading_deg")) {
                cfg.metrics.view_heading = m.at("view_heading_deg").get<double>() * M_PI / 180.0;
            }
        }

        if (j.contains("harness")) {
            const auto& h = j.at("harness");
            cfg.harness.n_scenes = h.value("n_scenes", cfg.harness.n_scenes);
            cfg.harness.n_seeds = h.value("n_seeds", cfg.harness.n_seeds);
            cfg.harness.episodes_per_scene =
                h.value("episodes_per_scene", cfg.harness.episodes_per_scene);
            if (h.contains("methods")) {
                cfg.harness.methods = h.at("methods").get<std::vector<std::string>>();
            }
        }
    } catch (const json::exception& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
    return cfg;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw ConfigError("cannot open for writing: " + tmp);
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) {
            std::filesystem::remove(tmp);
            throw ConfigError("write failed: " + tmp);
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::vector<std::uint8_t>& bytes) {
    write_file_atomic(path,
                      std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

} // namespace vantage
