#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "vantage/config.hpp"
#include "vantage/descriptor.hpp"
#include "vantage/image_io.hpp"
#include "vantage/occupancy.hpp"
#include "vantage/rng.hpp"
#include "vantage/scoring.hpp"

using namespace vantage;
namespace fs = std::filesystem;

namespace {

fs::path make_temp_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_SUITE("io") {

TEST_CASE("png round trip is lossless at 8 bits") {
    Rng rng(1);
    ImageRGB img(37, 53);
    for (auto& v : img.data) {
        v = static_cast<float>(std::round(rng.uniform() * 255.0) / 255.0);
    }
    const auto path = fs::temp_directory_path() / "roundtrip.png";
    write_png(path, img);
    const ImageRGB back = read_png(path);
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    for (size_t i = 0; i < img.data.size(); ++i) {
        CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("png encode is deterministic") {
    ImageRGB img(16, 16);
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = (i % 7) / 7.0f;
    CHECK(encode_png(img) == encode_png(img));
}

TEST_CASE("png reader rejects garbage") {
    const auto path = fs::temp_directory_path() / "not_a.png";
    std::ofstream(path) << "definitely not a png";
    CHECK_THROWS_AS(read_png(path), ParseError);
    CHECK_THROWS_AS(read_png("/nonexistent.png"), ConfigError);
}

TEST_CASE("grid file round trip") {
    OccupancyGrid grid;
    grid.resolution = 0.07;
    grid.origin_x = -1.3;
    grid.origin_y = 0.4;
    grid.nx = 11;
    grid.ny = 7;
    grid.z_min = 0.15;
    grid.z_max = 1.4;
    Rng rng(2);
    grid.cells.resize(static_cast<size_t>(grid.nx) * grid.ny);
    for (auto& c : grid.cells) c = static_cast<std::uint8_t>(rng.uniform_index(3));

    const auto path = fs::temp_directory_path() / "test.grid";
    save_grid(grid, path);
    const auto back = load_grid(path);
    CHECK(back.resolution == grid.resolution);
    CHECK(back.origin_x == grid.origin_x);
    CHECK(back.origin_y == grid.origin_y);
    CHECK(back.z_min == grid.z_min);
    CHECK(back.z_max == grid.z_max);
    CHECK(back.nx == grid.nx);
    CHECK(back.ny == grid.ny);
    CHECK(back.cells == grid.cells);

    SUBCASE("bad magic is rejected") {
        std::ofstream(path, std::ios::binary) << "XXXXjunk";
        CHECK_THROWS_AS(load_grid(path), ParseError);
    }
}

TEST_CASE("descriptor file round trip and validation") {
    DescriptorTensor t;
    t.grid_h = 3;
    t.grid_w = 2;
    t.dim = 4;
    Rng rng(3);
    for (int i = 0; i < 24; ++i) t.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
    const auto path = fs::temp_directory_path() / "tensor.desc";
    save_descriptor_file(t, path);
    const auto back = load_descriptor_file(path);
    CHECK(back.grid_h == 3);
    CHECK(back.grid_w == 2);
    CHECK(back.dim == 4);
    CHECK(back.values == t.values);

    SUBCASE("truncated payload") {
        fs::resize_file(path, fs::file_size(path) - 4);
        CHECK_THROWS_AS(load_descriptor_file(path), ParseError);
    }
}

TEST_CASE("demo dataset directory loading") {
    const auto dir = make_temp_dir("vantage_dataset_test");
    PatchStatBackend backend;

    ImageRGB frame_a = ImageRGB::filled(32, 32, 0.2f, 0.3f, 0.4f);
    ImageRGB frame_b = ImageRGB::filled(32, 32, 0.8f, 0.1f, 0.1f);
    write_png(dir / "a.png", frame_a);
    write_png(dir / "b.png", frame_b);

    // One entry uses an external precomputed descriptor.
    DescriptorTensor ext = compute_descriptor(frame_b, backend);
    ext.values[0] += 0.5f; // marker so we can tell it was used verbatim
    save_descriptor_file(ext, dir / "b.desc");

    nlohmann::json index = nlohmann::json::array();
    index.push_back({{"file", "a.png"}, {"task", "close door"}});
    index.push_back({{"file", "b.png"}, {"task", nullptr}, {"desc", "b.desc"}});
    std::ofstream(dir / "index.json") << index.dump();

    const DemoDataset ds = load_demo_dataset(dir, backend);
    REQUIRE(ds.count() == 2);
    CHECK(ds.entries[0].task == std::string("close door"));
    CHECK_FALSE(ds.entries[1].task.has_value());
    CHECK(ds.entries[1].descriptor.values[0] == ext.values[0]);
    CHECK(ds.tau > 0.0);

    SUBCASE("missing index file") {
        CHECK_THROWS_AS(load_demo_dataset(dir / "nope", backend), ConfigError);
    }
}

TEST_CASE("camera config file honours the documented keys") {
    const auto path = fs::temp_directory_path() / "camera.json";
    std::ofstream(path) << R"({
        "fx": 160.0, "fy": 158.0, "cx": 112.0, "cy": 110.0,
        "width": 224, "height": 224,
        "rig_rotation": [1.0, 0.0, 0.0, 0.0],
        "rig_translation": [0.1, 0.0, 1.0]
    })";
    const CameraConfig cam = load_camera_config(path);
    CHECK(cam.intrinsics.fx == 160.0);
    CHECK(cam.intrinsics.fy == 158.0);
    CHECK(cam.intrinsics.width == 224);
    CHECK((cam.rig.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(cam.rig.translation == Eigen::Vector3d(0.1, 0.0, 1.0));

    SUBCASE("missing key") {
        std::ofstream(path) << R"({"fx": 1.0})";
        CHECK_THROWS_AS(load_camera_config(path), ParseError);
    }
}

TEST_CASE("trace jsonl round trip") {
    std::vector<ScoreResult> trace;
    ScoreResult a;
    a.pose = {1.0, -0.5, 0.3};
    a.k_id = 0.7;
    a.k_obj = 1;
    a.k_col = 1;
    a.combined = 0.7;
    trace.push_back(a);
    ScoreResult b;
    b.pose = {0.0, 0.0, 0.0};
    b.k_col = 0;
    b.id_skipped = true;
    b.per_view = {{"left", 0.2, 1}, {"right", 0.0, 0}};
    trace.push_back(b);

    const auto path = fs::temp_directory_path() / "trace.jsonl";
    write_file_atomic(path, trace_to_jsonl(trace));
    const auto back = load_trace_jsonl(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].pose.x == 1.0);
    CHECK(back[0].combined == 0.7);
    CHECK(back[1].id_skipped);
    REQUIRE(back[1].per_view.size() == 2);
    CHECK(back[1].per_view[1].view == "right");
}

TEST_CASE("run config profiles fill unset bo fields") {
    const auto dir = make_temp_dir("vantage_config_test");
    {
        std::ofstream(dir / "run.json") << R"({
            "profile": "sim",
            "cameras": {"front": {"fx": 160, "fy": 160, "cx": 112, "cy": 112,
                                   "width": 224, "height": 224,
                                   "rig_rotation": [1, 0, 0, 0],
                                   "rig_translation": [0, 0, 1]}},
            "bo": {"n_iter": 7}
        })";
    }
    const RunConfig sim = load_run_config(dir / "run.json");
    CHECK(sim.bo.n_init == 2500); // sim preset
    CHECK(sim.bo.kappa == 1.96);
    CHECK(sim.bo.n_iter == 7); // explicit value wins

    const RunConfig real = load_run_config(dir / "run.json", std::string("real"));
    CHECK(real.bo.n_init == 1000);
    CHECK(real.bo.kappa == 0.5);

    SUBCASE("missing referenced path fails at load") {
        std::ofstream(dir / "bad.json") << R"({"dataset": "missing_dir"})";
        CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
    }
    SUBCASE("unknown profile") {
        std::ofstream(dir / "p.json") << R"({"profile": "prod"})";
        CHECK_THROWS_AS(load_run_config(dir / "p.json"), ConfigError);
    }
}

TEST_CASE("atomic write leaves no partial file behind on success") {
    const auto dir = make_temp_dir("vantage_atomic_test");
    write_file_atomic(dir / "x.txt", std::string("hello"));
    CHECK(fs::exists(dir / "x.txt"));
    CHECK_FALSE(fs::exists(dir / "x.txt.tmp"));
}

} // TEST_SUITE

// CLI integration tests live in their own suite so ctest can set VANTAGE_BIN.
TEST_SUITE("cli") {

namespace {

std::string cli_bin() {
    const char* env = std::getenv("VANTAGE_BIN");
    return env ? env : "";
}

int run_cli(const std::string& args) {
    const int rc = std::system((cli_bin() + " " + args + " 2>/dev/null").c_str());
    return WEXITSTATUS(rc);
}

// A tiny synthetic scene + dataset + config for CLI runs.
fs::path prepare_workspace() {
    const auto dir = make_temp_dir("vantage_cli_test");

    std::ofstream(dir / "scene.json") << R"({
        "seed": 3,
        "background": [0.1, 0.1, 0.12],
        "primitives": [
            {"type": "box", "center": [0, 0, -0.02], "size": [4, 4, 0.04],
             "color": [0.6, 0.6, 0.6], "density": 60},
            {"type": "box", "center": [1.0, 0.0, 0.15], "size": [0.3, 0.3, 0.3],
             "color": [0.85, 0.15, 0.15], "density": 900, "object_of_interest": true}
        ]
    })";

    // Demo dataset: renders near a pose facing the object.
    SplatScene scene = synthesize_scene(load_scene_spec(dir / "scene.json"));
    ViewConfig view;
    view.intrinsics = {120.0, 120.0, 80.0, 80.0, 160, 160};
    const double pitch = 0.35;
    Eigen::Matrix3d rot;
    rot.col(0) = Eigen::Vector3d(0, -1, 0);
    rot.col(1) = Eigen::Vector3d(std::cos(pitch), 0, -std::sin(pitch))
                     .cross(Eigen::Vector3d(0, -1, 0));
    rot.col(2) = Eigen::Vector3d(std::cos(pitch), 0, -std::sin(pitch));
    view.rig = {rot, Eigen::Vector3d(0.0, 0.0, 0.8)};

    const auto dataset_dir = dir / "demos";
    fs::create_directories(dataset_dir);
    PatchStatBackend backend;
    nlohmann::json index = nlohmann::json::array();
    Rng rng(5);
    for (int i = 0; i < 6; ++i) {
        Pose2D p{0.1 + rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03),
                 rng.uniform(-0.05, 0.05)};
        const auto img = render(scene, base_to_camera(p, view.rig), view.intrinsics).rgb;
        const std::string name = "ep" + std::to_string(i) + ".png";
        write_png(dataset_dir / name, img);
        index.push_back({{"file", name}, {"task", "approach"}});
    }
    std::ofstream(dataset_dir / "index.json") << index.dump();

    const Eigen::Quaterniond q(view.rig.rotation);
    nlohmann::json run{
        {"profile", "sim"},
        {"scene_spec", "scene.json"},
        {"dataset", "demos"},
        {"grid", "scene.grid"},
        {"oracle_pose", {{"x", 0.1}, {"y", 0.0}, {"theta", 0.0}}},
        {"cameras",
         {{"front",
           {{"fx", 120.0},
            {"fy", 120.0},
            {"cx", 80.0},
            {"cy", 80.0},
            {"width", 160},
            {"height", 160},
            {"rig_rotation", {q.w(), q.x(), q.y(), q.z()}},
            {"rig_translation", {0.0, 0.0, 0.8}}}}}},
        {"occupancy", {{"resolution", 0.08}, {"sweep_poses", 16}, {"sweep_radius", 1.8}}},
        {"bo", {{"n_init", 60}, {"n_iter", 4}, {"n_batch", 4}, {"candidate_pool", 256}}},
        {"metrics",
         {{"sigmas", {0.0, 0.05, 0.1, 0.15, 0.2}},
          {"episodes_per_sigma", 400},
          {"success_model",
           {{"oracle_pose", {{"x", 0.1}, {"y", 0.0}, {"theta", 0.0}}},
            {"peak", 0.8},
            {"s_x", 0.1},
            {"s_y", 0.1},
            {"s_theta_deg", 10}}}}}};
    std::ofstream(dir / "run.json") << run.dump(2);
    return dir;
}

} // namespace

TEST_CASE("cli surface: optimize, metrics, render, score-map, error paths") {
    if (cli_bin().empty()) {
        MESSAGE("VANTAGE_BIN not set; skipping CLI tests");
        return;
    }
    const auto dir = prepare_workspace();
    const auto out = dir / "out";

    SUBCASE("optimize writes trace, summary, and score map; exit 0") {
        const int rc = run_cli("optimize --config " + (dir / "run.json").string() + " --seed 0 --out " +
                               out.string());
        REQUIRE(rc == 0);
        CHECK(fs::exists(out / "trace.jsonl"));
        CHECK(fs::exists(out / "summary.json"));
        CHECK(fs::exists(out / "score_map.png"));
        CHECK(fs::exists(dir / "scene.grid")); // built on the fly and saved

        // score-map from the written trace reproduces an image.
        const int rc2 = run_cli("score-map --config " + (dir / "run.json").string() +
                                " --trace " + (out / "trace.jsonl").string() + " --out " +
                                (dir / "out2").string());
        CHECK(rc2 == 0);
        CHECK(fs::exists(dir / "out2" / "score_map.png"));
    }

    SUBCASE("metrics emits feasibility artifacts") {
        const int rc = run_cli("metrics --config " + (dir / "run.json").string() + " --seed 1 --out " +
                               (dir / "mout").string());
        REQUIRE(rc == 0);
        CHECK(fs::exists(dir / "mout" / "feasibility.json"));
        CHECK(fs::exists(dir / "mout" / "decay_curve.json"));
        std::ifstream in(dir / "mout" / "feasibility.json");
        nlohmann::json j;
        in >> j;
        CHECK(j.contains("decay"));
        const double phi = j["decay"]["phi"].get<double>();
        const double gamma = j["decay"]["gamma"].get<double>();
        CHECK(phi * gamma == doctest::Approx(M_LN2).epsilon(1e-12));
        CHECK(j.contains("visual"));
    }

    SUBCASE("render writes rgb and depth") {
        const int rc = run_cli("render --config " + (dir / "run.json").string() +
                               " --pose -0.5,0,0 --out " + (dir / "rout").string());
        REQUIRE(rc == 0);
        CHECK(fs::exists(dir / "rout" / "rgb.png"));
        CHECK(fs::exists(dir / "rout" / "depth.png"));
    }

    SUBCASE("missing dataset path exits 2") {
        std::ofstream(dir / "broken.json") << R"({"dataset": "not_there"})";
        const int rc = run_cli("optimize --config " + (dir / "broken.json").string());
        CHECK(rc == 2);
    }

    SUBCASE("missing config exits 2") {
        const int rc = run_cli("optimize --config /definitely/not/here.json");
        CHECK(rc == 2);
    }
}

} // TEST_SUITE
