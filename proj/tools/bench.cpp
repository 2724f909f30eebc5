// Benchmark: OpenMP render kernel against the serial reference renderer, and
// the parallel occupancy build against a single-thread run. Verifies that the
// parallel paths produce identical output.

#include <chrono>
#include <cstdio>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vantage/occupancy.hpp"
#include "vantage/scoring.hpp"
#include "vantage/splat.hpp"

using namespace vantage;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

SplatScene make_scene(double density_scale) {
    SceneSpec spec;
    spec.seed = 7;
    spec.background = {0.1f, 0.1f, 0.1f};

    PrimitiveSpec floor;
    floor.center = {0.0, 0.0, -0.02};
    floor.size = {4.0, 4.0, 0.04};
    floor.color = {0.6f, 0.6f, 0.6f};
    floor.density = 150.0 * density_scale;
    spec.primitives.push_back(floor);

    PrimitiveSpec box;
    box.center = {0.8, 0.2, 0.3};
    box.size = {0.6, 0.6, 0.6};
    box.color = {0.8f, 0.2f, 0.2f};
    box.density = 1200.0 * density_scale;
    box.object_of_interest = true;
    spec.primitives.push_back(box);

    PrimitiveSpec ball;
    ball.type = PrimitiveSpec::Type::Sphere;
    ball.center = {-0.6, -0.4, 0.25};
    ball.radius = 0.25;
    ball.color = {0.2f, 0.4f, 0.9f};
    ball.density = 1500.0 * density_scale;
    spec.primitives.push_back(ball);

    return synthesize_scene(spec);
}

double max_abs_diff(const ImageRGB& a, const ImageRGB& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        m = std::max(m, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
    }
    return m;
}

ViewConfig bench_view(int size) {
    ViewConfig view;
    const double f = 0.7 * size;
    view.intrinsics = {f, f, size / 2.0, size / 2.0, size, size};
    const double pitch = 0.45;
    const Eigen::Vector3d right(0.0, -1.0, 0.0);
    const Eigen::Vector3d forward(std::cos(pitch), 0.0, -std::sin(pitch));
    Eigen::Matrix3d rot;
    rot.col(0) = right;
    rot.col(1) = forward.cross(right);
    rot.col(2) = forward;
    view.rig = {rot, Eigen::Vector3d(0.0, 0.0, 1.2)};
    return view;
}

} // namespace

int main(int argc, char** argv) {
    double density_scale = 1.0;
    int repeats = 5;
    if (argc > 1) density_scale = std::atof(argv[1]);
    if (argc > 2) repeats = std::atoi(argv[2]);

    const SplatScene scene = make_scene(density_scale);
    std::printf("scene: %zu gaussians\n", scene.size());

#ifdef _OPENMP
    const int max_threads = omp_get_max_threads();
#else
    const int max_threads = 1;
#endif

    for (int size : {256, 512}) {
        const ViewConfig view = bench_view(size);
        const Pose2D pose{-2.0, 0.0, 0.0};
        const auto cam = base_to_camera(pose, view.rig);

        const double t0 = now_ms();
        RenderResult ref;
        for (int i = 0; i < repeats; ++i) ref = render_reference(scene, cam, view.intrinsics);
        const double t_ref = (now_ms() - t0) / repeats;

#ifdef _OPENMP
        omp_set_num_threads(1);
#endif
        const double t1 = now_ms();
        RenderResult serial;
        for (int i = 0; i < repeats; ++i) serial = render(scene, cam, view.intrinsics);
        const double t_serial = (now_ms() - t1) / repeats;

#ifdef _OPENMP
        omp_set_num_threads(max_threads);
#endif
        const double t2 = now_ms();
        RenderResult parallel;
        for (int i = 0; i < repeats; ++i) parallel = render(scene, cam, view.intrinsics);
        const double t_parallel = (now_ms() - t2) / repeats;

        const bool bitwise =
            std::memcmp(serial.rgb.data.data(), parallel.rgb.data.data(),
                        serial.rgb.data.size() * sizeof(float)) == 0;
        std::printf("render %dx%d: reference %8.2f ms | kernel x1 %8.2f ms | "
                    "kernel x%d %8.2f ms | speedup %.2fx | max|diff| vs reference %.2e | "
                    "parallel bitwise-equal %s\n",
                    size, size, t_ref, t_serial, max_threads, t_parallel, t_serial / t_parallel,
                    max_abs_diff(ref.rgb, parallel.rgb), bitwise ? "yes" : "no");
    }

    {
        SweepOptions sweep;
        sweep.n_poses = 36;
        sweep.radius = 2.6;
        const ViewConfig view = bench_view(256);

#ifdef _OPENMP
        omp_set_num_threads(1);
#endif
        const double t0 = now_ms();
        const OccupancyGrid g1 = build_occupancy_from_scene(scene, view, sweep);
        const double t_serial = now_ms() - t0;

#ifdef _OPENMP
        omp_set_num_threads(max_threads);
#endif
        const double t1 = now_ms();
        const OccupancyGrid g2 = build_occupancy_from_scene(scene, view, sweep);
        const double t_parallel = now_ms() - t1;

        std::printf("occupancy build (36 views): x1 %8.2f ms | x%d %8.2f ms | speedup %.2fx | "
                    "grids equal %s\n",
                    t_serial, max_threads, t_parallel, t_serial / t_parallel,
                    g1.cells == g2.cells ? "yes" : "no");
    }
    return 0;
}
