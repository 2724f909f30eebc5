#include <doctest.h>

#include <algorithm>
#include <cstring>

#include "vantage/descriptor.hpp"
#include "vantage/rng.hpp"

using namespace vantage;

namespace {

DescriptorTensor make_flat(std::initializer_list<float> values) {
    DescriptorTensor t;
    t.grid_h = 1;
    t.grid_w = 1;
    t.dim = static_cast<int>(values.size());
    t.values = values;
    return t;
}

DemoDataset dataset_from_descriptors(std::vector<DescriptorTensor> descriptors) {
    DemoDataset ds;
    for (auto& d : descriptors) {
        DemoEntry e;
        e.descriptor = std::move(d);
        ds.entries.push_back(std::move(e));
    }
    ds.recompute_tau();
    return ds;
}

ImageRGB constant_image(float r, float g, float b) { return ImageRGB::filled(224, 224, r, g, b); }

} // namespace

TEST_SUITE("descriptor") {

TEST_CASE("patchstat shape and normalization") {
    PatchStatBackend backend;
    const auto t = compute_descriptor(constant_image(0.5f, 0.5f, 0.5f), backend);
    CHECK(t.grid_h == 16);
    CHECK(t.grid_w == 16);
    CHECK(t.dim == 11);
    CHECK(t.values.size() == 16u * 16u * 11u);
    double norm = 0.0;
    for (float v : t.values) norm += static_cast<double>(v) * v;
    CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("patchstat on a constant image: equal means, zero gradients") {
    PatchStatBackend backend;
    const auto t = compute_descriptor(constant_image(0.25f, 0.5f, 0.75f), backend);
    const float* first = t.cell(0, 0);
    for (int r = 0; r < 16; ++r) {
        for (int c = 0; c < 16; ++c) {
            const float* cell = t.cell(r, c);
            CHECK(cell[0] == doctest::Approx(first[0]));
            CHECK(cell[1] == doctest::Approx(first[1]));
            CHECK(cell[2] == doctest::Approx(first[2]));
            for (int b = 0; b < 8; ++b) CHECK(cell[3 + b] == 0.0f);
        }
    }
}

TEST_CASE("patchstat vertical edge activates only the straddling grid columns") {
    ImageRGB img(224, 224);
    for (int r = 0; r < 224; ++r) {
        for (int c = 0; c < 224; ++c) {
            const float v = c < 112 ? 0.2f : 0.8f;
            float* p = img.px(r, c);
            p[0] = p[1] = p[2] = v;
        }
    }
    PatchStatBackend backend;
    const auto t = compute_descriptor(img, backend);

    // Direct convolution oracle: central differences of the luminance find
    // the grid columns containing any nonzero-gradient pixel.
    std::vector<bool> expected_cols(16, false);
    for (int c = 1; c < 223; ++c) {
        const float left = c - 1 < 112 ? 0.2f : 0.8f;
        const float right = c + 1 < 112 ? 0.2f : 0.8f;
        if (left != right) expected_cols[static_cast<size_t>(c / 14)] = true;
    }
    int expected_count = 0;
    for (bool b : expected_cols) expected_count += b ? 1 : 0;
    CHECK(expected_count == 2); // columns 7 and 8 straddle the edge

    for (int gc = 0; gc < 16; ++gc) {
        double energy = 0.0;
        for (int gr = 0; gr < 16; ++gr) {
            for (int b = 0; b < 8; ++b) energy += t.cell(gr, gc)[3 + b];
        }
        if (expected_cols[static_cast<size_t>(gc)]) {
            CHECK(energy > 0.0);
        } else {
            CHECK(energy == 0.0);
        }
    }
}

TEST_CASE("patchstat determinism: repeated encodings are bit-identical") {
    PatchStatBackend backend;
    Rng rng(17);
    ImageRGB img(224, 224);
    for (auto& v : img.data) v = static_cast<float>(rng.uniform());
    const auto first = compute_descriptor(img, backend);
    for (int i = 0; i < 1000; ++i) {
        const auto again = compute_descriptor(img, backend);
        REQUIRE(std::memcmp(again.values.data(), first.values.data(),
                            first.values.size() * sizeof(float)) == 0);
    }
}

TEST_CASE("patchstat rejects empty images") {
    PatchStatBackend backend;
    CHECK_THROWS_AS(compute_descriptor(ImageRGB{}, backend), ConfigError);
}

TEST_CASE("knn_distance basics") {
    SUBCASE("query identical to an entry, k=1") {
        auto ds = dataset_from_descriptors({make_flat({1, 2, 3}), make_flat({4, 5, 6})});
        CHECK(knn_distance(make_flat({1, 2, 3}), ds, 1) == 0.0);
    }
    SUBCASE("five identical entries, k=5") {
        std::vector<DescriptorTensor> entries(5, make_flat({2, 2, 2}));
        auto ds = dataset_from_descriptors(std::move(entries));
        CHECK(knn_distance(make_flat({2, 2, 2}), ds, 5) == 0.0);
    }
    SUBCASE("entries at distances {1, 2, 5}, k=2 averages the nearest two") {
        auto ds = dataset_from_descriptors(
            {make_flat({1, 0}), make_flat({2, 0}), make_flat({5, 0})});
        CHECK(knn_distance(make_flat({0, 0}), ds, 2) == doctest::Approx(1.5));
    }
    SUBCASE("errors") {
        auto ds = dataset_from_descriptors({make_flat({1, 0})});
        CHECK_THROWS_AS(knn_distance(make_flat({0, 0}), ds, 2), ConfigError);
        CHECK_THROWS_AS(knn_distance(make_flat({0, 0}), ds, 0), ConfigError);
        DemoDataset empty;
        CHECK_THROWS_AS(knn_distance(make_flat({0, 0}), empty, 1), ConfigError);
    }
}

TEST_CASE("knn_distance equals brute force on random datasets") {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const int n = 1 + static_cast<int>(rng.uniform_index(100));
        const int dim = 4;
        std::vector<DescriptorTensor> entries;
        for (int i = 0; i < n; ++i) {
            DescriptorTensor t;
            t.grid_h = 1;
            t.grid_w = 1;
            t.dim = dim;
            for (int d = 0; d < dim; ++d) {
                t.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
            }
            entries.push_back(std::move(t));
        }
        auto ds = dataset_from_descriptors(std::move(entries));
        DescriptorTensor query;
        query.grid_h = 1;
        query.grid_w = 1;
        query.dim = dim;
        for (int d = 0; d < dim; ++d) {
            query.values.push_back(static_cast<float>(rng.uniform(-1, 1)));
        }
        const int k = 1 + static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(n)));

        // Brute force: all distances, full sort, mean of first k.
        std::vector<double> dists;
        for (const auto& e : ds.entries) {
            double sum = 0.0;
            for (int d = 0; d < dim; ++d) {
                const double diff =
                    static_cast<double>(query.values[static_cast<size_t>(d)]) -
                    e.descriptor.values[static_cast<size_t>(d)];
                sum += diff * diff;
            }
            dists.push_back(std::sqrt(sum));
        }
        std::sort(dists.begin(), dists.end());
        double expected = 0.0;
        for (int i = 0; i < k; ++i) expected += dists[static_cast<size_t>(i)];
        expected /= k;

        CHECK(knn_distance(query, ds, k) == expected); // exact
    }
}

TEST_CASE("knn monotonicity: adding a closer entry never increases the distance") {
    Rng rng(8);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + static_cast<int>(rng.uniform_index(20));
        std::vector<DescriptorTensor> entries;
        for (int i = 0; i < n; ++i) {
            entries.push_back(make_flat({static_cast<float>(rng.uniform(-2, 2)),
                                         static_cast<float>(rng.uniform(-2, 2))}));
        }
        auto ds = dataset_from_descriptors(std::move(entries));
        const auto query = make_flat({0.0f, 0.0f});
        const int k = 2;
        const double before = knn_distance(query, ds, k);

        DemoEntry close;
        close.descriptor = make_flat({0.01f, 0.0f});
        auto grown = ds;
        grown.entries.push_back(close);
        const double after = knn_distance(query, grown, k);
        CHECK(after <= before + 1e-12);
    }
}

TEST_CASE("id_score") {
    CHECK(id_score(0.0, 1.0) == 1.0);
    CHECK(id_score(2.0, 2.0) == doctest::Approx(std::exp(-1.0)));
    CHECK_THROWS_AS(id_score(1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(id_score(1.0, -1.0), ConfigError);
}

TEST_CASE("tau is the median pairwise distance") {
    // Pairwise distances {2, 4, 6} -> median 4.
    auto ds = dataset_from_descriptors({make_flat({0}), make_flat({2}), make_flat({6})});
    CHECK(ds.tau == doctest::Approx(4.0));

    SUBCASE("single entry falls back to 1") {
        auto single = dataset_from_descriptors({make_flat({3})});
        CHECK(single.tau == 1.0);
    }
}

TEST_CASE("id score is invariant to dataset entry order") {
    Rng rng(10);
    std::vector<DescriptorTensor> entries;
    for (int i = 0; i < 12; ++i) {
        entries.push_back(make_flat({static_cast<float>(rng.uniform(-1, 1)),
                                     static_cast<float>(rng.uniform(-1, 1)),
                                     static_cast<float>(rng.uniform(-1, 1))}));
    }
    auto ds = dataset_from_descriptors(entries);
    std::reverse(entries.begin(), entries.end());
    auto reversed = dataset_from_descriptors(entries);

    const auto query = make_flat({0.1f, -0.2f, 0.3f});
    CHECK(id_score(knn_distance(query, ds, 5), ds.tau) ==
          id_score(knn_distance(query, reversed, 5), reversed.tau));
}

} // TEST_SUITE
