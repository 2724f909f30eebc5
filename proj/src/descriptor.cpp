#include "vantage/descriptor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "vantage/image_io.hpp"

namespace vantage {

namespace {

constexpr int kGrid = 16;
constexpr int kPatch = 14;
constexpr int kBins = 8;
constexpr int kDim = 3 + kBins;

void l2_normalize(std::vector<float>& values) {
    double sum = 0.0;
    for (float v : values) sum += static_cast<double>(v) * v;
    if (sum <= 0.0) return;
    const float inv = static_cast<float>(1.0 / std::sqrt(sum));
    for (float& v : values) v *= inv;
}

double squared_distance(const DescriptorTensor& a, const DescriptorTensor& b) {
    if (a.size() != b.size()) {
        throw ConfigError("descriptor distance: tensor shapes differ");
    }
    double sum = 0.0;
    for (size_t i = 0; i < a.values.size(); ++i) {
        const double d = static_cast<double>(a.values[i]) - b.values[i];
        sum += d * d;
    }
    return sum;
}

} // namespace

DescriptorTensor PatchStatBackend::encode(const ImageRGB& image) const {
    const auto [in_h, in_w] = input_size();
    if (image.height != in_h || image.width != in_w) {
        throw ConfigError("patchstat: image must be resized to backend input size first");
    }

    DescriptorTensor t;
    t.grid_h = kGrid;
    t.grid_w = kGrid;
    t.dim = kDim;
    t.values.assign(static_cast<size_t>(kGrid) * kGrid * kDim, 0.0f);

    // Patch color means.
    std::vector<double> sums(static_cast<size_t>(kGrid) * kGrid * 3, 0.0);
    for (int r = 0; r < in_h; ++r) {
        const int pr = r / kPatch;
        for (int c = 0; c < in_w; ++c) {
            const int pc = c / kPatch;
            const float* p = image.px(r, c);
            double* s = sums.data() + (static_cast<size_t>(pr) * kGrid + pc) * 3;
            s[0] += p[0];
            s[1] += p[1];
            s[2] += p[2];
        }
    }
    const double inv_area = 1.0 / (kPatch * kPatch);
    for (int pr = 0; pr < kGrid; ++pr) {
        for (int pc = 0; pc < kGrid; ++pc) {
            float* cell = t.cell(pr, pc);
            const double* s = sums.data() + (static_cast<size_t>(pr) * kGrid + pc) * 3;
            cell[0] = static_cast<float>(s[0] * inv_area);
            cell[1] = static_cast<float>(s[1] * inv_area);
            cell[2] = static_cast<float>(s[2] * inv_area);
        }
    }

    // Gradient-orientation histograms over interior pixels, central
    // differences on luminance, magnitude-weighted.
    std::vector<float> luma(static_cast<size_t>(in_h) * in_w);
    for (int r = 0; r < in_h; ++r) {
        for (int c = 0; c < in_w; ++c) {
            luma[static_cast<size_t>(r) * in_w + c] = luminance(image.px(r, c));
        }
    }
    for (int r = 1; r < in_h - 1; ++r) {
        const int pr = r / kPatch;
        for (int c = 1; c < in_w - 1; ++c) {
            const double gx = 0.5 * (luma[static_cast<size_t>(r) * in_w + c + 1] -
                                     luma[static_cast<size_t>(r) * in_w + c - 1]);
            const double gy = 0.5 * (luma[static_cast<size_t>(r + 1) * in_w + c] -
                                     luma[static_cast<size_t>(r - 1) * in_w + c]);
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag <= 0.0) continue;
            const double angle = std::atan2(gy, gx); // (-pi, pi]
            int bin = static_cast<int>((angle + M_PI) / (2.0 * M_PI / kBins));
            bin = std::clamp(bin, 0, kBins - 1);
            const int pc = c / kPatch;
            t.cell(pr, pc)[3 + bin] += static_cast<float>(mag);
        }
    }

    l2_normalize(t.values);
    return t;
}

DescriptorTensor compute_descriptor(const ImageRGB& image, const DescriptorBackend& backend) {
    if (image.empty()) {
        throw ConfigError("compute_descriptor: empty image");
    }
    const auto [h, w] = backend.input_size();
    if (image.height == h && image.width == w) {
        return backend.encode(image);
    }
    return backend.encode(resize_bilinear(image, h, w));
}

DemoDataset DemoDataset::from_frames(std::vector<ImageRGB> frames,
                                     const DescriptorBackend& backend,
                                     std::vector<std::optional<std::string>> tasks) {
    if (!tasks.empty() && tasks.size() != frames.size()) {
        throw ConfigError("DemoDataset: task label count does not match frame count");
    }
    DemoDataset ds;
    ds.entries.reserve(frames.size());
    for (size_t i = 0; i < frames.size(); ++i) {
        DemoEntry entry;
        entry.descriptor = compute_descriptor(frames[i], backend);
        entry.frame = std::move(frames[i]);
        if (!tasks.empty()) entry.task = std::move(tasks[i]);
        ds.entries.push_back(std::move(entry));
    }
    ds.recompute_tau();
    return ds;
}

void DemoDataset::recompute_tau() {
    const double median = median_pairwise_distance(*this);
    // All-identical demo frames give a zero median; keep tau usable.
    tau = median > 0.0 ? median : 1.0;
}

double median_pairwise_distance(const DemoDataset& dataset) {
    const size_t n = dataset.entries.size();
    if (n < 2) return 1.0;
    std::vector<double> dists;
    dists.reserve(n * (n - 1) / 2);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            dists.push_back(std::sqrt(
                squared_distance(dataset.entries[i].descriptor, dataset.entries[j].descriptor)));
        }
    }
    std::sort(dists.begin(), dists.end());
    const size_t m = dists.size();
    if (m % 2 == 1) return dists[m / 2];
    return 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
}

double knn_distance(const DescriptorTensor& query, const DemoDataset& dataset, int k) {
    const size_t n = dataset.entries.size();
    if (n == 0) {
        throw ConfigError("knn_distance: empty dataset");
    }
    if (k < 1 || static_cast<size_t>(k) > n) {
        throw ConfigError("knn_distance: k must be in [1, dataset size]");
    }
    std::vector<std::pair<double, size_t>> dists;
    dists.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        dists.emplace_back(std::sqrt(squared_distance(query, dataset.entries[i].descriptor)), i);
    }
    std::sort(dists.begin(), dists.end()); // ties broken by dataset index
    double sum = 0.0;
    for (int i = 0; i < k; ++i) sum += dists[static_cast<size_t>(i)].first;
    return sum / k;
}

double id_score(double distance, double tau) {
    if (!(tau > 0.0)) {
        throw ConfigError("id_score: tau must be positive");
    }
    return std::exp(-distance / tau);
}

DemoDataset load_demo_dataset(const std::filesystem::path& dir,
                              const DescriptorBackend& backend) {
    const auto index_path = dir / "index.json";
    std::ifstream in(index_path);
    if (!in) {
        throw ConfigError("dataset not found: " + index_path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("dataset index " + index_path.string() + ": " + e.what());
    }
    if (!j.is_array()) {
        throw ParseError("dataset index must be a JSON array of entries");
    }

    DemoDataset ds;
    for (const auto& item : j) {
        DemoEntry entry;
        const std::string file = item.at("file").get<std::string>();
        entry.frame = read_png(dir / file);
        if (item.contains("task") && !item.at("task").is_null()) {
            entry.task = item.at("task").get<std::string>();
        }
        if (item.contains("desc") && !item.at("desc").is_null()) {
            entry.descriptor = load_descriptor_file(dir / item.at("desc").get<std::string>());
        } else {
            entry.descriptor = compute_descriptor(entry.frame, backend);
        }
        ds.entries.push_back(std::move(entry));
    }
    if (ds.entries.empty()) {
        throw ConfigError("dataset is empty: " + dir.string());
    }
    ds.recompute_tau();
    return ds;
}

DescriptorTensor load_descriptor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("descriptor file not found: " + path.string());
    }
    std::uint32_t header[3];
    in.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!in) {
        throw ParseError("descriptor file truncated header: " + path.string());
    }
    DescriptorTensor t;
    t.grid_h = static_cast<int>(header[0]);
    t.grid_w = static_cast<int>(header[1]);
    t.dim = static_cast<int>(header[2]);
    if (t.grid_h <= 0 || t.grid_w <= 0 || t.dim <= 0) {
        throw ParseError("descriptor file has non-positive dimensions: " + path.string());
    }
    const size_t count = static_cast<size_t>(t.grid_h) * t.grid_w * t.dim;
    t.values.resize(count);
    in.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(count * sizeof(float)));
    if (!in) {
        throw ParseError("descriptor file truncated payload: " + path.string());
    }
    for (float v : t.values) {
        if (!std::isfinite(v)) {
            throw ParseError("descriptor file has non-finite values: " + path.string());
        }
    }
    return t;
}

void save_descriptor_file(const DescriptorTensor& tensor, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open descriptor file for writing: " + path.string());
    }
    const std::uint32_t header[3] = {static_cast<std::uint32_t>(tensor.grid_h),
                                     static_cast<std::uint32_t>(tensor.grid_w),
                                     static_cast<std::uint32_t>(tensor.dim)};
    out.write(reinterpret_cast<const char*>(header), sizeof(header));
    out.write(reinterpret_cast<const char*>(tensor.values.data()),
              static_cast<std::streamsize>(tensor.values.size() * sizeof(float)));
    if (!out) {
        throw ConfigError("descriptor file write failed: " + path.string());
    }
}

} // namespace vantage
