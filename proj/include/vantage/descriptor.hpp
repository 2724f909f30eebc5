#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vantage/image.hpp"

namespace vantage {

/// Dense descriptor grid: grid_h x grid_w cells of dim-dimensional features,
/// globally L2-normalized (all-zero tensors stay zero).
struct DescriptorTensor {
    int grid_h = 0;
    int grid_w = 0;
    int dim = 0;
    std::vector<float> values;

    size_t size() const { return values.size(); }
    float* cell(int r, int c) { return values.data() + (static_cast<size_t>(r) * grid_w + c) * dim; }
    const float* cell(int r, int c) const {
        return values.data() + (static_cast<size_t>(r) * grid_w + c) * dim;
    }
};

/// Deterministic dense image encoder.
class DescriptorBackend {
public:
    virtual ~DescriptorBackend() = default;
    virtual std::string name() const = 0;
    virtual int dim() const = 0;
    virtual std::pair<int, int> input_size() const { return {224, 224}; }
    /// Encode an image already at input_size.
    virtual DescriptorTensor encode(const ImageRGB& image) const = 0;
};

/// Reference backend: 16x16 grid of 14 px patches over a 224x224 input; each
/// cell is [mean R, mean G, mean B, 8-bin gradient-orientation histogram of
/// luminance] (D = 11), globally L2-normalized.
class PatchStatBackend final : public DescriptorBackend {
public:
    std::string name() const override { return "patchstat"; }
    int dim() const override { return 11; }
    DescriptorTensor encode(const ImageRGB& image) const override;
};

/// Resize to the backend's input size (bilinear), then encode.
DescriptorTensor compute_descriptor(const ImageRGB& image, const DescriptorBackend& backend);

struct DemoEntry {
    ImageRGB frame;
    DescriptorTensor descriptor;
    std::optional<std::string> task;
};

/// Demonstration initial frames with precomputed descriptors. tau is the
/// median pairwise flattened-descriptor distance, fixed at construction
/// (1.0 when fewer than two entries).
struct DemoDataset {
    std::vector<DemoEntry> entries;
    double tau = 1.0;

    size_t count() const { return entries.size(); }

    static DemoDataset from_frames(std::vector<ImageRGB> frames,
                                   const DescriptorBackend& backend,
                                   std::vector<std::optional<std::string>> tasks = {});
    void recompute_tau();
};

/// Median of all pairwise flattened L2 distances (1.0 if < 2 entries).
double median_pairwise_distance(const DemoDataset& dataset);

/// Mean L2 distance from the query to its k nearest dataset descriptors,
/// ties broken by dataset index.
double knn_distance(const DescriptorTensor& query, const DemoDataset& dataset, int k);

/// Map a KNN distance to a score in (0, 1]: exp(-distance / tau).
double id_score(double distance, double tau);

/// Load a dataset directory: index.json is an array of {"file": name,
/// "task": optional, "desc": optional precomputed descriptor file}. Frames
/// are PNG; descriptors are computed with the backend unless "desc" is given.
DemoDataset load_demo_dataset(const std::filesystem::path& dir,
                              const DescriptorBackend& backend);

/// Flat binary descriptor tensor: three little-endian uint32 (grid_h, grid_w,
/// dim) followed by grid_h*grid_w*dim float32 values.
DescriptorTensor load_descriptor_file(const std::filesystem::path& path);
void save_descriptor_file(const DescriptorTensor& tensor, const std::filesystem::path& path);

} // namespace vantage
