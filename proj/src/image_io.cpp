#include "vantage/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace vantage {

namespace {

constexpr std::uint8_t kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_be32(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void append_chunk(std::vector<std::uint8_t>& out, const char type[4],
                  const std::vector<std::uint8_t>& data) {
    put_be32(out, static_cast<std::uint32_t>(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const auto crc = crc32(0, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_be32(out, static_cast<std::uint32_t>(crc));
}

std::uint8_t quantize(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

std::vector<std::uint8_t> encode_rgb8(const std::vector<std::uint8_t>& rgb8, int height,
                                      int width) {
    std::vector<std::uint8_t> raw;
    raw.reserve(static_cast<size_t>(height) * (1 + static_cast<size_t>(width) * 3));
    for (int r = 0; r < height; ++r) {
        raw.push_back(0); // filter: none
        const auto* row = rgb8.data() + static_cast<size_t>(r) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }

    uLongf bound = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> compressed(bound);
    if (compress2(compressed.data(), &bound, raw.data(), static_cast<uLong>(raw.size()), 6) !=
        Z_OK) {
        throw NumericsError("png encode: deflate failed");
    }
    compressed.resize(bound);

    std::vector<std::uint8_t> out(kSignature, kSignature + 8);
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type: RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0); // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", compressed);
    append_chunk(out, "IEND", {});
    return out;
}

} // namespace

std::vector<std::uint8_t> encode_png(const ImageRGB& image) {
    if (image.empty()) {
        throw ConfigError("encode_png: empty image");
    }
    std::vector<std::uint8_t> rgb8(static_cast<size_t>(image.height) * image.width * 3);
    for (size_t i = 0; i < rgb8.size(); ++i) {
        rgb8[i] = quantize(image.data[i]);
    }
    return encode_rgb8(rgb8, image.height, image.width);
}

void write_png(const std::filesystem::path& path, const ImageRGB& image) {
    const auto bytes = encode_png(image);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("write_png: cannot open " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw ConfigError("write_png: write failed for " + path.string());
    }
}

void write_depth_png(const std::filesystem::path& path, const ImageDepth& depth) {
    float max_d = 0.0f;
    for (float d : depth.data) {
        if (d > max_d) max_d = d;
    }
    ImageRGB img(depth.height, depth.width);
    for (int r = 0; r < depth.height; ++r) {
        for (int c = 0; c < depth.width; ++c) {
            const float d = depth.at(r, c);
            float v = 0.0f;
            if (d >= 0.0f && max_d > 0.0f) v = d / max_d;
            float* p = img.px(r, c);
            p[0] = p[1] = p[2] = v;
        }
    }
    write_png(path, img);
}

ImageRGB read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("read_png: cannot open " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() < 8 || std::memcmp(bytes.data(), kSignature, 8) != 0) {
        throw ParseError("read_png: not a PNG file: " + path.string());
    }

    int width = 0;
    int height = 0;
    int color_type = -1;
    std::vector<std::uint8_t> idat;
    size_t at = 8;
    while (at + 8 <= bytes.size()) {
        const std::uint32_t len = get_be32(bytes.data() + at);
        if (at + 12 + len > bytes.size()) {
            throw ParseError("read_png: truncated chunk in " + path.string());
        }
        const char* type = reinterpret_cast<const char*>(bytes.data() + at + 4);
        const std::uint8_t* data = bytes.data() + at + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw ParseError("read_png: bad IHDR");
            width = static_cast<int>(get_be32(data));
            height = static_cast<int>(get_be32(data + 4));
            const int bit_depth = data[8];
            color_type = data[9];
            const int interlace = data[12];
            if (bit_depth != 8) throw ParseError("read_png: only 8-bit PNGs supported");
            if (color_type != 0 && color_type != 2 && color_type != 6) {
                throw ParseError("read_png: unsupported color type");
            }
            if (interlace != 0) throw ParseError("read_png: interlaced PNGs unsupported");
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        at += 12 + len;
    }
    if (width <= 0 || height <= 0 || idat.empty()) {
        throw ParseError("read_png: missing image data in " + path.string());
    }

    const int channels = color_type == 0 ? 1 : (color_type == 2 ? 3 : 4);
    const size_t stride = static_cast<size_t>(width) * channels;
    std::vector<std::uint8_t> raw(static_cast<size_t>(height) * (stride + 1));
    uLongf raw_len = static_cast<uLongf>(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
        raw_len != raw.size()) {
        throw ParseError("read_png: inflate failed for " + path.string());
    }

    // Undo per-row filters in place.
    std::vector<std::uint8_t> pixels(static_cast<size_t>(height) * stride);
    for (int r = 0; r < height; ++r) {
        const std::uint8_t filter = raw[static_cast<size_t>(r) * (stride + 1)];
        const std::uint8_t* src = raw.data() + static_cast<size_t>(r) * (stride + 1) + 1;
        std::uint8_t* dst = pixels.data() + static_cast<size_t>(r) * stride;
        const std::uint8_t* prev = r > 0 ? dst - stride : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            const int a = i >= static_cast<size_t>(channels) ? dst[i - channels] : 0;
            const int b = prev ? prev[i] : 0;
            const int c = (prev && i >= static_cast<size_t>(channels)) ? prev[i - channels] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw ParseError("read_png: unknown filter type");
            }
            dst[i] = static_cast<std::uint8_t>(v & 0xFF);
        }
    }

    ImageRGB img(height, width);
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const std::uint8_t* p = pixels.data() + (static_cast<size_t>(r) * width + c) * channels;
            float* o = img.px(r, c);
            if (channels == 1) {
                o[0] = o[1] = o[2] = p[0] / 255.0f;
            } else {
                o[0] = p[0] / 255.0f;
                o[1] = p[1] / 255.0f;
                o[2] = p[2] / 255.0f;
            }
        }
    }
    return img;
}

} // namespace vantage
