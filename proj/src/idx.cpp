#include "fedsynth/idx.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include "fedsynth/io.hpp"

namespace fedsynth {
namespace {

std::uint32_t read_u32_be(const std::string& bytes, std::size_t offset, const std::string& path) {
    if (offset + 4 > bytes.size()) {
        throw std::runtime_error("idx: truncated file " + path + ": need 4 bytes at offset " +
                                 std::to_string(offset) + ", have " +
                                 std::to_string(bytes.size() - std::min(offset, bytes.size())));
    }
    std::uint32_t v = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        v = (v << 8) | static_cast<unsigned char>(bytes[offset + i]);
    }
    return v;
}

void expect_magic(const std::string& bytes, std::uint32_t want, const std::string& path) {
    const std::uint32_t got = read_u32_be(bytes, 0, path);
    if (got != want) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "0x%08X, expected 0x%08X", got, want);
        throw std::runtime_error("idx: bad magic at offset 0 in " + path + ": " + buf);
    }
}

}  // namespace

LabelledDataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                                std::size_t downscale) {
    if (downscale == 0) throw std::invalid_argument("load_idx_images: downscale must be >= 1");
    const std::string img = read_text_file(images_path);
    const std::string lab = read_text_file(labels_path);

    expect_magic(img, 0x00000803u, images_path);
    const std::size_t count = read_u32_be(img, 4, images_path);
    const std::size_t rows = read_u32_be(img, 8, images_path);
    const std::size_t cols = read_u32_be(img, 12, images_path);
    const std::size_t pixel_bytes = count * rows * cols;
    if (img.size() != 16 + pixel_bytes) {
        throw std::runtime_error("idx: truncated file " + images_path + ": expected " +
                                 std::to_string(16 + pixel_bytes) + " bytes, have " +
                                 std::to_string(img.size()));
    }

    expect_magic(lab, 0x00000801u, labels_path);
    const std::size_t label_count = read_u32_be(lab, 4, labels_path);
    if (lab.size() != 8 + label_count) {
        throw std::runtime_error("idx: truncated file " + labels_path + ": expected " +
                                 std::to_string(8 + label_count) + " bytes, have " +
                                 std::to_string(lab.size()));
    }
    if (label_count != count) {
        throw std::runtime_error("idx: " + std::to_string(count) + " images in " + images_path +
                                 " vs " + std::to_string(label_count) + " labels in " +
                                 labels_path);
    }
    if (rows % downscale != 0 || cols % downscale != 0) {
        throw std::invalid_argument("load_idx_images: downscale " + std::to_string(downscale) +
                                    " does not divide " + std::to_string(rows) + "x" +
                                    std::to_string(cols));
    }
    const std::size_t out_rows = rows / downscale;
    const std::size_t out_cols = cols / downscale;

    Tensor2 features(count, out_rows * out_cols);
    std::vector<int> labels(count);
    int max_label = 0;
    const double block = static_cast<double>(downscale * downscale);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t base = 16 + i * rows * cols;
        auto out = features.row(i);
        for (std::size_t r = 0; r < out_rows; ++r) {
            for (std::size_t c = 0; c < out_cols; ++c) {
                double sum = 0.0;
                for (std::size_t dr = 0; dr < downscale; ++dr) {
                    for (std::size_t dc = 0; dc < downscale; ++dc) {
                        const std::size_t px = (r * downscale + dr) * cols + (c * downscale + dc);
                        sum += static_cast<unsigned char>(img[base + px]);
                    }
                }
                out[r * out_cols + c] = (sum / block) / 127.5 - 1.0;
            }
        }
        labels[i] = static_cast<unsigned char>(lab[8 + i]);
        max_label = std::max(max_label, labels[i]);
    }
    const std::size_t class_count = count == 0 ? 1 : static_cast<std::size_t>(max_label) + 1;
    return make_dataset(std::move(features), std::move(labels), class_count, Provenance::real);
}

}  // namespace fedsynth
