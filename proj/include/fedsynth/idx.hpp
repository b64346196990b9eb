#pragma once

#include <cstddef>
#include <string>

#include "fedsynth/dataset.hpp"

namespace fedsynth {

/// Loads big-endian IDX image/label pairs (magic 0x00000803 / 0x00000801).
/// Pixels are average-pooled by `downscale` (must divide both dims) and
/// scaled to [-1, 1]. Class count is 1 + max label.
LabelledDataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                                std::size_t downscale = 1);

}  // namespace fedsynth
