#pragma once

#include <cstddef>
#include <span>
#include <string>

#include <json.hpp>

#include "fedsynth/dataset.hpp"
#include "fedsynth/gan.hpp"
#include "fedsynth/mlp.hpp"

namespace fedsynth {

/// Round-trip-exact decimal rendering (%.17g), used by every CSV writer.
std::string format_double(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

/// CSV with a provenance comment line, then "label,f0,...": one row per point.
std::string dataset_to_csv(const LabelledDataset& data, const std::string& provenance_comment);
LabelledDataset dataset_from_csv(const std::string& text, std::size_t class_count,
                                 Provenance provenance);

nlohmann::json mlp_to_json(const MlpParams& params);
MlpParams mlp_from_json(const nlohmann::json& j);

nlohmann::json generator_to_json(const GeneratorModel& gen);
GeneratorModel generator_from_json(const nlohmann::json& j);

/// 8-bit binary PGM; pixels come in [-1, 1] row-major. A non-empty comment
/// becomes a '#' header line (provenance usually goes there).
std::string pgm_bytes(std::size_t width, std::size_t height, std::span<const double> pixels,
                      const std::string& comment = "");
void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               std::span<const double> pixels, const std::string& comment = "");

}  // namespace fedsynth
