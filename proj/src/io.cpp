#include "fedsynth/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace fedsynth {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string dataset_to_csv(const LabelledDataset& data, const std::string& provenance_comment) {
    std::string out;
    if (!provenance_comment.empty()) out += "# " + provenance_comment + "\n";
    out += "label";
    for (std::size_t j = 0; j < data.dim(); ++j) out += ",f" + std::to_string(j);
    out += '\n';
    for (std::size_t i = 0; i < data.size(); ++i) {
        out += std::to_string(data.labels[i]);
        const auto row = data.features.row(i);
        for (double v : row) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

LabelledDataset dataset_from_csv(const std::string& text, std::size_t class_count,
                                 Provenance provenance) {
    std::istringstream in(text);
    std::string line;
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    bool header_seen = false;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        std::vector<double> row;
        std::size_t pos = 0;
        bool first = true;
        int label = 0;
        while (pos <= line.size()) {
            const std::size_t next = line.find(',', pos);
            const std::string cell =
                line.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
            try {
                if (first) {
                    label = std::stoi(cell);
                    first = false;
                } else {
                    row.push_back(std::stod(cell));
                }
            } catch (const std::exception&) {
                throw std::runtime_error("dataset_from_csv: bad cell '" + cell + "' at line " +
                                         std::to_string(line_no));
            }
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        if (dim == 0) {
            dim = row.size();
        } else if (row.size() != dim) {
            throw std::runtime_error("dataset_from_csv: row width " + std::to_string(row.size()) +
                                     " != " + std::to_string(dim) + " at line " +
                                     std::to_string(line_no));
        }
        labels.push_back(label);
        rows.push_back(std::move(row));
    }
    Tensor2 features(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::copy(rows[i].begin(), rows[i].end(), features.row(i).begin());
    }
    return make_dataset(std::move(features), std::move(labels), class_count, provenance);
}

nlohmann::json mlp_to_json(const MlpParams& params) {
    nlohmann::json layers = nlohmann::json::array();
    for (const MlpLayer& layer : params.layers()) {
        nlohmann::json l;
        l["in"] = layer.weight.rows();
        l["out"] = layer.weight.cols();
        l["act"] = activation_name(layer.act);
        l["weight"] = layer.weight.data();
        l["bias"] = layer.bias;
        layers.push_back(std::move(l));
    }
    nlohmann::json j;
    j["layers"] = std::move(layers);
    return j;
}

MlpParams mlp_from_json(const nlohmann::json& j) {
    std::vector<MlpLayer> layers;
    for (const nlohmann::json& l : j.at("layers")) {
        MlpLayer layer;
        const auto in = l.at("in").get<std::size_t>();
        const auto out = l.at("out").get<std::size_t>();
        auto weights = l.at("weight").get<std::vector<double>>();
        if (weights.size() != in * out) {
            throw std::runtime_error("mlp_from_json: weight length " +
                                     std::to_string(weights.size()) + " != " +
                                     std::to_string(in * out));
        }
        layer.weight = Tensor2(in, out, std::move(weights));
        layer.bias = l.at("bias").get<std::vector<double>>();
        layer.act = activation_from_name(l.at("act").get<std::string>());
        layers.push_back(std::move(layer));
    }
    return MlpParams(std::move(layers));
}

nlohmann::json generator_to_json(const GeneratorModel& gen) {
    nlohmann::json j;
    j["kind"] = "generator";
    j["noise_dim"] = gen.noise_dim;
    j["label_dim"] = gen.label_dim;
    j["output_dim"] = gen.output_dim;
    j["mlp"] = mlp_to_json(gen.params);
    return j;
}

GeneratorModel generator_from_json(const nlohmann::json& j) {
    GeneratorModel gen;
    gen.noise_dim = j.at("noise_dim").get<std::size_t>();
    gen.label_dim = j.at("label_dim").get<std::size_t>();
    gen.output_dim = j.at("output_dim").get<std::size_t>();
    gen.params = mlp_from_json(j.at("mlp"));
    gen.validate();
    return gen;
}

std::string pgm_bytes(std::size_t width, std::size_t height, std::span<const double> pixels,
                      const std::string& comment) {
    if (pixels.size() != width * height) {
        throw std::invalid_argument("pgm_bytes: " + std::to_string(pixels.size()) +
                                    " pixels for " + std::to_string(width) + "x" +
                                    std::to_string(height));
    }
    if (comment.find('\n') != std::string::npos) {
        throw std::invalid_argument("pgm comment must be a single line");
    }
    std::string out = "P5\n";
    if (!comment.empty()) {
        out += "# " + comment + "\n";
    }
    out += std::to_string(width) + " " + std::to_string(height) + "\n255\n";
    out.reserve(out.size() + pixels.size());
    for (double v : pixels) {
        const double scaled = std::clamp((v + 1.0) * 0.5, 0.0, 1.0) * 255.0;
        out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(scaled))));
    }
    return out;
}

void write_pgm(const std::string& path, std::size_t width, std::size_t height,
               std::span<const double> pixels, const std::string& comment) {
    write_text_file(path, pgm_bytes(width, height, pixels, comment));
}

}  // namespace fedsynth
