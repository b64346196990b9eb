#include "fedsynth/config.hpp"

#include <cstdio>
#include <stdexcept>

#include "fedsynth/rng.hpp"

namespace fedsynth {

namespace {

std::string join_path(const std::string& base, const std::string& key) {
    return base.empty() ? key : base + "." + key;
}

void check_against_schema(const nlohmann::json& schema, const nlohmann::json& user,
                          const std::string& path) {
    if (schema.is_object()) {
        if (!user.is_object()) {
            throw std::runtime_error("config key '" + path + "' must be an object");
        }
        for (const auto& item : user.items()) {
            const auto it = schema.find(item.key());
            if (it == schema.end()) {
                throw std::runtime_error("unknown config key '" + join_path(path, item.key()) + "'");
            }
            check_against_schema(*it, item.value(), join_path(path, item.key()));
        }
        return;
    }
    if (schema.is_array()) {
        if (!user.is_array()) {
            throw std::runtime_error("config key '" + path + "' must be an array");
        }
        if (!schema.empty()) {
            for (std::size_t i = 0; i < user.size(); ++i) {
                check_against_schema(schema.front(), user.at(i),
                                     path + "[" + std::to_string(i) + "]");
            }
        }
        return;
    }
    if (schema.is_string()) {
        if (!user.is_string()) {
            throw std::runtime_error("config key '" + path + "' must be a string");
        }
        return;
    }
    if (schema.is_boolean()) {
        if (!user.is_boolean()) {
            throw std::runtime_error("config key '" + path + "' must be a boolean");
        }
        return;
    }
    if (schema.is_number()) {
        if (!user.is_number()) {
            throw std::runtime_error("config key '" + path + "' must be a number");
        }
        if (schema.is_number_unsigned() && user.is_number_integer() &&
            !user.is_number_unsigned() && user.get<std::int64_t>() < 0) {
            throw std::runtime_error("config key '" + path + "' must be non-negative");
        }
        return;
    }
    throw std::runtime_error("config key '" + path + "' has unsupported schema type");
}

template <typename T>
std::vector<T> to_vector(const nlohmann::json& j) {
    std::vector<T> out;
    out.reserve(j.size());
    for (const auto& v : j) {
        out.push_back(v.get<T>());
    }
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (dataset.kind != "mixture" && dataset.kind != "idx") {
        throw std::invalid_argument("dataset.kind must be 'mixture' or 'idx'");
    }
    if (dataset.kind == "mixture") {
        dataset.mixture.validate();
    } else {
        if (dataset.idx_images.empty() || dataset.idx_labels.empty()) {
            throw std::invalid_argument("idx dataset requires idx_images and idx_labels paths");
        }
        if (dataset.idx_downscale == 0) {
            throw std::invalid_argument("idx_downscale must be positive");
        }
    }
    sharding.validate();
    fed.validate();
    if (!(artificial_per_real > 0.0)) {
        throw std::invalid_argument("artificial_per_real must be positive");
    }
    if (!(gamma > 0.0 && gamma < 1.0)) {
        throw std::invalid_argument("gamma must lie in (0, 1)");
    }
    if (knn_k == 0) {
        throw std::invalid_argument("knn_k must be positive");
    }
    if (removal.trials == 0) {
        throw std::invalid_argument("removal trials must be positive");
    }
    if (metric != "auto" && metric != "raw" && metric != "projection" && metric != "student") {
        throw std::invalid_argument("metric must be auto, raw, projection, or student");
    }
    student.hyper.validate();
    if (student.arch.hidden.empty()) {
        throw std::invalid_argument("student hidden layout must be non-empty");
    }
    for (std::size_t w : student.arch.hidden) {
        if (w == 0) {
            throw std::invalid_argument("student hidden widths must be positive");
        }
    }
    if (attack.steps == 0) {
        throw std::invalid_argument("attack steps must be positive");
    }
    if (attack.step_sizes.empty()) {
        throw std::invalid_argument("attack step_sizes must be non-empty");
    }
    for (double s : attack.step_sizes) {
        if (!(s > 0.0)) {
            throw std::invalid_argument("attack step sizes must be positive");
        }
    }
    if (!(attack.detection_target > 0.0 && attack.detection_target < 1.0)) {
        throw std::invalid_argument("detection_target must lie in (0, 1)");
    }
    if (plan.seeds.empty() || plan.modes.empty() || plan.mean_points.empty()) {
        throw std::invalid_argument("experiment plan lists must be non-empty");
    }
    for (const auto& m : plan.modes) {
        shard_mode_from_name(m);
    }
    for (std::size_t m : plan.mean_points) {
        if (m == 0) {
            throw std::invalid_argument("experiment mean_points entries must be positive");
        }
    }
    if (!(plan.test_fraction > 0.0 && plan.test_fraction < 1.0)) {
        throw std::invalid_argument("test_fraction must lie in (0, 1)");
    }
}

ExperimentConfig default_config() {
    return ExperimentConfig{};
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
    nlohmann::json j;
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["dataset"] = {
        {"kind", cfg.dataset.kind},
        {"classes", cfg.dataset.mixture.class_count},
        {"dim", cfg.dataset.mixture.dim},
        {"points_per_class", cfg.dataset.mixture.points_per_class},
        {"image_like", cfg.dataset.mixture.image_like},
        {"noise_sigma", cfg.dataset.mixture.noise_sigma},
        {"mean_scale", cfg.dataset.mixture.mean_scale},
        {"mean_seed", cfg.dataset.mixture.mean_seed},
        {"idx_images", cfg.dataset.idx_images},
        {"idx_labels", cfg.dataset.idx_labels},
        {"idx_downscale", cfg.dataset.idx_downscale},
    };
    j["sharding"] = {
        {"clients", cfg.sharding.client_count},
        {"mean_points", cfg.sharding.mean_points},
        {"mode", shard_mode_name(cfg.sharding.mode)},
        {"classes_per_client", cfg.sharding.classes_per_client},
    };
    j["gan"] = {
        {"noise_dim", cfg.fed.noise_dim},
        {"gen_hidden", cfg.fed.gen_hidden},
        {"critic_hidden", cfg.fed.critic_hidden},
        {"rounds", cfg.fed.rounds},
        {"batch_size", cfg.fed.hyper.batch_size},
        {"critic_steps", cfg.fed.hyper.critic_steps},
        {"clip_bound", cfg.fed.hyper.clip_bound},
        {"local_epochs", cfg.fed.hyper.local_epochs},
        {"step_size", cfg.fed.hyper.adam.step_size},
        {"beta1", cfg.fed.hyper.adam.beta1},
        {"beta2", cfg.fed.hyper.adam.beta2},
        {"epsilon", cfg.fed.hyper.adam.epsilon},
        {"weighting", weight_policy_name(cfg.fed.weights)},
    };
    j["release"] = {
        {"artificial_per_real", cfg.artificial_per_real},
        {"oracle_generator", cfg.oracle_generator},
    };
    j["privacy"] = {
        {"gamma", cfg.gamma},
        {"knn_k", cfg.knn_k},
        {"removal_k", cfg.removal.k},
        {"trials", cfg.removal.trials},
        {"symmetrized", cfg.removal.symmetrized},
        {"metric", cfg.metric},
    };
    j["student"] = {
        {"hidden", cfg.student.arch.hidden},
        {"epochs", cfg.student.hyper.epochs},
        {"batch_size", cfg.student.hyper.batch_size},
        {"step_size", cfg.student.hyper.adam.step_size},
        {"beta1", cfg.student.hyper.adam.beta1},
        {"beta2", cfg.student.hyper.adam.beta2},
        {"epsilon", cfg.student.hyper.adam.epsilon},
    };
    j["attack"] = {
        {"steps", cfg.attack.steps},
        {"step_sizes", cfg.attack.step_sizes},
        {"detection_target", cfg.attack.detection_target},
    };
    j["experiment"] = {
        {"seeds", cfg.plan.seeds},
        {"modes", cfg.plan.modes},
        {"mean_points", cfg.plan.mean_points},
        {"test_fraction", cfg.plan.test_fraction},
    };
    return j;
}

ExperimentConfig config_from_json(const nlohmann::json& user) {
    nlohmann::json merged = config_to_json(default_config());
    check_against_schema(merged, user, "");
    merged.merge_patch(user);

    ExperimentConfig c;
    c.name = merged.at("name").get<std::string>();
    c.seed = merged.at("seed").get<std::uint64_t>();

    const auto& d = merged.at("dataset");
    c.dataset.kind = d.at("kind").get<std::string>();
    c.dataset.mixture.class_count = d.at("classes").get<std::size_t>();
    c.dataset.mixture.dim = d.at("dim").get<std::size_t>();
    c.dataset.mixture.points_per_class = d.at("points_per_class").get<std::size_t>();
    c.dataset.mixture.image_like = d.at("image_like").get<bool>();
    c.dataset.mixture.noise_sigma = d.at("noise_sigma").get<double>();
    c.dataset.mixture.mean_scale = d.at("mean_scale").get<double>();
    c.dataset.mixture.mean_seed = d.at("mean_seed").get<std::uint64_t>();
    c.dataset.idx_images = d.at("idx_images").get<std::string>();
    c.dataset.idx_labels = d.at("idx_labels").get<std::string>();
    c.dataset.idx_downscale = d.at("idx_downscale").get<std::size_t>();

    const auto& s = merged.at("sharding");
    c.sharding.client_count = s.at("clients").get<std::size_t>();
    c.sharding.mean_points = s.at("mean_points").get<std::size_t>();
    c.sharding.mode = shard_mode_from_name(s.at("mode").get<std::string>());
    c.sharding.classes_per_client = s.at("classes_per_client").get<std::size_t>();

    const auto& g = merged.at("gan");
    c.fed.noise_dim = g.at("noise_dim").get<std::size_t>();
    c.fed.gen_hidden = to_vector<std::size_t>(g.at("gen_hidden"));
    c.fed.critic_hidden = to_vector<std::size_t>(g.at("critic_hidden"));
    c.fed.rounds = g.at("rounds").get<std::size_t>();
    c.fed.hyper.batch_size = g.at("batch_size").get<std::size_t>();
    c.fed.hyper.critic_steps = g.at("critic_steps").get<std::size_t>();
    c.fed.hyper.clip_bound = g.at("clip_bound").get<double>();
    c.fed.hyper.local_epochs = g.at("local_epochs").get<std::size_t>();
    c.fed.hyper.adam.step_size = g.at("step_size").get<double>();
    c.fed.hyper.adam.beta1 = g.at("beta1").get<double>();
    c.fed.hyper.adam.beta2 = g.at("beta2").get<double>();
    c.fed.hyper.adam.epsilon = g.at("epsilon").get<double>();
    c.fed.weights = weight_policy_from_name(g.at("weighting").get<std::string>());

    const auto& r = merged.at("release");
    c.artificial_per_real = r.at("artificial_per_real").get<double>();
    c.oracle_generator = r.at("oracle_generator").get<bool>();

    const auto& p = merged.at("privacy");
    c.gamma = p.at("gamma").get<double>();
    c.knn_k = p.at("knn_k").get<std::size_t>();
    c.removal.k = p.at("removal_k").get<std::size_t>();
    c.removal.trials = p.at("trials").get<std::size_t>();
    c.removal.symmetrized = p.at("symmetrized").get<bool>();
    c.metric = p.at("metric").get<std::string>();

    const auto& st = merged.at("student");
    c.student.arch.hidden = to_vector<std::size_t>(st.at("hidden"));
    c.student.hyper.epochs = st.at("epochs").get<std::size_t>();
    c.student.hyper.batch_size = st.at("batch_size").get<std::size_t>();
    c.student.hyper.adam.step_size = st.at("step_size").get<double>();
    c.student.hyper.adam.beta1 = st.at("beta1").get<double>();
    c.student.hyper.adam.beta2 = st.at("beta2").get<double>();
    c.student.hyper.adam.epsilon = st.at("epsilon").get<double>();

    const auto& a = merged.at("attack");
    c.attack.steps = a.at("steps").get<std::size_t>();
    c.attack.step_sizes = to_vector<double>(a.at("step_sizes"));
    c.attack.detection_target = a.at("detection_target").get<double>();

    const auto& e = merged.at("experiment");
    c.plan.seeds = to_vector<std::uint64_t>(e.at("seeds"));
    c.plan.modes = to_vector<std::string>(e.at("modes"));
    c.plan.mean_points = to_vector<std::size_t>(e.at("mean_points"));
    c.plan.test_fraction = e.at("test_fraction").get<double>();

    c.validate();
    return c;
}

ExperimentConfig config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& err) {
        throw std::runtime_error(std::string("config is not valid JSON: ") + err.what());
    }
    return config_from_json(j);
}

std::string config_hash_hex(const ExperimentConfig& cfg) {
    nlohmann::json j = config_to_json(cfg);
    j["seed"] = 0;
    const std::string canonical = j.dump();
    const std::uint64_t h = Rng::fnv1a64(canonical);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

}  // namespace fedsynth
