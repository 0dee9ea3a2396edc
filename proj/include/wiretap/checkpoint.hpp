#pragma once

// On-disk persistence for trained codec sets.
//
// <dir>/manifest.json          config, config_hash, algorithm, model file list with checksums
// <dir>/user<l>_encoder.json   one checkpoint per model
// <dir>/user<l>_decoder.json
// <dir>/training.json          wall-clock training time (kept out of the manifest so
//                              reruns produce byte-identical manifests and checkpoints)
//
// Doubles are written by nlohmann::json with shortest round-trip formatting, so a
// load(save(model)) round trip is bit-exact.

#include <filesystem>
#include <string>
#include <vector>

#include "wiretap/config.hpp"
#include "wiretap/error.hpp"
#include "wiretap/mlp.hpp"
#include "wiretap/reliability.hpp"

namespace wiretap {

inline constexpr const char* checkpoint_format = "wiretap-mlp";
inline constexpr const char* manifest_format = "wiretap-manifest";
inline constexpr int checkpoint_version = 1;

struct CheckpointMeta {
    std::string config_hash;
    std::string role;  // encoder | decoder | free-form
    std::size_t user = 0;
    std::uint64_t rng_seed = 0;
    AdamConfig optimizer;
};

inline json model_to_json(const MlpModel& model, const CheckpointMeta& meta) {
    json layers = json::array();
    for (const auto& l : model.layers()) {
        std::vector<double> w(l.weights.data(), l.weights.data() + l.weights.size());  // row-major
        std::vector<double> b(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back({{"in", l.in_dim()},
                          {"out", l.out_dim()},
                          {"activation", to_string(l.activation)},
                          {"power", l.power},
                          {"weights", w},
                          {"bias", b}});
    }
    return json{{"format", checkpoint_format},
                {"version", checkpoint_version},
                {"config_hash", meta.config_hash},
                {"role", meta.role},
                {"user", meta.user},
                {"rng_seed", meta.rng_seed},
                {"optimizer",
                 {{"name", "adam"},
                  {"learning_rate", meta.optimizer.learning_rate},
                  {"beta1", meta.optimizer.beta1},
                  {"beta2", meta.optimizer.beta2},
                  {"epsilon", meta.optimizer.epsilon}}},
                {"layers", layers}};
}

inline MlpModel model_from_json(const json& j, CheckpointMeta* meta = nullptr) {
    try {
        if (j.at("format").get<std::string>() != checkpoint_format) throw integrity_error("checkpoint: unknown format");
        if (j.at("version").get<int>() != checkpoint_version)
            throw integrity_error("checkpoint: unsupported version " + j.at("version").dump());
        std::vector<DenseLayer> layers;
        for (const auto& jl : j.at("layers")) {
            DenseLayer l;
            const auto in = jl.at("in").get<Eigen::Index>();
            const auto out = jl.at("out").get<Eigen::Index>();
            const auto w = jl.at("weights").get<std::vector<double>>();
            const auto b = jl.at("bias").get<std::vector<double>>();
            if (in <= 0 || out <= 0 || w.size() != static_cast<std::size_t>(in * out) ||
                b.size() != static_cast<std::size_t>(out))
                throw integrity_error("checkpoint: layer dimensions do not match stored values");
            l.weights = Eigen::Map<const Tensor2D>(w.data(), in, out);
            l.bias = Eigen::Map<const RowVector>(b.data(), out);
            l.activation = parse_activation(jl.at("activation").get<std::string>());
            l.power = jl.at("power").get<double>();
            layers.push_back(std::move(l));
        }
        if (meta != nullptr) {
            meta->config_hash = j.at("config_hash").get<std::string>();
            meta->role = j.at("role").get<std::string>();
            meta->user = j.at("user").get<std::size_t>();
            meta->rng_seed = j.at("rng_seed").get<std::uint64_t>();
            const json& opt = j.at("optimizer");
            meta->optimizer = AdamConfig{opt.at("learning_rate").get<double>(), opt.at("beta1").get<double>(),
                                         opt.at("beta2").get<double>(), opt.at("epsilon").get<double>()};
        }
        try {
            return MlpModel(std::move(layers));
        } catch (const usage_error& e) {
            throw integrity_error(std::string("checkpoint: ") + e.what());
        }
    } catch (const json::exception& e) {
        throw integrity_error(std::string("checkpoint: ") + e.what());
    } catch (const usage_error& e) {
        throw integrity_error(std::string("checkpoint: ") + e.what());
    }
}

inline std::string dump_json(const json& j) { return j.dump(1) + "\n"; }

inline void save_model(const std::string& path, const MlpModel& model, const CheckpointMeta& meta) {
    write_text_file(path, dump_json(model_to_json(model, meta)));
}

inline MlpModel load_model(const std::string& path, CheckpointMeta* meta = nullptr) {
    std::string text;
    try {
        text = read_text_file(path);
    } catch (const usage_error& e) {
        throw integrity_error(e.what());
    }
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw integrity_error("checkpoint '" + path + "': " + e.what());
    }
    return model_from_json(j, meta);
}

namespace detail {

inline std::string model_file(std::size_t user, const char* role) {
    return "user" + std::to_string(user + 1) + "_" + role + ".json";
}

inline std::string checksum(const std::string& text) { return hex64(fnv1a64(text)); }

}  // namespace detail

// Writes checkpoints and manifest into `dir` (created if needed). Returns the manifest path.
inline std::string save_codec_set(const CodecSet& set, const std::string& dir) {
    if (!set.trained) throw usage_error("save_codec_set: codecs are not trained");
    std::filesystem::create_directories(dir);
    const std::string hash = config_hash(set.config);
    const AdamConfig optimizer{set.config.train.learning_rate};
    json models = json::array();
    for (std::size_t l = 0; l < set.codecs.size(); ++l) {
        json entry{{"user", l + 1}};
        for (const char* role : {"encoder", "decoder"}) {
            const MlpModel& m = role[0] == 'e' ? set.codecs[l].encoder : set.codecs[l].decoder;
            const std::string file = detail::model_file(l, role);
            const std::string text = dump_json(model_to_json(m, {hash, role, l + 1, set.config.train.seed, optimizer}));
            write_text_file(dir + "/" + file, text);
            entry[role] = {{"file", file}, {"checksum", detail::checksum(text)}};
        }
        models.push_back(entry);
    }
    const json manifest{{"format", manifest_format},
                        {"version", checkpoint_version},
                        {"config", set.config},
                        {"config_hash", hash},
                        {"algorithm", to_string(set.algorithm)},
                        {"final_loss", set.final_loss},
                        {"models", models}};
    const std::string path = dir + "/manifest.json";
    write_text_file(path, dump_json(manifest));
    write_text_file(dir + "/training.json",
                    dump_json(json{{"config_hash", hash},
                                   {"algorithm", to_string(set.algorithm)},
                                   {"training_seconds", set.training_seconds}}));
    return path;
}

// Loads a codec set and verifies every binding: manifest config vs its hash, file
// checksums, per-checkpoint hashes, and model shapes vs the config.
inline CodecSet load_codec_set(const std::string& manifest_path) {
    std::string text;
    try {
        text = read_text_file(manifest_path);
    } catch (const usage_error& e) {
        throw usage_error(std::string("manifest: ") + e.what());
    }
    const json manifest = parse_json_text(text, manifest_path);
    const std::string dir = std::filesystem::path(manifest_path).parent_path().string();
    const std::string base = dir.empty() ? "." : dir;
    CodecSet set;
    try {
        if (manifest.at("format").get<std::string>() != manifest_format) throw integrity_error("manifest: unknown format");
        try {
            set.config = manifest.at("config").get<CodeConfig>();
            set.config.validate();
        } catch (const usage_error& e) {
            throw integrity_error(std::string("manifest: ") + e.what());
        }
        const std::string hash = manifest.at("config_hash").get<std::string>();
        if (hash != config_hash(set.config))
            throw integrity_error("manifest: config_hash " + hash + " does not match its config (" +
                                  config_hash(set.config) + ")");
        set.algorithm = parse_algorithm(manifest.at("algorithm").get<std::string>());
        set.final_loss = manifest.value("final_loss", set.final_loss);
        const json& models = manifest.at("models");
        if (models.size() != set.config.L()) throw integrity_error("manifest: expected one model entry per user");
        for (std::size_t l = 0; l < models.size(); ++l) {
            CodecPair pair;
            for (const char* role : {"encoder", "decoder"}) {
                const json& e = models[l].at(role);
                const std::string path = base + "/" + e.at("file").get<std::string>();
                std::string body;
                try {
                    body = read_text_file(path);
                } catch (const usage_error& ex) {
                    throw integrity_error(ex.what());
                }
                if (detail::checksum(body) != e.at("checksum").get<std::string>())
                    throw integrity_error("checkpoint '" + path + "' does not match its manifest checksum");
                CheckpointMeta meta;
                json parsed;
                try {
                    parsed = json::parse(body);
                } catch (const json::exception& ex) {
                    throw integrity_error("checkpoint '" + path + "': " + ex.what());
                }
                MlpModel m = model_from_json(parsed, &meta);
                if (meta.config_hash != hash)
                    throw integrity_error("checkpoint '" + path + "' was trained for config " + meta.config_hash +
                                          ", manifest has " + hash);
                (role[0] == 'e' ? pair.encoder : pair.decoder) = std::move(m);
            }
            const auto card = static_cast<Eigen::Index>(set.config.cardinality(l));
            if (pair.encoder.input_dim() != card || pair.encoder.output_dim() != set.config.n ||
                pair.decoder.input_dim() != set.config.n || pair.decoder.output_dim() != card ||
                pair.encoder.layers().back().activation != Activation::power_norm ||
                pair.decoder.layers().back().activation != Activation::softmax)
                throw integrity_error("checkpoint shapes for user " + std::to_string(l + 1) + " do not match the config");
            set.codecs.push_back(std::move(pair));
        }
    } catch (const json::exception& e) {
        throw integrity_error(std::string("manifest: ") + e.what());
    }
    set.trained = true;
    const std::string timing = base + "/training.json";
    if (std::filesystem::exists(timing)) {
        try {
            set.training_seconds = json::parse(read_text_file(timing)).value("training_seconds", 0.0);
        } catch (const std::exception&) {
        }
    }
    return set;
}

}  // namespace wiretap
