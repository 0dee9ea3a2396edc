#pragma once

// Code and experiment configuration, its JSON schema and its content hash.
//
// Users are numbered 1..L in the order given; the first T users are the
// transmitters that carry secrets, the rest are helpers. Decoding order is
// derived from the received powers h_l * P_l and does not depend on the
// listing order beyond tie-breaking.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wiretap/channel.hpp"
#include "wiretap/error.hpp"
#include "wiretap/rng.hpp"
#include "wiretap/security.hpp"

namespace wiretap {

using json = nlohmann::json;

inline constexpr unsigned max_blocklength = 64;
inline constexpr unsigned max_message_bits = 16;

struct TrainConfig {
    unsigned epochs = 100;
    unsigned batch_size = 500;
    double learning_rate = 1e-3;
    unsigned messages_per_epoch = 50000;
    std::uint64_t seed = 1;
    unsigned hidden_layers = 2;
    unsigned hidden_width = 0;  // 0: max(128, 2 * message cardinality)

    void validate() const {
        if (epochs == 0 || batch_size == 0 || messages_per_epoch == 0 || !(learning_rate > 0.0))
            throw usage_error("train: epochs, batch_size, messages_per_epoch and learning_rate must be positive");
    }

    unsigned width_for(unsigned cardinality) const {
        return hidden_width != 0 ? hidden_width : std::max(128U, 2U * cardinality);
    }
};

struct CodeConfig {
    unsigned n = 12;
    unsigned T = 1;
    std::vector<unsigned> q;       // message bits per user
    std::vector<unsigned> k;       // secret bits per transmitter
    std::vector<double> power;     // P_l per user
    ChannelParams channel;
    std::vector<Seed> seeds;       // one per transmitter
    TrainConfig train;

    std::size_t L() const { return q.size(); }
    bool is_transmitter(std::size_t user) const { return user < T; }
    std::uint32_t cardinality(std::size_t user) const { return 1U << q.at(user); }

    // Strongest received power first; ties decode the higher-numbered user first.
    std::vector<std::size_t> decoding_order() const {
        std::vector<std::size_t> order(L());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double pa = channel.h[a] * power[a];
            const double pb = channel.h[b] * power[b];
            if (pa != pb) return pa > pb;
            return a > b;
        });
        return order;
    }

    void validate() const {
        if (n < 1 || n > max_blocklength) throw usage_error("config: blocklength n must be in 1..64");
        if (q.empty()) throw usage_error("config: at least one user is required");
        if (T < 1 || T > 2) throw usage_error("config: T (secret transmitters) must be 1 or 2");
        if (T > L()) throw usage_error("config: more transmitters than users");
        if (power.size() != L() || channel.h.size() != L() || channel.g.size() != L())
            throw usage_error("config: q, power, channel.h and channel.g must all have L entries");
        if (k.size() != T || seeds.size() != T) throw usage_error("config: k and seeds need one entry per transmitter");
        for (std::size_t l = 0; l < L(); ++l) {
            if (q[l] < 1 || q[l] > max_message_bits) throw usage_error("config: message widths q must be in 1..16");
            if (!(power[l] >= 0.0)) throw usage_error("config: powers must be non-negative");
        }
        for (std::size_t i = 0; i < T; ++i) {
            if (k[i] > q[i]) throw usage_error("config: secret width k exceeds q for transmitter " + std::to_string(i + 1));
            if (seeds[i].width() != q[i])
                throw usage_error("config: seed for transmitter " + std::to_string(i + 1) + " must have q=" +
                                  std::to_string(q[i]) + " bits");
        }
        channel.validate();
        train.validate();
    }
};

inline void to_json(json& j, const TrainConfig& t) {
    j = json{{"epochs", t.epochs},
             {"batch_size", t.batch_size},
             {"learning_rate", t.learning_rate},
             {"messages_per_epoch", t.messages_per_epoch},
             {"seed", t.seed},
             {"hidden_layers", t.hidden_layers},
             {"hidden_width", t.hidden_width}};
}

inline void from_json(const json& j, TrainConfig& t) {
    TrainConfig d;
    t.epochs = j.value("epochs", d.epochs);
    t.batch_size = j.value("batch_size", d.batch_size);
    t.learning_rate = j.value("learning_rate", d.learning_rate);
    t.messages_per_epoch = j.value("messages_per_epoch", d.messages_per_epoch);
    t.seed = j.value("seed", d.seed);
    t.hidden_layers = j.value("hidden_layers", d.hidden_layers);
    t.hidden_width = j.value("hidden_width", d.hidden_width);
}

inline void to_json(json& j, const CodeConfig& c) {
    std::vector<std::string> seeds;
    for (const auto& s : c.seeds) seeds.push_back(s.to_string());
    j = json{{"n", c.n},
             {"T", c.T},
             {"q", c.q},
             {"k", c.k},
             {"power", c.power},
             {"channel",
              {{"h", c.channel.h}, {"g", c.channel.g}, {"sigma2_Y", c.channel.sigma2_Y}, {"sigma2_Z", c.channel.sigma2_Z}}},
             {"seeds", seeds},
             {"train", c.train}};
}

inline void from_json(const json& j, CodeConfig& c) {
    try {
        c.n = j.at("n").get<unsigned>();
        c.T = j.value("T", 1U);
        c.q = j.at("q").get<std::vector<unsigned>>();
        c.k = j.at("k").get<std::vector<unsigned>>();
        c.power = j.at("power").get<std::vector<double>>();
        const json& ch = j.at("channel");
        c.channel.h = ch.at("h").get<std::vector<double>>();
        c.channel.g = ch.at("g").get<std::vector<double>>();
        c.channel.sigma2_Y = ch.at("sigma2_Y").get<double>();
        c.channel.sigma2_Z = ch.at("sigma2_Z").get<double>();
        c.seeds.clear();
        if (j.contains("seeds")) {
            for (const auto& s : j.at("seeds")) c.seeds.push_back(Seed::parse(s.get<std::string>()));
        } else {
            // identity seed for every transmitter
            for (std::size_t i = 0; i < c.T && i < c.q.size(); ++i) c.seeds.emplace_back(1U, c.q[i]);
        }
        c.train = j.contains("train") ? j.at("train").get<TrainConfig>() : TrainConfig{};
    } catch (const json::exception& e) {
        throw usage_error(std::string("config: ") + e.what());
    }
}

inline std::string hex64(std::uint64_t value) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
    return buf;
}

// FNV-1a over the canonical JSON dump.
inline std::string config_hash(const CodeConfig& config) { return hex64(fnv1a64(json(config).dump())); }

// Same pipeline with every helper removed (P = 0, no helper message).
inline CodeConfig without_helpers(const CodeConfig& config) {
    CodeConfig out = config;
    out.q.resize(config.T);
    out.power.resize(config.T);
    out.channel.h.resize(config.T);
    out.channel.g.resize(config.T);
    return out;
}

enum class Scenario { wiretap_helper, multi_helper, mac_wiretap };

inline std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::wiretap_helper: return "wiretap_helper";
        case Scenario::multi_helper: return "multi_helper";
        case Scenario::mac_wiretap: return "mac_wiretap";
    }
    return "?";
}

inline Scenario parse_scenario(const std::string& name) {
    if (name == "wiretap_helper") return Scenario::wiretap_helper;
    if (name == "multi_helper") return Scenario::multi_helper;
    if (name == "mac_wiretap") return Scenario::mac_wiretap;
    throw usage_error("unknown scenario '" + name + "'");
}

struct ExperimentConfig {
    Scenario scenario = Scenario::wiretap_helper;
    CodeConfig code;
    std::string estimator_preset = "desk";
    std::string output_dir = "out";
    std::uint64_t master_seed = 1;

    Rng master_rng() const { return Rng(master_seed); }

    // Training seed follows the master seed unless the config pins one.
    void apply_master_seed(std::uint64_t seed) {
        master_seed = seed;
        code.train.seed = master_rng().derive("train").next_u64();
    }

    void validate() const {
        code.validate();
        switch (scenario) {
            case Scenario::wiretap_helper:
                if (code.T != 1 || code.L() > 2) throw usage_error("wiretap_helper needs T=1 and at most one helper");
                break;
            case Scenario::multi_helper:
                if (code.T != 1) throw usage_error("multi_helper needs T=1");
                break;
            case Scenario::mac_wiretap:
                if (code.T != 2 || code.L() < 2) throw usage_error("mac_wiretap needs T=2 transmitters");
                break;
        }
    }
};

inline void to_json(json& j, const ExperimentConfig& e) {
    j = json(e.code);
    j["scenario"] = to_string(e.scenario);
    j["estimator"] = {{"preset", e.estimator_preset}};
    j["out"] = e.output_dir;
    j["master_seed"] = e.master_seed;
}

inline void from_json(const json& j, ExperimentConfig& e) {
    e.code = j.get<CodeConfig>();
    try {
        e.scenario = parse_scenario(j.value("scenario", std::string("wiretap_helper")));
        if (j.contains("estimator")) e.estimator_preset = j.at("estimator").value("preset", std::string("desk"));
        e.output_dir = j.value("out", std::string("out"));
        e.master_seed = j.value("master_seed", std::uint64_t{1});
        if (!(j.contains("train") && j.at("train").contains("seed"))) e.apply_master_seed(e.master_seed);
    } catch (const json::exception& ex) {
        throw usage_error(std::string("config: ") + ex.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw usage_error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw usage_error("cannot write '" + path + "'");
    out << text;
}

inline json parse_json_text(const std::string& text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw usage_error(what + ": " + e.what());
    }
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    ExperimentConfig e = parse_json_text(read_text_file(path), path).get<ExperimentConfig>();
    e.validate();
    return e;
}

}  // namespace wiretap
