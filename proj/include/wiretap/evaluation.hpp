#pragma once

// Monte-Carlo error rates, achievability tuples, CSV reports and sweeps.
//
// Error-rate confidence: Wald interval 1.96 * sqrt(p (1 - p) / N), where p is
// computed from max(errors, 10) so that rates with few observed errors still
// carry a meaningful width.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "wiretap/channel.hpp"
#include "wiretap/config.hpp"
#include "wiretap/error.hpp"
#include "wiretap/leakage.hpp"
#include "wiretap/parallel.hpp"
#include "wiretap/reliability.hpp"
#include "wiretap/security.hpp"

namespace wiretap {

inline constexpr std::size_t wald_error_floor = 10;
inline constexpr const char* csv_header = "config_hash,n,L,T,user,metric,value,ci_halfwidth,samples,preset";

struct RateEstimate {
    double value = 0.0;
    double ci_halfwidth = 0.0;
    std::size_t errors = 0;
    std::size_t samples = 0;

    static RateEstimate from_counts(std::size_t errors, std::size_t samples) {
        RateEstimate r;
        r.errors = errors;
        r.samples = samples;
        if (samples == 0) return r;
        const auto n = static_cast<double>(samples);
        r.value = static_cast<double>(errors) / n;
        const double p = std::min(1.0, static_cast<double>(std::max(errors, wald_error_floor)) / n);
        r.ci_halfwidth = 1.96 * std::sqrt(p * (1.0 - p) / n);
        return r;
    }
};

struct LeakageEntry {
    std::string estimator;  // mine | club
    double value = 0.0;     // nats, clamped at zero
    double raw = 0.0;
    double ci_halfwidth = 0.0;
    std::size_t samples = 0;
    std::string preset;
};

struct EvalReport {
    std::string config_hash;
    CodeConfig config;
    std::vector<RateEstimate> per_user;  // P_e^(S_i) for transmitters, P_e^(M_j) for helpers
    RateEstimate joint;                  // P[any reliability-layer message wrong]
    std::vector<LeakageEntry> leakage;
    std::uint64_t training_seed = 0;
    double runtime_seconds = 0.0;

    const LeakageEntry* find_leakage(const std::string& estimator) const {
        for (const auto& e : leakage)
            if (e.estimator == estimator) return &e;
        return nullptr;
    }
};

// Receiver under test: maps a batch of main-channel observations to per-user
// reliability-layer estimates. The sent messages are exposed so that oracle
// stubs can be plugged in; real receivers ignore them.
using ReceiverFn = std::function<std::vector<std::vector<std::uint32_t>>(
    const Tensor2D& y, const std::vector<std::vector<std::uint32_t>>& sent)>;

inline ReceiverFn sic_receiver(const std::vector<CodecPair>& codecs, const CodeConfig& config) {
    return [&codecs, &config](const Tensor2D& y, const std::vector<std::vector<std::uint32_t>>&) {
        return decode_sic(codecs, y, config);
    };
}

struct EvalOptions {
    std::size_t chunk = 4096;
    unsigned workers = 0;  // 0: worker_count()
};

// message -> phi -> encode -> main channel -> receiver -> psi. Transmitter
// secrets are cycled so every secret value gets the same number of trials.
inline EvalReport estimate_error_rates(const std::vector<CodecPair>& codecs, const CodeConfig& config,
                                       const ReceiverFn& receiver, std::size_t trials, Rng rng,
                                       EvalOptions options = {}) {
    config.validate();
    if (trials == 0) throw usage_error("estimate_error_rates: trials must be positive");
    if (codecs.size() != config.L()) throw usage_error("estimate_error_rates: one codec per user is required");
    const auto start = std::chrono::steady_clock::now();
    std::vector<HashPair> hashes;
    for (std::size_t i = 0; i < config.T; ++i) hashes.emplace_back(config.seeds[i], config.k[i]);

    const std::size_t chunk = std::max<std::size_t>(1, options.chunk);
    const std::size_t chunks = (trials + chunk - 1) / chunk;
    struct Counts {
        std::vector<std::size_t> user;
        std::size_t joint = 0;
    };
    std::vector<Counts> counts(chunks);
    parallel_for(
        chunks,
        [&](std::size_t c) {
            Rng chunk_rng = rng.derive("eval_chunk", c);
            Rng local_rng = chunk_rng.derive("local_randomness");
            Rng msg_rng = chunk_rng.derive("messages");
            Rng noise_rng = chunk_rng.derive("noise");
            const std::size_t first = c * chunk;
            const std::size_t rows = std::min(chunk, trials - first);
            std::vector<std::vector<std::uint32_t>> sent(config.L()), secrets(config.T);
            std::vector<Tensor2D> x(config.L());
            for (std::size_t l = 0; l < config.L(); ++l) {
                sent[l].resize(rows);
                if (config.is_transmitter(l)) {
                    const HashPair& hash = hashes[l];
                    secrets[l].resize(rows);
                    for (std::size_t r = 0; r < rows; ++r) {
                        const auto s = static_cast<std::uint32_t>((first + r) % (1ULL << hash.k1()));
                        const auto b = static_cast<std::uint32_t>(local_rng.below(1ULL << (hash.q1() - hash.k1())));
                        secrets[l][r] = s;
                        sent[l][r] = hash.phi(s, b);
                    }
                } else {
                    sent[l] = detail::draw_messages(msg_rng, config.cardinality(l), rows);
                }
                x[l] = encode_messages(codecs[l], sent[l]);
            }
            const Tensor2D y = transmit_main(x, config.channel, noise_rng);
            const auto decoded = receiver(y, sent);
            Counts& out = counts[c];
            out.user.assign(config.L(), 0);
            for (std::size_t r = 0; r < rows; ++r) {
                bool any = false;
                for (std::size_t l = 0; l < config.L(); ++l) {
                    any = any || decoded[l][r] != sent[l][r];
                    const bool wrong = config.is_transmitter(l) ? hashes[l].psi(decoded[l][r]) != secrets[l][r]
                                                                : decoded[l][r] != sent[l][r];
                    out.user[l] += wrong ? 1 : 0;
                }
                out.joint += any ? 1 : 0;
            }
        },
        options.workers == 0 ? worker_count() : options.workers);

    EvalReport report;
    report.config = config;
    report.config_hash = config_hash(config);
    report.training_seed = config.train.seed;
    std::vector<std::size_t> user_errors(config.L(), 0);
    std::size_t joint_errors = 0;
    for (const auto& c : counts) {
        for (std::size_t l = 0; l < config.L(); ++l) user_errors[l] += c.user[l];
        joint_errors += c.joint;
    }
    for (std::size_t l = 0; l < config.L(); ++l) report.per_user.push_back(RateEstimate::from_counts(user_errors[l], trials));
    report.joint = RateEstimate::from_counts(joint_errors, trials);
    report.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

inline EvalReport estimate_error_rates(const CodecSet& set, std::size_t trials, Rng rng, EvalOptions options = {}) {
    if (!set.trained) throw usage_error("estimate_error_rates: codecs are not trained");
    return estimate_error_rates(set.codecs, set.config, sic_receiver(set.codecs, set.config), trials, rng, options);
}

inline LeakageEntry to_leakage_entry(const std::string& estimator, const LeakageEstimate& e, const std::string& preset) {
    return LeakageEntry{estimator, e.value, e.raw, e.ci_halfwidth, e.samples, preset};
}

// Collects one SampleSet and runs the requested estimators on it.
inline std::vector<LeakageEntry> estimate_leakage(const CodecSet& set, const std::string& estimator,
                                                  const EstimatorPreset& preset, std::size_t samples, Rng rng) {
    if (estimator != "mine" && estimator != "club" && estimator != "both")
        throw usage_error("unknown estimator '" + estimator + "' (expected mine, club or both)");
    const SampleSet data = collect_samples(set, samples, rng.derive("samples"));
    std::vector<LeakageEntry> out;
    if (estimator == "mine" || estimator == "both")
        out.push_back(to_leakage_entry("mine", mine_estimate(data, preset.mine, rng.derive("mine")), preset.name));
    if (estimator == "club" || estimator == "both")
        out.push_back(to_leakage_entry("club", club_estimate(data, preset.club, rng.derive("club")), preset.name));
    return out;
}

struct AchievabilityTuple {
    std::vector<double> rates;     // k_i/n for transmitters, q_j/n for helpers
    std::vector<double> epsilons;  // measured P_e per user
    double delta = 0.0;            // leakage in nats
    std::vector<double> powers;
    std::string estimator;
};

inline AchievabilityTuple achievability_report(const EvalReport& report, const std::string& estimator = "mine") {
    const CodeConfig& c = report.config;
    if (report.per_user.size() != c.L()) throw usage_error("achievability_report: report is incomplete");
    const LeakageEntry* leak = report.find_leakage(estimator);
    if (leak == nullptr) throw usage_error("achievability_report: report has no '" + estimator + "' leakage entry");
    AchievabilityTuple t;
    for (std::size_t l = 0; l < c.L(); ++l) {
        const unsigned bits = c.is_transmitter(l) ? c.k[l] : c.q[l];
        t.rates.push_back(static_cast<double>(bits) / c.n);
        t.epsilons.push_back(report.per_user[l].value);
        t.powers.push_back(c.power[l]);
    }
    t.delta = leak->value;
    t.estimator = estimator;
    return t;
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string format_tuple(const AchievabilityTuple& t) {
    std::ostringstream out;
    auto list = [&](const std::vector<double>& v) {
        out << '(';
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? ", " : "") << format_number(v[i]);
        out << ')';
    };
    out << "rates=";
    list(t.rates);
    out << " epsilons=";
    list(t.epsilons);
    out << " delta=" << format_number(t.delta) << " (" << t.estimator << ") powers=";
    list(t.powers);
    return out.str();
}

inline std::string csv_row(const std::string& hash, const CodeConfig& c, const std::string& user, const std::string& metric,
                           double value, double ci, std::size_t samples, const std::string& preset) {
    std::ostringstream row;
    row << hash << ',' << c.n << ',' << c.L() << ',' << c.T << ',' << user << ',' << metric << ','
        << format_number(value) << ',' << format_number(ci) << ',' << samples << ',' << preset << '\n';
    return row.str();
}

inline std::string error_rows_csv(const EvalReport& r) {
    std::string out;
    const CodeConfig& c = r.config;
    for (std::size_t l = 0; l < r.per_user.size(); ++l) {
        const auto& e = r.per_user[l];
        out += csv_row(r.config_hash, c, std::to_string(l + 1), c.is_transmitter(l) ? "pe_S" : "pe_M", e.value,
                       e.ci_halfwidth, e.samples, "-");
    }
    out += csv_row(r.config_hash, c, "all", "pe_joint", r.joint.value, r.joint.ci_halfwidth, r.joint.samples, "-");
    return out;
}

inline std::string leakage_rows_csv(const EvalReport& r) {
    std::string out;
    for (const auto& e : r.leakage)
        out += csv_row(r.config_hash, r.config, "secret", "leakage_" + e.estimator, e.value, e.ci_halfwidth, e.samples,
                       e.preset);
    return out;
}

inline std::string to_csv(const EvalReport& r, bool with_header = true) {
    return (with_header ? std::string(csv_header) + "\n" : std::string()) + error_rows_csv(r) + leakage_rows_csv(r);
}

// ------------------------------------------------------------------ sweeps

enum class SweepAxis { blocklength, helper_count, power, gains };

inline SweepAxis parse_axis(const std::string& name) {
    if (name == "blocklength") return SweepAxis::blocklength;
    if (name == "helper_count") return SweepAxis::helper_count;
    if (name == "power") return SweepAxis::power;
    if (name == "gains") return SweepAxis::gains;
    throw usage_error("unknown sweep axis '" + name + "' (expected blocklength, helper_count, power or gains)");
}

inline std::string to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::blocklength: return "blocklength";
        case SweepAxis::helper_count: return "helper_count";
        case SweepAxis::power: return "power";
        case SweepAxis::gains: return "gains";
    }
    return "?";
}

namespace detail {

inline double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw usage_error("cannot parse " + what + " from '" + text + "'");
    }
}

inline unsigned parse_unsigned(const std::string& text, const std::string& what) {
    const double v = parse_double(text, what);
    if (v < 0 || v != std::floor(v)) throw usage_error(what + " must be a non-negative integer: '" + text + "'");
    return static_cast<unsigned>(v);
}

// "g2=0.3" -> ('g', 1, 0.3); user index is 1-based in the text.
struct Assignment {
    char field = 0;
    std::size_t user = 0;
    double value = 0.0;
};

inline std::optional<Assignment> parse_assignment(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos) return std::nullopt;
    if (eq < 2) throw usage_error("malformed grid assignment '" + text + "'");
    Assignment a;
    a.field = text[0];
    const unsigned user = parse_unsigned(text.substr(1, eq - 1), "user index");
    if (user < 1) throw usage_error("user indices start at 1: '" + text + "'");
    a.user = user - 1;
    a.value = parse_double(text.substr(eq + 1), "grid value");
    return a;
}

}  // namespace detail

// Grid point syntax per axis:
//   blocklength   "n" or "n:q" (q applied to every user, seeds reset to the identity)
//   helper_count  number of helpers; each copies the first helper of the base config
//   power         "P" for every helper, or "P<i>=x" for user i
//   gains         "g" for the transmitter's eavesdropper gain g1, or "h<i>=x" / "g<i>=x"
inline CodeConfig apply_axis(const CodeConfig& base, SweepAxis axis, const std::string& point) {
    CodeConfig c = base;
    switch (axis) {
        case SweepAxis::blocklength: {
            const auto colon = point.find(':');
            c.n = detail::parse_unsigned(point.substr(0, colon), "blocklength");
            if (colon != std::string::npos) {
                const unsigned q = detail::parse_unsigned(point.substr(colon + 1), "message width");
                for (auto& width : c.q) width = q;
                for (std::size_t i = 0; i < c.T; ++i) c.seeds[i] = Seed(1, q);
            }
            break;
        }
        case SweepAxis::helper_count: {
            const unsigned helpers = detail::parse_unsigned(point, "helper count");
            if (helpers > 0 && base.L() <= base.T)
                throw usage_error("helper_count sweep needs a base config with at least one helper to copy");
            const std::size_t proto = base.T;
            c = without_helpers(base);
            for (unsigned j = 0; j < helpers; ++j) {
                c.q.push_back(base.q[proto]);
                c.power.push_back(base.power[proto]);
                c.channel.h.push_back(base.channel.h[proto]);
                c.channel.g.push_back(base.channel.g[proto]);
            }
            break;
        }
        case SweepAxis::power: {
            if (const auto a = detail::parse_assignment(point)) {
                if (a->field != 'P' || a->user >= c.L()) throw usage_error("power grid expects 'P<i>=x': '" + point + "'");
                c.power[a->user] = a->value;
            } else {
                const double p = detail::parse_double(point, "power");
                for (std::size_t l = c.T; l < c.L(); ++l) c.power[l] = p;
            }
            break;
        }
        case SweepAxis::gains: {
            if (const auto a = detail::parse_assignment(point)) {
                if ((a->field != 'h' && a->field != 'g') || a->user >= c.L())
                    throw usage_error("gains grid expects 'h<i>=x' or 'g<i>=x': '" + point + "'");
                (a->field == 'h' ? c.channel.h : c.channel.g)[a->user] = a->value;
            } else {
                c.channel.g[0] = detail::parse_double(point, "gain");
            }
            break;
        }
    }
    c.validate();
    return c;
}

struct SweepOptions {
    TrainAlgorithm algorithm = TrainAlgorithm::ptp;
    std::size_t trials = 100000;
    std::string estimator = "mine";  // mine | club | both | none
    EstimatorPreset preset = estimator_preset("desk");
    std::size_t samples = 0;         // 0: preset sample count
    std::uint64_t seed = 1;
    std::function<void(const std::string&)> log;
};

struct SweepPoint {
    std::string label;
    CodeConfig config;
    std::optional<EvalReport> report;
    std::string failure;
};

struct SweepResult {
    SweepAxis axis = SweepAxis::blocklength;
    std::vector<SweepPoint> points;
};

inline SweepResult sweep(SweepAxis axis, const std::vector<std::string>& grid, const CodeConfig& base,
                         const SweepOptions& options) {
    if (grid.empty()) throw usage_error("sweep: grid is empty");
    SweepResult result;
    result.axis = axis;
    const Rng master(options.seed);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        SweepPoint point;
        point.label = grid[i];
        point.config = apply_axis(base, axis, grid[i]);
        try {
            const CodecSet set = train(point.config, options.algorithm);
            EvalReport report = estimate_error_rates(set, options.trials, master.derive("eval", i));
            if (options.estimator != "none") {
                const std::size_t samples = options.samples != 0 ? options.samples : options.preset.samples;
                report.leakage =
                    estimate_leakage(set, options.estimator, options.preset, samples, master.derive("leakage", i));
            }
            point.report = std::move(report);
        } catch (const training_error& e) {
            point.failure = e.what();
        }
        if (options.log) options.log(to_string(axis) + "=" + point.label + (point.failure.empty() ? " done" : " FAILED: " + point.failure));
        result.points.push_back(std::move(point));
    }
    return result;
}

inline std::string to_csv(const SweepResult& result) {
    std::string out = std::string(csv_header) + "\n";
    for (const auto& p : result.points) {
        if (p.report) {
            out += error_rows_csv(*p.report) + leakage_rows_csv(*p.report);
        } else {
            out += csv_row(config_hash(p.config), p.config, "all", "training_failure", 1.0, 0.0, 0, "-");
        }
    }
    return out;
}

// axis value -> config_hash, so sweep rows can be joined back to grid points.
inline std::string sweep_index_csv(const SweepResult& result) {
    std::string out = "axis,point,config_hash\n";
    for (const auto& p : result.points) out += to_string(result.axis) + ',' + p.label + ',' + config_hash(p.config) + '\n';
    return out;
}

}  // namespace wiretap
