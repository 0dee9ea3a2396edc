// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "test_configs.hpp"
#include "wiretap/checkpoint.hpp"
#include "wiretap/cli.hpp"
#include "wiretap/evaluation.hpp"
#include "wiretap/gf2.hpp"
#include "wiretap/leakage.hpp"
#include "wiretap/reliability.hpp"
#include "wiretap/security.hpp"

using namespace wiretap;
namespace fs = std::filesystem;

namespace {

using clock_type = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::string& detail, clock_type::time_point start) {
    const double seconds = std::chrono::duration<double>(clock_type::now() - start).count();
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1fs", seconds);
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title << " | " << detail << " | " << buf
              << std::endl;
    if (!pass) ++failures;
}

std::string fmt(double v, const char* spec = "%.4g") {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

// ---------------------------------------------------------------- criterion 1

bool field_axioms(unsigned q) {
    const gf2::FieldSpec f(q);
    const std::uint32_t order = f.order();
    std::vector<std::uint32_t> mul(static_cast<std::size_t>(order) * order);
    for (std::uint32_t a = 0; a < order; ++a)
        for (std::uint32_t b = 0; b < order; ++b) mul[a * order + b] = gf2::gf_mul(f.element(a), f.element(b), f).value;
    for (std::uint32_t a = 0; a < order; ++a) {
        if (mul[a * order + 1] != a || mul[a * order] != 0) return false;
        if (a != 0 && mul[a * order + gf2::gf_inv(f.element(a), f).value] != 1) return false;
        for (std::uint32_t b = 0; b < order; ++b) {
            const std::uint32_t ab = mul[a * order + b];
            if (ab != mul[b * order + a]) return false;
            if (a != 0 && b != 0 && ab == 0) return false;  // no zero divisors
            for (std::uint32_t c = 0; c < order; ++c) {
                if (mul[ab * order + c] != mul[a * order + mul[b * order + c]]) return false;
                if (mul[a * order + (b ^ c)] != (ab ^ mul[a * order + c])) return false;
            }
        }
    }
    return true;
}

bool hash_round_trip(unsigned q1) {
    for (std::uint32_t lambda = 1; lambda < (1U << q1); ++lambda)
        for (unsigned k1 = 1; k1 <= q1; ++k1) {
            const HashPair pair(Seed(lambda, q1), k1);
            for (std::uint32_t s = 0; s < (1U << k1); ++s)
                for (std::uint32_t b = 0; b < (1U << (q1 - k1)); ++b)
                    if (pair.psi(pair.phi(s, b)) != s) return false;
        }
    return true;
}

// Largest collision probability over x != x' and every k1, relative to 2^-k1.
double worst_collision_ratio(unsigned q1) {
    const std::uint32_t order = 1U << q1;
    const gf2::FieldSpec f(q1);
    std::vector<std::uint32_t> product(static_cast<std::size_t>(order) * order);
    for (std::uint32_t l = 1; l < order; ++l)
        for (std::uint32_t v = 0; v < order; ++v) product[l * order + v] = gf2::gf_mul(f.element(l), f.element(v), f).value;
    double worst = 0.0;
    for (unsigned k1 = 1; k1 <= q1; ++k1) {
        const unsigned shift = q1 - k1;
        for (std::uint32_t x = 0; x < order; ++x)
            for (std::uint32_t y = x + 1; y < order; ++y) {
                std::size_t collisions = 0;
                for (std::uint32_t l = 1; l < order; ++l)
                    collisions += (product[l * order + x] >> shift) == (product[l * order + y] >> shift) ? 1 : 0;
                const double p = static_cast<double>(collisions) / static_cast<double>(order - 1);
                worst = std::max(worst, p * static_cast<double>(1U << k1));
            }
    }
    return worst;
}

void criterion_1() {
    const auto start = clock_type::now();
    bool pass = true;
    std::ostringstream detail;
    for (unsigned q : {4U, 6U, 8U}) {
        const bool axioms = field_axioms(q);
        const bool round_trip = hash_round_trip(q);
        const double ratio = worst_collision_ratio(q);
        pass = pass && axioms && round_trip && ratio <= 1.0;
        detail << "q1=" << q << " axioms=" << (axioms ? "ok" : "bad") << " psi(phi)=" << (round_trip ? "id" : "bad")
               << " max P[coll]*2^k1=" << fmt(ratio) << "; ";
    }
    const double seconds = std::chrono::duration<double>(clock_type::now() - start).count();
    report(1, pass && seconds < 60, "field axioms, hash round trip, 2-universality", detail.str(), start);
}

// ---------------------------------------------------------------- criterion 2

double gradient_error(Activation terminal, bool cross_entropy) {
    Rng rng(31);
    MlpModel model = MlpModel::build(6, {8, 7}, 5, terminal, rng, 2.0);
    Tensor2D input(9, 6), proj(9, 5);
    for (Eigen::Index i = 0; i < input.size(); ++i) input.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < proj.size(); ++i) proj.data()[i] = rng.normal();
    std::vector<std::uint32_t> labels;
    for (int i = 0; i < 9; ++i) labels.push_back(static_cast<std::uint32_t>(rng.below(5)));
    auto loss = [&](const Tensor2D& out) {
        return cross_entropy ? cross_entropy_loss(out, labels).loss : out.cwiseProduct(proj).sum();
    };
    ForwardCache cache;
    const Tensor2D out = forward(model, input, &cache);
    const MlpGradients g = cross_entropy ? backward(model, cache, cross_entropy_loss(out, labels).grad_logits,
                                                    GradientAt::terminal_pre_activation)
                                         : backward(model, cache, proj);
    const double h = 1e-6;
    double diff2 = 0, norm2 = 0;
    for (std::size_t k = 0; k < model.layers().size(); ++k) {
        const Eigen::Index count = model.layers()[k].weights.size();
        for (Eigen::Index i = 0; i < count; ++i) {
            double& w = model.mutable_layers()[k].weights.data()[i];
            const double saved = w;
            w = saved + h;
            const double up = loss(forward(model, input));
            w = saved - h;
            const double down = loss(forward(model, input));
            w = saved;
            const double numeric = (up - down) / (2 * h);
            diff2 += std::pow(g.weights[k].data()[i] - numeric, 2);
            norm2 += std::max(std::pow(g.weights[k].data()[i], 2), numeric * numeric);
        }
    }
    return std::sqrt(diff2 / std::max(norm2, 1e-300));
}

void criterion_2() {
    const auto start = clock_type::now();
    const double e_relu = gradient_error(Activation::relu, false);
    const double e_linear = gradient_error(Activation::linear, false);
    const double e_softmax = gradient_error(Activation::softmax, true);
    const double e_power = gradient_error(Activation::power_norm, false);
    const double worst_grad = std::max({e_relu, e_linear, e_softmax, e_power});

    CodeConfig c = wiretap::testing::reference_config();
    c.train.epochs = 2;
    const CodecSet set = train_ptp(c);
    double worst_power = 0.0;
    std::size_t codewords = 0;
    for (std::size_t l = 0; l < c.L(); ++l) {
        std::vector<std::uint32_t> all(c.cardinality(l));
        for (std::uint32_t m = 0; m < all.size(); ++m) all[m] = m;
        const Tensor2D x = encode_messages(set.codecs[l], all);
        for (Eigen::Index r = 0; r < x.rows(); ++r, ++codewords)
            worst_power = std::max(worst_power, std::abs(x.row(r).squaredNorm() - c.n * c.power[l]) / (c.n * c.power[l]));
    }
    report(2, worst_grad < 1e-4 && worst_power <= 1e-9, "gradient checks and power constraint",
           "rel grad err relu=" + fmt(e_relu) + " linear=" + fmt(e_linear) + " softmax+CE=" + fmt(e_softmax) +
               " power_norm=" + fmt(e_power) + "; max |‖x‖²-nP|/nP=" + fmt(worst_power) + " over " +
               std::to_string(codewords) + " codewords",
           start);
}

// ---------------------------------------------------------------- criteria 3, 4

struct ReferenceRun {
    CodecSet sic;
    CodecSet ptp;
    EvalReport sic_eval;
    EvalReport ptp_eval;
};

ReferenceRun criteria_3_and_4() {
    const auto start = clock_type::now();
    const CodeConfig c = wiretap::testing::reference_config();
    ReferenceRun run;
    run.sic = train_sic(c);
    run.ptp = train_ptp(c);
    const Rng eval_rng(77);
    run.sic_eval = estimate_error_rates(run.sic, 200000, eval_rng.derive("sic"));
    run.ptp_eval = estimate_error_rates(run.ptp, 200000, eval_rng.derive("ptp"));
    const double pe_sic = run.sic_eval.per_user[0].value;
    const double pe_ptp = run.ptp_eval.per_user[0].value;
    report(3, pe_sic <= 1e-2 && pe_ptp <= 1e-2, "reliability at (n,q1,q2)=(12,4,4), 100 epochs x 5e4 messages",
           "P_e(S) sic=" + fmt(pe_sic) + "±" + fmt(run.sic_eval.per_user[0].ci_halfwidth, "%.2g") +
               " ptp=" + fmt(pe_ptp) + "±" + fmt(run.ptp_eval.per_user[0].ci_halfwidth, "%.2g") +
               " (P_e(M) sic=" + fmt(run.sic_eval.per_user[1].value) + " ptp=" + fmt(run.ptp_eval.per_user[1].value) +
               ")",
           start);
    report(4, run.ptp.training_seconds < run.sic.training_seconds, "PTP trains faster than SIC",
           "ptp=" + fmt(run.ptp.training_seconds, "%.1f") + "s sic=" + fmt(run.sic.training_seconds, "%.1f") + "s",
           start);
    return run;
}

// ---------------------------------------------------------------- criterion 5

SampleSet scalar_channel(std::size_t l, double amplitude, double noise_var, Rng rng) {
    SampleSet s;
    s.secrets.resize(static_cast<Eigen::Index>(l), 1);
    s.observations.resize(static_cast<Eigen::Index>(l), 1);
    for (std::size_t i = 0; i < l; ++i) {
        const double bit = static_cast<double>(rng.below(2));
        s.secrets(static_cast<Eigen::Index>(i), 0) = bit;
        s.observations(static_cast<Eigen::Index>(i), 0) =
            amplitude * (2 * bit - 1) + (noise_var > 0 ? std::sqrt(noise_var) * rng.normal() : 0.0);
    }
    return s;
}

// I(X;Y) for equiprobable X = +-a and Y = X + N(0, s2), by Simpson quadrature of h(Y) - h(N).
double bi_awgn_oracle(double a, double s2) {
    const double sd = std::sqrt(s2);
    const double lo = -a - 12 * sd, hi = a + 12 * sd;
    const int intervals = 20000;
    const double step = (hi - lo) / intervals;
    auto density = [&](double y) {
        const double c = 1.0 / std::sqrt(2 * std::numbers::pi * s2);
        return 0.5 * c * (std::exp(-(y - a) * (y - a) / (2 * s2)) + std::exp(-(y + a) * (y + a) / (2 * s2)));
    };
    auto integrand = [&](double y) {
        const double p = density(y);
        return p > 0 ? -p * std::log(p) : 0.0;
    };
    double sum = integrand(lo) + integrand(hi);
    for (int i = 1; i < intervals; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(lo + i * step);
    const double h_y = sum * step / 3.0;
    return h_y - 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * s2);
}

void criterion_5() {
    const auto start = clock_type::now();
    const EstimatorPreset desk = estimator_preset("desk");
    const Rng rng(505);

    SampleSet independent = scalar_channel(desk.samples, 1.0, 1.0, rng.derive("indep_s"));
    independent.observations = scalar_channel(desk.samples, 1.0, 1.0, rng.derive("indep_z")).observations;
    const SampleSet copy = scalar_channel(desk.samples, 1.0, 0.0, rng.derive("copy"));
    const SampleSet awgn = scalar_channel(desk.samples, 1.0, 1.0, rng.derive("awgn"));

    const auto mi = mine_estimate(independent, desk.mine, rng.derive("mine_indep"));
    const auto mc = mine_estimate(copy, desk.mine, rng.derive("mine_copy"));
    const auto ma = mine_estimate(awgn, desk.mine, rng.derive("mine_awgn"));
    const auto ci = club_estimate(independent, desk.club, rng.derive("club_indep"));
    const auto cc = club_estimate(copy, desk.club, rng.derive("club_copy"));
    const auto ca = club_estimate(awgn, desk.club, rng.derive("club_awgn"));
    const double oracle = bi_awgn_oracle(1.0, 1.0);

    const bool indep_ok = std::abs(mi.raw) < 0.05;
    const bool copy_ok = std::abs(mc.raw - std::numbers::ln2) <= 0.1 * std::numbers::ln2;
    const bool awgn_ok = std::abs(ma.raw - oracle) <= 0.05 * oracle;
    const bool club_ok = ci.raw >= mi.raw - 0.05 && cc.raw >= mc.raw - 0.05 && ca.raw >= ma.raw - 0.05;
    report(5, indep_ok && copy_ok && awgn_ok && club_ok, "estimator sanity (desk preset)",
           "MINE indep=" + fmt(mi.raw) + " copy=" + fmt(mc.raw) + " (ln2=" + fmt(std::numbers::ln2) + ") bi-awgn=" +
               fmt(ma.raw) + " (oracle " + fmt(oracle, "%.5f") + "); CLUB indep=" + fmt(ci.raw) + " copy=" + fmt(cc.raw) +
               " bi-awgn=" + fmt(ca.raw),
           start);
}

// ---------------------------------------------------------------- criteria 6, 7

struct LeakagePoint {
    LeakageEstimate mine;
    LeakageEstimate club;
};

LeakagePoint leakage_of(const CodecSet& set, const std::string& tag) {
    const EstimatorPreset desk = estimator_preset("desk");
    const Rng rng = Rng(606).derive(tag);
    const SampleSet samples = collect_samples(set, desk.samples, rng.derive("samples"));
    return {mine_estimate(samples, desk.mine, rng.derive("mine")), club_estimate(samples, desk.club, rng.derive("club"))};
}

LeakagePoint criterion_6(const ReferenceRun& ref) {
    const auto start = clock_type::now();
    const CodecSet alone = train_ptp(without_helpers(ref.ptp.config));
    const LeakagePoint without = leakage_of(alone, "no_helper");
    const LeakagePoint with = leakage_of(ref.ptp, "helpers_1");
    const double gain = without.mine.raw - with.mine.raw;
    report(6, gain >= 0.1, "helper lowers leakage by >= 0.1 nats (n=12, g=(1,0.3))",
           "MINE no-helper=" + fmt(without.mine.raw) + "±" + fmt(without.mine.ci_halfwidth, "%.2g") + " helper=" +
               fmt(with.mine.raw) + "±" + fmt(with.mine.ci_halfwidth, "%.2g") + " gain=" + fmt(gain) +
               "; CLUB no-helper=" + fmt(without.club.raw) + " helper=" + fmt(with.club.raw),
           start);
    return with;
}

void criterion_7(const ReferenceRun& ref, const LeakagePoint& one_helper) {
    const auto start = clock_type::now();
    std::vector<LeakagePoint> leak{one_helper};
    std::vector<RateEstimate> pe{ref.ptp_eval.per_user[0]};
    const Rng eval_rng(707);
    for (unsigned helpers : {2U, 3U}) {
        const CodeConfig c = apply_axis(ref.ptp.config, SweepAxis::helper_count, std::to_string(helpers));
        const CodecSet set = train_ptp(c);
        leak.push_back(leakage_of(set, "helpers_" + std::to_string(helpers)));
        pe.push_back(estimate_error_rates(set, 200000, eval_rng.derive("helpers", helpers)).per_user[0]);
    }
    bool pass = true;
    std::ostringstream detail;
    for (std::size_t i = 0; i < leak.size(); ++i) {
        detail << "helpers=" << i + 1 << " leak=" << fmt(leak[i].mine.raw) << "±" << fmt(leak[i].mine.ci_halfwidth, "%.2g")
               << " P_e(S)=" << fmt(pe[i].value) << "±" << fmt(pe[i].ci_halfwidth, "%.2g") << "; ";
        if (i == 0) continue;
        const double leak_rise = leak[i].mine.raw - leak[i - 1].mine.raw;
        if (leak_rise > leak[i].mine.ci_halfwidth + leak[i - 1].mine.ci_halfwidth) pass = false;
        const double pe_drop = pe[i - 1].value - pe[i].value;
        if (pe_drop > pe[i].ci_halfwidth + pe[i - 1].ci_halfwidth) pass = false;
    }
    report(7, pass, "leakage non-increasing, P_e(S) non-decreasing in helper count", detail.str(), start);
}

// ---------------------------------------------------------------- criterion 8

int cli(std::vector<std::string> args) {
    args.insert(args.begin(), "wiretap_cli");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

void criterion_8() {
    const auto start = clock_type::now();
    const fs::path root = fs::temp_directory_path() / "wiretap_acceptance_determinism";
    fs::remove_all(root);
    fs::create_directories(root);
    ExperimentConfig e;
    e.code = wiretap::testing::tiny_config();
    e.code.train.epochs = 3;
    json j = e;
    j.erase("master_seed");
    j["train"].erase("seed");
    write_text_file((root / "config.json").string(), j.dump(2));
    const std::string config = (root / "config.json").string();

    bool pass = true;
    std::vector<std::string> compared;
    for (const char* algo : {"sic", "ptp"}) {
        std::vector<fs::path> dirs;
        for (int rerun = 0; rerun < 2; ++rerun) {
            const fs::path dir = root / (std::string(algo) + std::to_string(rerun));
            pass = pass && cli({"train", "--config", config, "--algo", algo, "--seed", "11", "--out", dir.string()}) == 0;
            const std::string manifest = (dir / "manifest.json").string();
            pass = pass && cli({"eval", "--manifest", manifest, "--trials", "20000", "--seed", "3"}) == 0;
            pass = pass && cli({"leakage", "--manifest", manifest, "--estimator", "both", "--preset", "smoke", "--seed",
                                "3"}) == 0;
            dirs.push_back(dir);
        }
        for (const auto& entry : fs::directory_iterator(dirs[0])) {
            const std::string name = entry.path().filename().string();
            if (name == "training.json") continue;  // wall-clock only
            const bool same = read_text_file(entry.path().string()) == read_text_file((dirs[1] / name).string());
            pass = pass && same;
            compared.push_back(std::string(algo) + "/" + name + (same ? "" : "(DIFF)"));
        }
    }
    for (int rerun = 0; rerun < 2; ++rerun)
        pass = pass && cli({"sweep", "--config", config, "--axis", "power", "--grid", "6,12", "--trials", "5000",
                            "--estimator", "mine", "--preset", "smoke", "--seed", "4", "--out",
                            (root / ("sweep" + std::to_string(rerun))).string()}) == 0;
    const bool sweep_same =
        read_text_file((root / "sweep0" / "sweep.csv").string()) == read_text_file((root / "sweep1" / "sweep.csv").string());
    pass = pass && sweep_same;
    std::ostringstream detail;
    detail << compared.size() << " artifacts identical across reruns";
    for (const auto& c : compared)
        if (c.find("DIFF") != std::string::npos) detail << " " << c;
    detail << "; sweep.csv " << (sweep_same ? "identical" : "DIFFERS");
    report(8, pass, "same master seed gives bit-identical CSV and checkpoints", detail.str(), start);
}

}  // namespace

int main() {
    std::cout << "acceptance run (" << worker_count() << " worker threads)" << std::endl;
    criterion_1();
    criterion_2();
    const ReferenceRun ref = criteria_3_and_4();
    criterion_5();
    const LeakagePoint one_helper = criterion_6(ref);
    criterion_7(ref, one_helper);
    criterion_8();
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
    return failures == 0 ? 0 : 1;
}
