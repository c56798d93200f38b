// ccv: conformal p-values for outlier detection.
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 validation failure.
// Relative output paths are resolved against $CCV_OUTPUT_DIR when it is set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ccv/adjust.hpp"
#include "ccv/bands.hpp"
#include "ccv/conformal.hpp"
#include "ccv/io.hpp"
#include "ccv/mtest.hpp"
#include "ccv/scoring.hpp"
#include "ccv/sim/experiments.hpp"
#include "ccv/validate.hpp"

#ifndef CCV_VERSION
#define CCV_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kUsage = 2;
constexpr int kData = 3;
constexpr int kValidation = 4;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

fs::path resolve(const std::string& p) {
    fs::path path(p);
    if (path.is_relative()) {
        if (const char* dir = std::getenv("CCV_OUTPUT_DIR"); dir && *dir) return fs::path(dir) / path;
    }
    return path;
}

struct Common {
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

void add_common(CLI::App* sub, Common& c) {
    sub->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
    sub->add_option("--threads", c.threads, "worker threads (results do not depend on this)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

// Collects what the manifest needs while a subcommand runs.
class Run {
public:
    Run(std::string subcommand, const CLI::App* sub, const Common& common, std::vector<std::string> argv)
        : start_(utc_now()) {
        manifest_["subcommand"] = std::move(subcommand);
        manifest_["version"] = CCV_VERSION;
        manifest_["argv"] = std::move(argv);
        manifest_["seed"] = common.seed;
        manifest_["threads"] = common.threads;
        json params = json::object();
        for (const auto* opt : sub->get_options()) {
            if (opt->get_lnames().empty()) continue;
            const auto& name = opt->get_lnames().front();
            if (name == "help") continue;
            if (opt->count() > 0) {
                const auto& r = opt->results();
                params[name] = r.size() == 1 ? json(r.front()) : json(r);
            } else if (!opt->get_default_str().empty()) {
                params[name] = opt->get_default_str();
            } else {
                params[name] = nullptr;
            }
        }
        manifest_["parameters"] = std::move(params);
    }

    void write(const fs::path& path, const std::string& contents) {
        ccv::io::write_file(path, contents);
        outputs_.push_back(path.string());
    }

    // "-" sends the text to stdout and records nothing.
    void emit(const std::string& target, const std::string& contents) {
        if (target == "-") {
            std::cout << contents;
            return;
        }
        write(resolve(target), contents);
    }

    json& results() { return manifest_["results"]; }

    void finish(const fs::path& manifest_path) {
        manifest_["started"] = start_;
        manifest_["finished"] = utc_now();
        manifest_["outputs"] = outputs_;
        ccv::io::write_file(manifest_path, manifest_.dump(2) + "\n");
        for (const auto& o : outputs_) std::cerr << "wrote " << o << "\n";
        std::cerr << "wrote " << manifest_path.string() << "\n";
    }

private:
    std::string start_;
    json manifest_;
    std::vector<std::string> outputs_;
};

fs::path manifest_for(const std::string& target, const std::string& subcommand) {
    if (target == "-") return resolve(subcommand + ".manifest.json");
    auto p = resolve(target);
    p.replace_extension(".manifest.json");
    return p;
}

std::string text(const auto& writer) {
    std::ostringstream out;
    writer(out);
    return out.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string tok; std::getline(ss, tok, ',');) {
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

ccv::conformal::CalibrationSet calibration_from(const std::string& path, const std::string& column) {
    auto scores = ccv::io::read_scores(path, column);
    if (scores.empty()) throw ccv::io::DataError(path + ": no calibration scores");
    try {
        return ccv::conformal::CalibrationSet(std::move(scores));
    } catch (const std::invalid_argument& e) {
        throw ccv::io::DataError(path + ": " + e.what());
    }
}

// --adjustment file, or --method with construction flags; n comes from the calibration set.
struct AdjustmentFlags {
    std::string file;
    std::string method;
    double delta = 0.1;
    std::size_t k = 0;
    std::size_t reps = 10000;

    void add(CLI::App* sub) {
        sub->add_option("--adjustment", file, "sequence CSV written by 'ccv adjust'");
        sub->add_option("--method", method, "build the sequence instead: simes, dkwm, asymptotic, monte-carlo, dempster");
        sub->add_option("--delta", delta, "miscoverage of the adjustment")->capture_default_str();
        sub->add_option("--k", k, "Simes k, 0 for ceil(n/2)")->capture_default_str();
        sub->add_option("--reps", reps, "Monte-Carlo reps for the monte-carlo method")->capture_default_str();
    }

    std::optional<ccv::adjust::AdjustmentSequence> load(std::size_t n, const Common& c) const {
        if (!file.empty() && !method.empty()) throw UsageError("give either --adjustment or --method, not both");
        if (!file.empty()) {
            auto seq = ccv::io::read_sequence(file);
            if (seq.n != n) {
                throw ccv::io::DataError("adjustment has n = " + std::to_string(seq.n) + " but the calibration set has " +
                                         std::to_string(n) + " scores");
            }
            return seq;
        }
        if (method.empty()) return std::nullopt;
        ccv::adjust::BuildOptions opts;
        opts.k = k;
        opts.reps = reps;
        opts.seed = c.seed;
        opts.threads = c.threads;
        return ccv::adjust::build(ccv::adjust::method_from_string(method), n, delta, opts);
    }
};

// ---------------------------------------------------------------- adjust

struct AdjustCmd {
    Common c;
    std::string method;
    std::size_t n = 0;
    double delta = 0.1;
    std::size_t k = 0;
    std::size_t reps = 10000;
    std::optional<double> b1;
    std::string out = "sequence.csv";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("adjust", "Build an adjustment sequence b_1..b_n");
        sub->add_option("--method", method, "simes, dkwm, asymptotic, monte-carlo, dempster")->required();
        sub->add_option("--n", n, "calibration size")->required();
        sub->add_option("--delta", delta)->capture_default_str();
        sub->add_option("--k", k, "Simes k, 0 for ceil(n/2)")->capture_default_str();
        sub->add_option("--reps", reps, "Monte-Carlo reps")->capture_default_str();
        sub->add_option("--b1", b1, "Dempster target b_1 (default: the Simes b_1)");
        sub->add_option("--out", out, "CSV path, '-' for stdout; the JSON sidecar goes next to it")
            ->capture_default_str();
        add_common(sub, c);
    }

    void run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("adjust", sub, c, argv);
        ccv::adjust::BuildOptions opts;
        opts.k = k;
        opts.reps = reps;
        opts.seed = c.seed;
        opts.threads = c.threads;
        opts.b1_target = b1;
        const auto seq = ccv::adjust::build(ccv::adjust::method_from_string(method), n, delta, opts);
        const auto csv = text([&](std::ostream& o) { ccv::io::write_sequence_csv(o, seq); });
        const auto meta = ccv::io::sequence_metadata(seq);
        r.emit(out, csv);
        if (out != "-") r.write(ccv::io::sidecar_path(resolve(out)), meta.dump(2) + "\n");
        r.results() = meta;
        r.results()["b1"] = seq.b.front();
        if (seq.warning) std::cerr << "warning: " << seq.note << "\n";
        r.finish(manifest_for(out, "adjust"));
    }
};

// ---------------------------------------------------------------- pvalues

struct PvaluesCmd {
    Common c;
    std::string cal;
    std::string test;
    std::string column;
    AdjustmentFlags adj;
    bool randomized = false;
    std::string out = "pvalues.csv";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("pvalues", "Marginal and calibration-conditional conformal p-values");
        sub->add_option("--cal", cal, "calibration scores CSV")->required();
        sub->add_option("--test", test, "test scores CSV")->required();
        sub->add_option("--column", column, "score column name (default: 'score', else the first column)");
        adj.add(sub);
        sub->add_flag("--randomized", randomized, "break ties with uniform draws");
        sub->add_option("--out", out, "CSV path, '-' for stdout")->capture_default_str();
        add_common(sub, c);
    }

    void run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("pvalues", sub, c, argv);
        const auto cs = calibration_from(cal, column);
        const auto tests = ccv::io::read_scores(test, column);
        const auto seq = adj.load(cs.size(), c);
        const auto marginal =
            ccv::conformal::marginal_pvalues_batch(cs, tests, ccv::stats::RandomStream(c.seed), randomized, c.threads);
        std::optional<ccv::conformal::PValueVector> conditional;
        if (seq) conditional = ccv::adjust::apply(*seq, marginal);
        r.emit(out, text([&](std::ostream& o) {
                   ccv::io::write_pvalues_csv(o, tests, marginal.values, conditional ? &conditional->values : nullptr);
               }));
        r.results() = {{"n_cal", cs.size()}, {"n_test", tests.size()},
                       {"adjustment", seq ? json(ccv::io::sequence_metadata(*seq)) : json()}};
        r.finish(manifest_for(out, "pvalues"));
    }
};

// ---------------------------------------------------------------- test

struct TestCmd {
    Common c;
    std::string pvalues;
    std::string column;
    std::string procedure;
    double alpha = 0.1;
    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<std::size_t> n_cal;
    std::string truth;
    std::string out = "rejections.csv";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("test", "Multiple testing and global tests on p-values");
        sub->add_option("--pvalues", pvalues, "p-value CSV (e.g. from 'ccv pvalues')")->required();
        sub->add_option("--column", column,
                        "p-value column (default: p_conditional, else p_marginal, else p, else the first column)");
        sub->add_option("--procedure", procedure)
            ->required()
            ->check(CLI::IsMember({"bh", "storey-bh", "fisher", "fisher-corrected", "stouffer", "simes-global",
                                   "harmonic"}));
        sub->add_option("--alpha", alpha)->capture_default_str();
        sub->add_option("--lambda", lambda, "Storey threshold (default: the on-grid value nearest 1/2, needs --n-cal)");
        sub->add_option("--gamma", gamma, "test-to-calibration ratio for fisher-corrected (default m / n-cal)");
        sub->add_option("--n-cal", n_cal, "calibration size behind the p-values");
        sub->add_option("--truth", truth, "CSV of 0-based indices of the true outliers");
        sub->add_option("--out", out, "rejection CSV path, '-' for stdout; metrics JSON goes next to it")
            ->capture_default_str();
        add_common(sub, c);
    }

    std::vector<double> load_p() const {
        const auto t = ccv::io::read_table_file(pvalues);
        std::string name = column;
        if (name.empty()) {
            for (const char* cand : {"p_conditional", "p_marginal", "p"}) {
                if (std::find(t.header.begin(), t.header.end(), cand) != t.header.end()) {
                    name = cand;
                    break;
                }
            }
        }
        auto p = ccv::io::numeric_column(t, name, pvalues);
        for (double v : p) {
            if (!(v > 0.0 && v <= 1.0)) throw ccv::io::DataError(pvalues + ": p-value outside (0, 1]");
        }
        return p;
    }

    void run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("test", sub, c, argv);
        const auto p = load_p();
        json metrics;
        if (procedure == "bh" || procedure == "storey-bh") {
            ccv::mtest::RejectionReport rep;
            if (procedure == "bh") {
                rep = ccv::mtest::bh(p, alpha);
            } else {
                if (!lambda && !n_cal) throw UsageError("storey-bh needs --lambda or --n-cal");
                const double lam = lambda ? *lambda : ccv::mtest::storey_default_lambda(*n_cal);
                rep = ccv::mtest::storey_bh(p, alpha, lam, n_cal);
            }
            if (!truth.empty()) {
                const auto idx = ccv::io::read_scores(truth);
                std::vector<std::size_t> t;
                for (double v : idx) {
                    if (v < 0 || v != std::floor(v) || v >= static_cast<double>(p.size())) {
                        throw ccv::io::DataError(truth + ": not a 0-based index below m: " + ccv::io::format_double(v));
                    }
                    t.push_back(static_cast<std::size_t>(v));
                }
                ccv::mtest::attach_metrics(rep, t, p.size());
            }
            if (rep.warning) std::cerr << "warning: " << rep.note << "\n";
            metrics = ccv::io::to_json(rep);
            r.emit(out, text([&](std::ostream& o) { ccv::io::write_rejections_csv(o, rep, p); }));
        } else {
            const auto method = ccv::mtest::global_method_from_string(procedure);
            double g = 0.0;
            if (method == ccv::mtest::GlobalMethod::fisher_corrected) {
                if (gamma) {
                    g = *gamma;
                } else if (n_cal) {
                    g = static_cast<double>(p.size()) / static_cast<double>(*n_cal);
                } else {
                    throw UsageError("fisher-corrected needs --gamma or --n-cal");
                }
            }
            if (p.empty()) throw ccv::io::DataError(pvalues + ": no p-values");
            metrics = ccv::io::to_json(ccv::mtest::global_test(method, p, alpha, g));
            metrics["m"] = p.size();
            if (method == ccv::mtest::GlobalMethod::fisher_corrected) metrics["gamma"] = g;
        }
        const fs::path json_path = out == "-" ? resolve("metrics.json") : resolve(out).replace_extension(".json");
        r.write(json_path, metrics.dump(2) + "\n");
        r.results() = metrics;
        r.finish(manifest_for(out, "test"));
    }
};

// ---------------------------------------------------------------- band

struct BandCmd {
    Common c;
    std::string cal;
    std::string column;
    AdjustmentFlags adj;
    std::optional<double> alpha;
    std::string out = "band.csv";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("band", "Uniform false-positive-rate confidence band");
        sub->add_option("--cal", cal, "calibration scores CSV")->required();
        sub->add_option("--column", column, "score column name");
        adj.add(sub);
        sub->add_option("--alpha", alpha, "also report the prediction-set threshold at this level");
        sub->add_option("--out", out, "CSV path, '-' for stdout")->capture_default_str();
        add_common(sub, c);
    }

    void run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("band", sub, c, argv);
        const auto cs = calibration_from(cal, column);
        const auto seq = adj.load(cs.size(), c);
        if (!seq) throw UsageError("band needs --adjustment or --method");
        const auto band = ccv::bands::fpr_band(cs, *seq);
        for (std::size_t i = 1; i < band.steps().size(); ++i) {
            if (band.steps()[i].bound < band.steps()[i - 1].bound) {
                throw std::logic_error("band is not nondecreasing");
            }
        }
        r.emit(out, text([&](std::ostream& o) { ccv::io::write_band_csv(o, band); }));
        r.results() = {{"n_cal", cs.size()}, {"steps", band.steps().size()},
                       {"adjustment", ccv::io::sequence_metadata(*seq)}};
        if (alpha) {
            const auto ps = ccv::bands::prediction_set(cs, *seq, *alpha);
            r.results()["prediction_set"] = {{"alpha", *alpha}, {"istar", ps.istar},
                                             {"threshold", ccv::io::format_double(ps.threshold)}};
        }
        r.finish(manifest_for(out, "band"));
    }
};

// ---------------------------------------------------------------- score

struct ScoreCmd {
    Common c;
    std::string train;
    std::string data;
    std::string scorer = "knn";
    std::size_t k = 10;
    double ridge = 1e-6;
    std::string out = "scores.csv";

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("score", "Fit a one-class scorer and score rows (smaller = more outlying)");
        sub->add_option("--train", train, "training feature CSV")->required();
        sub->add_option("--data", data, "feature CSV to score")->required();
        sub->add_option("--scorer", scorer)->check(CLI::IsMember({"knn", "mahalanobis"}))->capture_default_str();
        sub->add_option("--k", k, "neighbours for knn")->capture_default_str();
        sub->add_option("--ridge", ridge, "covariance ridge for mahalanobis")->capture_default_str();
        sub->add_option("--out", out, "CSV path, '-' for stdout")->capture_default_str();
        add_common(sub, c);
    }

    void run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("score", sub, c, argv);
        const auto tr = ccv::io::read_matrix(train);
        const auto x = ccv::io::read_matrix(data);
        if (tr.cols() != x.cols()) throw ccv::io::DataError("training and scored data differ in column count");
        const auto model = scorer == "knn" ? ccv::scoring::fit_knn(tr, k) : ccv::scoring::fit_mahalanobis(tr, ridge);
        const auto s = model.score_rows(x, c.threads);
        r.emit(out, text([&](std::ostream& o) {
                   o << "index,score\n";
                   for (std::size_t i = 0; i < s.size(); ++i) o << i << ',' << ccv::io::format_double(s[i]) << '\n';
               }));
        r.results() = {{"n_train", tr.rows()}, {"n_scored", x.rows()}, {"dim", tr.cols()}};
        r.finish(manifest_for(out, "score"));
    }
};

// ---------------------------------------------------------------- simulate

struct SimulateCmd {
    Common c;
    std::string suite;
    std::string outdir;
    ccv::sim::ExperimentConfig cfg;
    std::string methods;
    std::string procedures;
    std::vector<double> alphas;
    std::string scorer;
    std::string global = "fisher";
    bool fwer = false;

    // Suite-specific knobs; defaults depend on the suite.
    std::optional<std::size_t> n;
    std::vector<double> gammas;
    std::optional<std::size_t> reps;
    std::string transform = "identity";
    bool independent = false;
    std::vector<std::size_t> ns;
    std::optional<std::size_t> fisher_reps;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("simulate", "Monte-Carlo experiments");
        sub->add_option("--suite", suite)
            ->required()
            ->check(CLI::IsMember({"outlier", "batch", "fisher-null", "beta-fpr", "correlation", "power-curves"}));
        sub->add_option("--outdir", outdir, "output directory (default: simulate-<suite>)");
        sub->add_option("--practitioners", cfg.practitioners)->capture_default_str();
        sub->add_option("--test-sets", cfg.test_sets)->capture_default_str();
        sub->add_option("--n-train", cfg.n_train)->capture_default_str();
        sub->add_option("--n-cal", cfg.n_cal)->capture_default_str();
        sub->add_option("--n-test", cfg.n_test)->capture_default_str();
        sub->add_option("--outlier-fraction", cfg.outlier_fraction)->capture_default_str();
        sub->add_option("--a", cfg.signal, "outlier signal strength")->capture_default_str();
        sub->add_option("--dim", cfg.dim)->capture_default_str();
        sub->add_option("--centers", cfg.centers)->capture_default_str();
        sub->add_option("--box", cfg.box)->capture_default_str();
        sub->add_option("--scorer", scorer, "oracle, knn, mahalanobis (default oracle)");
        sub->add_option("--knn-k", cfg.knn_k)->capture_default_str();
        sub->add_option("--methods", methods, "comma list of p-value methods");
        sub->add_option("--procedures", procedures, "comma list: bh, storey-bh");
        sub->add_option("--alpha", alphas, "level(s); suite default when omitted")->delimiter(',');
        sub->add_option("--lambda", cfg.lambda, "Storey threshold");
        sub->add_option("--delta", cfg.delta)->capture_default_str();
        sub->add_option("--simes-k", cfg.simes_k)->capture_default_str();
        sub->add_option("--mc-reps", cfg.mc_reps)->capture_default_str();
        sub->add_option("--batch-size", cfg.batch_size)->capture_default_str();
        sub->add_option("--batch-outlier-share", cfg.batch_outlier_share)->capture_default_str();
        sub->add_option("--global", global, "batch combination test")->capture_default_str();
        sub->add_flag("--fwer", fwer, "batch suite: all-null FWER mode with a fixed cut");
        sub->add_option("--fwer-cut", cfg.fwer_cut)->capture_default_str();
        sub->add_flag("--uniform-scores", cfg.uniform_scores, "draw null scores as uniforms");
        sub->add_option("--n", n, "calibration size (fisher-null 2000, beta-fpr 100, correlation 100)");
        sub->add_option("--gamma", gammas, "fisher-null test-to-calibration ratio(s), default 3")->delimiter(',');
        sub->add_option("--reps", reps, "replicates (fisher-null 5000, beta-fpr 10000, correlation 100000)");
        sub->add_option("--transform", transform, "correlation: identity or neg2log")
            ->check(CLI::IsMember({"identity", "neg2log"}))
            ->capture_default_str();
        sub->add_flag("--independent", independent, "correlation: separate calibration sets");
        sub->add_option("--ns", ns, "power-curves n grid")->delimiter(',');
        sub->add_option("--fisher-reps", fisher_reps, "power-curves MC reps for the Fisher setting");
        add_common(sub, c);
    }

    void run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("simulate", sub, c, argv);
        const fs::path dir = resolve(outdir.empty() ? "simulate-" + suite : outdir);
        const ccv::stats::RandomStream rng(c.seed);
        json& res = r.results();

        if (suite == "outlier" || suite == "batch") {
            cfg.seed = c.seed;
            cfg.threads = c.threads;
            if (!methods.empty()) cfg.methods = split_list(methods);
            if (!procedures.empty()) cfg.procedures = split_list(procedures);
            if (!alphas.empty()) cfg.alphas = alphas;
            if (!scorer.empty()) cfg.scorer = ccv::scoring::scorer_kind_from_string(scorer);
            cfg.global_method = ccv::mtest::global_method_from_string(global);
            const auto rep = suite == "outlier" ? ccv::sim::run_outlier_experiment(cfg)
                             : fwer             ? ccv::sim::run_batch_fwer(cfg)
                                                : ccv::sim::run_batch_experiment(cfg);
            r.write(dir / "experiment.csv", text([&](std::ostream& o) { ccv::io::write_experiment_csv(o, rep); }));
            r.write(dir / "summary.csv", text([&](std::ostream& o) { ccv::io::write_summary_csv(o, rep); }));
            r.write(dir / "sequences.csv", text([&](std::ostream& o) {
                        o << "method,index,b\n";
                        for (const auto& s : rep.sequences) {
                            const auto name = ccv::adjust::to_string(s.method);
                            for (std::size_t i = 0; i < s.b.size(); ++i) {
                                o << name << ',' << (i + 1) << ',' << ccv::io::format_double(s.b[i]) << '\n';
                            }
                        }
                    }));
            res["suite"] = rep.suite;
            res["config"] = ccv::io::to_json(rep.config);
            res["summary"] = json::array();
            for (const auto& s : rep.summaries) {
                res["summary"].push_back({{"method", s.method}, {"procedure", s.procedure}, {"alpha", s.alpha},
                                          {"mfdr", s.mfdr}, {"mpower", s.mpower}, {"fdr_q90", s.fdr_q90},
                                          {"frac_fdr_le_alpha", s.frac_fdr_le_alpha}});
            }
        } else if (suite == "fisher-null") {
            const std::size_t nn = n.value_or(2000);
            const double a = alphas.empty() ? 0.05 : alphas.front();
            const std::size_t rr = reps.value_or(5000);
            if (gammas.empty()) gammas = {3.0};
            std::ostringstream o;
            o << "n,m,gamma,alpha,variant,rate,se,reps,limit\n";
            res["rates"] = json::array();
            for (std::size_t g = 0; g < gammas.size(); ++g) {
                const auto f = ccv::sim::fisher_null_calibration(nn, gammas[g], a, rr, rng.split(g), c.threads);
                for (const auto* variant : {"uncorrected", "corrected"}) {
                    const auto& e = std::string(variant) == "uncorrected" ? f.uncorrected : f.corrected;
                    o << f.n << ',' << f.m << ',' << ccv::io::format_double(f.gamma) << ','
                      << ccv::io::format_double(f.alpha) << ',' << variant << ',' << ccv::io::format_double(e.value)
                      << ',' << ccv::io::format_double(e.se) << ',' << e.reps << ','
                      << ccv::io::format_double(f.limit_uncorrected) << '\n';
                }
                res["rates"].push_back({{"gamma", f.gamma}, {"m", f.m}, {"uncorrected", ccv::io::to_json(f.uncorrected)},
                                        {"corrected", ccv::io::to_json(f.corrected)},
                                        {"limit_uncorrected", f.limit_uncorrected}});
            }
            r.write(dir / "fisher_null.csv", o.str());
        } else if (suite == "beta-fpr") {
            const std::size_t nn = n.value_or(100);
            const double a = alphas.empty() ? 0.1 : alphas.front();
            const auto b = ccv::sim::fpr_beta_check(nn, a, reps.value_or(10000), rng, c.threads);
            r.write(dir / "beta_fpr.csv", text([&](std::ostream& o) {
                        o << "draw,fpr\n";
                        for (std::size_t i = 0; i < b.samples.size(); ++i) {
                            o << i << ',' << ccv::io::format_double(b.samples[i]) << '\n';
                        }
                    }));
            res = {{"n", nn}, {"alpha", a}, {"ell", b.ell}, {"beta_a", b.beta_a}, {"beta_b", b.beta_b},
                   {"mean", b.mean}, {"mean_se", b.mean_se}, {"sd", b.sd}, {"ks_statistic", b.ks_statistic},
                   {"ks_pvalue", b.ks_pvalue}, {"pass", b.pass}};
        } else if (suite == "correlation") {
            const std::size_t nn = n.value_or(100);
            const std::size_t rr = reps.value_or(100000);
            std::function<double(double)> g = [](double p) { return p; };
            if (transform == "neg2log") g = [](double p) { return -2.0 * std::log(p); };
            const auto cr = ccv::sim::correlation_check(nn, rr, g, rng, independent, c.threads);
            r.write(dir / "correlation.csv", text([&](std::ostream& o) {
                        o << "n,transform,independent,estimate,se,target,reps\n"
                          << nn << ',' << transform << ',' << (independent ? 1 : 0) << ','
                          << ccv::io::format_double(cr.correlation.value) << ','
                          << ccv::io::format_double(cr.correlation.se) << ',' << ccv::io::format_double(cr.target)
                          << ',' << rr << '\n';
                    }));
            res = {{"estimate", cr.correlation.value}, {"se", cr.correlation.se}, {"target", cr.target}};
        } else {
            ccv::sim::PowerCurveConfig pc;
            if (!ns.empty()) pc.ns = ns;
            if (!alphas.empty()) pc.alpha = alphas.front();
            pc.delta = cfg.delta;
            if (!methods.empty()) pc.methods = split_list(methods);
            if (fisher_reps) pc.fisher_reps = *fisher_reps;
            pc.mc_reps = cfg.mc_reps;
            pc.simes_k = cfg.simes_k;
            pc.seed = c.seed;
            pc.threads = c.threads;
            const auto rows = ccv::sim::power_curves(pc);
            r.write(dir / "power_curves.csv", text([&](std::ostream& o) { ccv::io::write_power_curves_csv(o, rows); }));
            res = {{"rows", rows.size()}};
        }
        r.finish(dir / "manifest.json");
    }
};

// ---------------------------------------------------------------- validate

struct ValidateCmd {
    Common c;
    std::string level = "full";
    std::vector<int> only;
    std::string out = "validation.json";
    bool tamper = false;

    void add(CLI::App& app) {
        auto* sub = app.add_subcommand("validate", "Run the acceptance criteria");
        sub->add_option("--level", level)->check(CLI::IsMember({"quick", "full"}))->capture_default_str();
        sub->add_option("--only", only, "criterion ids to run")->delimiter(',');
        sub->add_option("--out", out, "JSON report path, '-' for stdout")->capture_default_str();
        // Negative control: corrupt every adjustment sequence the suite builds.
        sub->add_flag("--tamper-sequences", tamper)->group("");
        c.seed = 20211;
        add_common(sub, c);
    }

    int run(const CLI::App* sub, const std::vector<std::string>& argv) {
        Run r("validate", sub, c, argv);
        ccv::validate::Options opt;
        opt.level = ccv::validate::level_from_string(level);
        opt.seed = c.seed;
        opt.threads = c.threads;
        opt.only = only;
        if (tamper) opt.sequence_hook = ccv::validate::tamper_non_monotone;
        opt.on_result = [&](const ccv::validate::CriterionResult& res) {
            (out == "-" ? std::cerr : std::cout) << ccv::validate::summary_line(res) << std::endl;
        };
        const auto results = ccv::validate::run(opt);
        const auto report = ccv::validate::report_json(opt, results);
        r.emit(out, report.dump(2) + "\n");
        r.results() = {{"pass", report["pass"]}};
        r.finish(manifest_for(out, "validate"));
        return report["pass"].get<bool>() ? 0 : kValidation;
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conformal p-values for outlier detection"};
    app.set_version_flag("--version", CCV_VERSION);
    app.require_subcommand(1);

    AdjustCmd adjust;
    PvaluesCmd pvalues;
    TestCmd test;
    BandCmd band;
    ScoreCmd score;
    SimulateCmd simulate;
    ValidateCmd validate;
    adjust.add(app);
    pvalues.add(app);
    test.add(app);
    band.add(app);
    score.add(app);
    simulate.add(app);
    validate.add(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kUsage;
    }

    const std::vector<std::string> args(argv, argv + argc);
    const auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    try {
        if (name == "adjust") adjust.run(sub, args);
        else if (name == "pvalues") pvalues.run(sub, args);
        else if (name == "test") test.run(sub, args);
        else if (name == "band") band.run(sub, args);
        else if (name == "score") score.run(sub, args);
        else if (name == "simulate") simulate.run(sub, args);
        else if (name == "validate") return validate.run(sub, args);
    } catch (const ccv::io::DataError& e) {
        std::cerr << "ccv " << name << ": data error: " << e.what() << "\n";
        return kData;
    } catch (const UsageError& e) {
        std::cerr << "ccv " << name << ": " << e.what() << "\n" << sub->help();
        return kUsage;
    } catch (const std::invalid_argument& e) {
        std::cerr << "ccv " << name << ": " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "ccv " << name << ": error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
