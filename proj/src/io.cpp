#include "ccv/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace ccv::io {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        const auto field = trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
        out.emplace_back(field);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<std::size_t> column_index(const Table& t, const std::string& name) {
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] == name) return i;
    }
    return std::nullopt;
}

} // namespace

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), res.ptr);
}

std::optional<double> try_parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s == "inf" || s == "+inf" || s == "Inf") return HUGE_VAL;
    if (s == "-inf" || s == "-Inf") return -HUGE_VAL;
    if (s == "nan" || s == "NaN") return std::nan("");
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

Table read_table(std::istream& in, const std::string& source) {
    Table t;
    std::string line;
    bool first = true;
    std::size_t width = 0;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto fields = split_line(line);
        if (first) {
            first = false;
            width = fields.size();
            bool numeric = true;
            for (const auto& f : fields) numeric = numeric && try_parse_double(f).has_value();
            if (!numeric) {
                t.header = std::move(fields);
                continue;
            }
        }
        if (fields.size() != width) {
            throw DataError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(width) +
                            " fields, found " + std::to_string(fields.size()));
        }
        t.rows.push_back(std::move(fields));
    }
    return t;
}

Table read_table_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_table(in, path.string());
}

std::vector<double> numeric_column(const Table& table, const std::string& name, const std::string& source) {
    std::size_t col = 0;
    if (!name.empty()) {
        const auto idx = column_index(table, name);
        if (!idx) throw DataError(source + ": no column named '" + name + "'");
        col = *idx;
    }
    std::vector<double> out;
    out.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto v = try_parse_double(table.rows[r][col]);
        if (!v || std::isnan(*v)) {
            throw DataError(source + ": row " + std::to_string(r + 1) + ": not a number: '" + table.rows[r][col] + "'");
        }
        out.push_back(*v);
    }
    return out;
}

std::vector<double> read_scores(const std::filesystem::path& path, const std::string& column) {
    const auto t = read_table_file(path);
    std::string name = column;
    if (name.empty() && column_index(t, "score")) name = "score";
    return numeric_column(t, name, path.string());
}

DataMatrix read_matrix(const std::filesystem::path& path) {
    const auto t = read_table_file(path);
    if (t.rows.empty()) throw DataError(path.string() + ": no observations");
    const std::size_t cols = t.rows.front().size();
    std::vector<double> values;
    values.reserve(t.rows.size() * cols);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (const auto& cell : t.rows[r]) {
            const auto v = try_parse_double(cell);
            if (!v || !std::isfinite(*v)) {
                throw DataError(path.string() + ": row " + std::to_string(r + 1) + ": non-finite entry '" + cell + "'");
            }
            values.push_back(*v);
        }
    }
    return DataMatrix(t.rows.size(), cols, std::move(values));
}

nlohmann::json sequence_metadata(const adjust::AdjustmentSequence& seq) {
    nlohmann::json j;
    j["method"] = adjust::to_string(seq.method);
    j["n"] = seq.n;
    j["delta"] = seq.delta;
    if (seq.k) j["k"] = *seq.k;
    if (seq.delta_hat) j["delta_hat"] = *seq.delta_hat;
    if (seq.reps) j["reps"] = *seq.reps;
    if (seq.seed) j["seed"] = *seq.seed;
    if (seq.dempster_a) j["dempster_a"] = *seq.dempster_a;
    if (seq.dempster_b) j["dempster_b"] = *seq.dempster_b;
    j["warning"] = seq.warning;
    j["note"] = seq.note;
    return j;
}

void write_sequence_csv(std::ostream& out, const adjust::AdjustmentSequence& seq) {
    out << "index,b\n";
    for (std::size_t i = 0; i < seq.b.size(); ++i) out << (i + 1) << ',' << format_double(seq.b[i]) << '\n';
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
    auto p = csv;
    p += ".json";
    return p;
}

adjust::AdjustmentSequence read_sequence(const std::filesystem::path& csv) {
    const auto t = read_table_file(csv);
    const auto b_col = column_index(t, "b");
    if (!b_col) throw DataError(csv.string() + ": sequence file needs an index,b header");
    adjust::AdjustmentSequence seq;
    seq.b = numeric_column(t, "b", csv.string());
    seq.n = seq.b.size();
    seq.delta = std::nan("");
    const auto side = sidecar_path(csv);
    if (std::filesystem::exists(side)) {
        std::ifstream in(side);
        nlohmann::json j;
        try {
            in >> j;
            seq.method = adjust::method_from_string(j.at("method").get<std::string>());
            seq.delta = j.at("delta").get<double>();
            if (j.at("n").get<std::size_t>() != seq.n) {
                throw DataError(side.string() + ": n does not match the CSV row count");
            }
            if (j.contains("k")) seq.k = j["k"].get<std::size_t>();
            if (j.contains("delta_hat")) seq.delta_hat = j["delta_hat"].get<double>();
            if (j.contains("reps")) seq.reps = j["reps"].get<std::size_t>();
            if (j.contains("seed")) seq.seed = j["seed"].get<std::uint64_t>();
            if (j.contains("dempster_a")) seq.dempster_a = j["dempster_a"].get<double>();
            if (j.contains("dempster_b")) seq.dempster_b = j["dempster_b"].get<double>();
            seq.warning = j.value("warning", false);
            seq.note = j.value("note", std::string());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(side.string() + ": " + e.what());
        } catch (const std::invalid_argument& e) {
            throw DataError(side.string() + ": " + e.what());
        }
    } else {
        seq.note = "loaded without metadata sidecar";
    }
    try {
        adjust::validate_sequence(seq);
    } catch (const std::invalid_argument& e) {
        throw DataError(csv.string() + ": " + e.what());
    }
    return seq;
}

void write_pvalues_csv(std::ostream& out, const std::vector<double>& scores, const std::vector<double>& marginal,
                       const std::vector<double>* conditional) {
    out << "index,score,p_marginal";
    if (conditional) out << ",p_conditional";
    out << '\n';
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out << i << ',' << format_double(scores[i]) << ',' << format_double(marginal[i]);
        if (conditional) out << ',' << format_double((*conditional)[i]);
        out << '\n';
    }
}

void write_band_csv(std::ostream& out, const bands::FprBand& band) {
    out << "threshold,empirical_fpr,band\n";
    for (const auto& s : band.steps()) {
        out << format_double(s.threshold) << ',' << format_double(s.empirical_fpr) << ',' << format_double(s.bound)
            << '\n';
    }
}

nlohmann::json to_json(const mtest::RejectionReport& r) {
    nlohmann::json j;
    j["procedure"] = r.procedure;
    j["alpha"] = r.alpha;
    j["rejected"] = r.rejected;
    j["rejections"] = r.rejected.size();
    j["critical_value"] = r.critical_value;
    j["lambda"] = r.lambda ? nlohmann::json(*r.lambda) : nlohmann::json();
    j["pi0"] = r.pi0 ? nlohmann::json(*r.pi0) : nlohmann::json();
    j["fdp"] = r.fdp ? nlohmann::json(*r.fdp) : nlohmann::json();
    j["power"] = r.power ? nlohmann::json(*r.power) : nlohmann::json();
    j["warning"] = r.warning;
    j["note"] = r.note;
    return j;
}

nlohmann::json to_json(const mtest::GlobalTestResult& r) {
    nlohmann::json j;
    j["procedure"] = r.procedure;
    j["statistic"] = r.statistic;
    j["threshold"] = r.threshold;
    j["reject"] = r.reject;
    j["combined_p"] = r.combined_p ? nlohmann::json(*r.combined_p) : nlohmann::json();
    j["approximate"] = r.approximate;
    j["note"] = r.note;
    return j;
}

nlohmann::json to_json(const sim::ExperimentConfig& c) {
    nlohmann::json j;
    j["practitioners"] = c.practitioners;
    j["test_sets"] = c.test_sets;
    j["n_train"] = c.n_train;
    j["n_cal"] = c.n_cal;
    j["n_test"] = c.n_test;
    j["outlier_fraction"] = c.outlier_fraction;
    j["signal"] = c.signal;
    j["dim"] = c.dim;
    j["centers"] = c.centers;
    j["box"] = c.box;
    j["scorer"] = scoring::to_string(c.scorer);
    j["knn_k"] = c.knn_k;
    j["ridge"] = c.ridge;
    j["methods"] = c.methods;
    j["procedures"] = c.procedures;
    j["delta"] = c.delta;
    j["alphas"] = c.alphas;
    j["lambda"] = c.lambda ? nlohmann::json(*c.lambda) : nlohmann::json();
    j["simes_k"] = c.simes_k;
    j["mc_reps"] = c.mc_reps;
    j["batch_size"] = c.batch_size;
    j["batch_outlier_share"] = c.batch_outlier_share;
    j["global_method"] = mtest::to_string(c.global_method);
    j["fwer_cut"] = c.fwer_cut;
    j["uniform_scores"] = c.uniform_scores;
    j["seed"] = c.seed;
    j["threads"] = c.threads;
    return j;
}

nlohmann::json to_json(const McEstimate& e) {
    return {{"value", e.value}, {"se", e.se}, {"reps", e.reps}};
}

void write_rejections_csv(std::ostream& out, const mtest::RejectionReport& report, const std::vector<double>& p) {
    out << "index,p\n";
    for (auto i : report.rejected) out << i << ',' << format_double(p[i]) << '\n';
}

void write_experiment_csv(std::ostream& out, const sim::ExperimentReport& report) {
    const bool fwer = report.suite == "batch-fwer";
    out << "suite,practitioner,method,procedure,alpha,metric,value\n";
    for (const auto& r : report.rows) {
        const std::string prefix = report.suite + ',' + std::to_string(r.practitioner) + ',' + r.method + ',' +
                                   r.procedure + ',' + format_double(r.alpha) + ',';
        out << prefix << (fwer ? "fwer" : "fdr") << ',' << format_double(r.fdr) << '\n';
        if (!fwer) out << prefix << "power," << format_double(r.power) << '\n';
    }
}

void write_summary_csv(std::ostream& out, const sim::ExperimentReport& report) {
    out << "suite,method,procedure,alpha,mfdr,mfdr_se,mpower,mpower_se,fdr_q90,fdr_q90_se,frac_fdr_le_alpha\n";
    for (const auto& s : report.summaries) {
        out << report.suite << ',' << s.method << ',' << s.procedure << ',' << format_double(s.alpha) << ','
            << format_double(s.mfdr) << ',' << format_double(s.mfdr_se) << ',' << format_double(s.mpower) << ','
            << format_double(s.mpower_se) << ',' << format_double(s.fdr_q90) << ',' << format_double(s.fdr_q90_se)
            << ',' << format_double(s.frac_fdr_le_alpha) << '\n';
    }
}

void write_power_curves_csv(std::ostream& out, const std::vector<sim::PowerCurveRow>& rows) {
    out << "n,m,method,setting,effective_level,se\n";
    for (const auto& r : rows) {
        out << r.n << ',' << r.m << ',' << r.method << ',' << r.setting << ',' << format_double(r.effective_level)
            << ',' << format_double(r.se) << '\n';
    }
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + tmp.string());
        out << contents;
        if (!out) throw DataError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace ccv::io
