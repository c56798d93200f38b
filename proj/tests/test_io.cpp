#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "ccv/io.hpp"
#include "gen.hpp"

namespace ad = ccv::adjust;
namespace io = ccv::io;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "ccv_test_io";
    fs::create_directories(dir);
    return dir / name;
}

void put(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
}

} // namespace

TEST_CASE("format_double round-trips") {
    gen::Source g(11);
    for (int t = 0; t < 2000; ++t) {
        const double x = g.coin() ? g.real(-1e6, 1e6) : std::ldexp(g.real(0.5, 1.0), static_cast<int>(g.size(0, 200)) - 100);
        const auto back = io::try_parse_double(io::format_double(x));
        REQUIRE(back.has_value());
        CHECK(*back == x);
    }
    CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(io::format_double(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(io::format_double(0.1) == "0.1");
    CHECK(std::isinf(*io::try_parse_double("-inf")));
    CHECK_FALSE(io::try_parse_double("1.5x"));
    CHECK_FALSE(io::try_parse_double(""));
    CHECK(*io::try_parse_double(" +2.5 ") == 2.5);
}

TEST_CASE("header detection") {
    std::istringstream with("a,score\n1,2\n3,4\n");
    auto t = io::read_table(with, "with");
    CHECK(t.header == std::vector<std::string>{"a", "score"});
    CHECK(t.rows.size() == 2);
    CHECK(io::numeric_column(t, "score", "with") == std::vector<double>{2, 4});

    std::istringstream without("1,2\r\n\n3,4\r\n");
    t = io::read_table(without, "without");
    CHECK(t.header.empty());
    CHECK(t.rows.size() == 2);
    CHECK(io::numeric_column(t, "", "without") == std::vector<double>{1, 3});

    std::istringstream ragged("1,2\n3\n");
    CHECK_THROWS_AS(io::read_table(ragged, "ragged"), io::DataError);

    std::istringstream bad("score\n1\nfoo\n");
    t = io::read_table(bad, "bad");
    CHECK_THROWS_AS(io::numeric_column(t, "score", "bad"), io::DataError);
    CHECK_THROWS_AS(io::numeric_column(t, "missing", "bad"), io::DataError);
}

TEST_CASE("read_scores picks the score column") {
    const auto p = scratch("scores.csv");
    put(p, "id,score\n7,0.5\n8,-1.25\n");
    CHECK(io::read_scores(p) == std::vector<double>{0.5, -1.25});
    CHECK(io::read_scores(p, "id") == std::vector<double>{7, 8});
    put(p, "0.5\n0.25\n");
    CHECK(io::read_scores(p) == std::vector<double>{0.5, 0.25});
    CHECK_THROWS_AS(io::read_scores(scratch("nope.csv")), io::DataError);
}

TEST_CASE("read_matrix rejects non-finite entries") {
    const auto p = scratch("x.csv");
    put(p, "x1,x2\n1,2\n3,4\n5,6\n");
    const auto m = io::read_matrix(p);
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 2);
    put(p, "1,2\n3,inf\n");
    CHECK_THROWS_AS(io::read_matrix(p), io::DataError);
    put(p, "a,b\n");
    CHECK_THROWS_AS(io::read_matrix(p), io::DataError);
}

TEST_CASE("sequence and sidecar round-trip") {
    gen::Source g(5);
    for (int t = 0; t < 20; ++t) {
        const std::size_t n = g.size(1, 300);
        auto seq = g.coin() ? ad::simes_sequence(n, g.real(0.01, 0.5), g.size(1, n))
                            : ad::asymptotic_sequence(n, g.real(0.01, 0.5));
        const auto csv = scratch("seq.csv");
        std::ostringstream body;
        io::write_sequence_csv(body, seq);
        io::write_file(csv, body.str());
        io::write_file(io::sidecar_path(csv), io::sequence_metadata(seq).dump(2));
        const auto back = io::read_sequence(csv);
        CHECK(back.b == seq.b);
        CHECK(back.method == seq.method);
        CHECK(back.delta == seq.delta);
        CHECK(back.k == seq.k);
        CHECK(back.n == n);
    }
}

TEST_CASE("sequence without sidecar and malformed sequences") {
    const auto csv = scratch("bare.csv");
    fs::remove(io::sidecar_path(csv));
    put(csv, "index,b\n1,0.1\n2,0.5\n");
    const auto seq = io::read_sequence(csv);
    CHECK(seq.n == 2);
    CHECK(seq.note == "loaded without metadata sidecar");

    put(csv, "index,b\n1,0.5\n2,0.1\n");
    CHECK_THROWS_AS(io::read_sequence(csv), io::DataError);
    put(csv, "index,b\n1,1.5\n");
    CHECK_THROWS_AS(io::read_sequence(csv), io::DataError);
    put(csv, "1,0.1\n");
    CHECK_THROWS_AS(io::read_sequence(csv), io::DataError);

    put(csv, "index,b\n1,0.1\n2,0.5\n");
    put(io::sidecar_path(csv), R"({"method":"simes","n":3,"delta":0.1})");
    CHECK_THROWS_AS(io::read_sequence(csv), io::DataError);
    put(io::sidecar_path(csv), "{not json");
    CHECK_THROWS_AS(io::read_sequence(csv), io::DataError);
    fs::remove(io::sidecar_path(csv));
}

TEST_CASE("p-value, band and rejection CSV layout") {
    std::ostringstream out;
    const std::vector<double> s{0.5, 2.0};
    const std::vector<double> pm{0.25, 0.75};
    const std::vector<double> pc{0.5, 1.0};
    io::write_pvalues_csv(out, s, pm, &pc);
    CHECK(out.str() == "index,score,p_marginal,p_conditional\n0,0.5,0.25,0.5\n1,2,0.75,1\n");

    out.str("");
    io::write_pvalues_csv(out, s, pm, nullptr);
    CHECK(out.str() == "index,score,p_marginal\n0,0.5,0.25\n1,2,0.75\n");

    const ccv::conformal::CalibrationSet cal({0.3, 0.1});
    const auto seq = ad::simes_sequence(2, 0.1, 1);
    out.str("");
    io::write_band_csv(out, ccv::bands::fpr_band(cal, seq));
    std::istringstream in(out.str());
    const auto t = io::read_table(in, "band");
    CHECK(t.header == std::vector<std::string>{"threshold", "empirical_fpr", "band"});
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0][0] == "-inf");
    CHECK(t.rows[1][1] == "0.5");
    CHECK(t.rows[2][2] == "1");

    const std::vector<double> p{0.001, 0.9, 0.002};
    const auto rep = ccv::mtest::bh(p, 0.1);
    out.str("");
    io::write_rejections_csv(out, rep, p);
    CHECK(out.str() == "index,p\n0,0.001\n2,0.002\n");
    const auto j = io::to_json(rep);
    CHECK(j["rejections"] == 2);
    CHECK(j["lambda"].is_null());
}

TEST_CASE("experiment CSV is tidy") {
    ccv::sim::ExperimentReport rep;
    rep.suite = "outlier";
    rep.rows.push_back({0, "simes", "bh", 0.1, 0.05, 0.8});
    std::ostringstream out;
    io::write_experiment_csv(out, rep);
    CHECK(out.str() ==
          "suite,practitioner,method,procedure,alpha,metric,value\n"
          "outlier,0,simes,bh,0.1,fdr,0.05\noutlier,0,simes,bh,0.1,power,0.8\n");
    rep.suite = "batch-fwer";
    out.str("");
    io::write_experiment_csv(out, rep);
    CHECK(out.str() ==
          "suite,practitioner,method,procedure,alpha,metric,value\nbatch-fwer,0,simes,bh,0.1,fwer,0.05\n");

    const auto cfg = io::to_json(ccv::sim::ExperimentConfig{});
    CHECK(cfg["practitioners"] == 25);
    CHECK(cfg["scorer"] == "oracle");
}
