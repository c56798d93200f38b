// Acceptance runner: one line per criterion, nonzero exit when any is red.
//   acceptance [--level quick|full] [--seed N] [--threads N] [--only 1,2,...]
//              [--json report.json] [--tamper]
// --tamper corrupts every adjustment sequence the suite builds; the run is
// then expected to fail, which the ctest negative control checks.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "ccv/validate.hpp"

int main(int argc, char** argv) {
    CLI::App app{"ccv acceptance criteria"};
    std::string level = "full";
    std::string only;
    std::string json_path;
    bool tamper = false;
    ccv::validate::Options opt;
    app.add_option("--level", level)->check(CLI::IsMember({"quick", "full"}));
    app.add_option("--seed", opt.seed);
    app.add_option("--threads", opt.threads)->check(CLI::PositiveNumber);
    app.add_option("--only", only, "comma-separated criterion ids");
    app.add_option("--json", json_path);
    app.add_flag("--tamper", tamper);
    CLI11_PARSE(app, argc, argv);

    opt.level = ccv::validate::level_from_string(level);
    std::stringstream ss(only);
    for (std::string tok; std::getline(ss, tok, ',');) {
        if (!tok.empty()) opt.only.push_back(std::stoi(tok));
    }
    if (tamper) opt.sequence_hook = ccv::validate::tamper_non_monotone;
    opt.on_result = [](const ccv::validate::CriterionResult& r) {
        std::cout << ccv::validate::summary_line(r) << std::endl;
    };

    std::cout << "level " << level << ", seed " << opt.seed << ", threads " << opt.threads << std::endl;
    const auto results = ccv::validate::run(opt);
    std::size_t passed = 0;
    for (const auto& r : results) passed += r.pass ? 1 : 0;
    std::cout << passed << "/" << results.size() << " criteria passed" << std::endl;
    if (!json_path.empty()) {
        std::ofstream(json_path) << ccv::validate::report_json(opt, results).dump(2) << '\n';
    }
    return passed == results.size() ? 0 : 1;
}
