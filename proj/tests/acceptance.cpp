// Acceptance run: every suite under the default configuration, one PASS/FAIL line per
// criterion. Artifacts go to ./acceptance_out (the ctest working directory).

#include "kpx/config.hpp"
#include "kpx/verify.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

int main() {
    using namespace kpx;
    ExperimentConfig cfg;
    cfg.out = "acceptance_out";
    std::filesystem::create_directories(cfg.out);

    std::map<int, std::vector<Gate>> by_criterion;
    std::vector<Gate> diagnostics;
    for (const std::string& s : suite_names()) {
        try {
            const SuiteReport r = run_suite(s, cfg, &std::cerr);
            std::ofstream(cfg.out + "/ledger_" + s + ".json") << r.ledger_json(cfg) << "\n";
            for (const Gate& g : r.gates) {
                if (g.criterion.empty()) diagnostics.push_back(g);
                else by_criterion[std::stoi(g.criterion)].push_back(g);
            }
        } catch (const std::exception& e) {
            std::cout << "suite " << s << " raised: " << e.what() << "\n";
        }
    }

    bool all = true;
    for (int c = 1; c <= 10; ++c) {
        const auto it = by_criterion.find(c);
        bool ok = it != by_criterion.end() && !it->second.empty();
        if (ok)
            for (const Gate& g : it->second) ok = ok && g.pass;
        all = all && ok;
        std::cout << "criterion " << c << ": " << (ok ? "PASS" : "FAIL") << "\n";
        if (it == by_criterion.end()) {
            std::cout << "    no measurements\n";
            continue;
        }
        for (const Gate& g : it->second)
            std::cout << "    " << (g.pass ? "ok   " : "FAIL ") << g.name << ": " << g.value << " " << g.relation << " "
                      << g.limit << (g.note.empty() ? "" : "  (" + g.note + ")") << "\n";
    }
    for (const Gate& g : diagnostics)
        std::cout << "diagnostic " << (g.pass ? "ok   " : "FAIL ") << g.name << ": " << g.value << " " << g.relation << " "
                  << g.limit << "\n";
    std::cout << (all ? "ALL CRITERIA PASS" : "SOME CRITERIA FAIL") << std::endl;
    return all ? 0 : 1;
}
