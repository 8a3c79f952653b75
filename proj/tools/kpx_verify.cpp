// kpx_verify: runs verification suites and writes CSV tables, SVG figures, per-suite
// ledgers and a hashed manifest.
//
// exit codes: 0 all gates pass, 1 some gate fails, 2 usage or configuration error

#include "kpx/config.hpp"
#include "kpx/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream o;
    for (unsigned int i = 0; i < len; ++i) o << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return o.str();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw kpx::ConfigError("cannot read " + path);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

struct Writer {
    fs::path dir;
    json files = json::object();

    void put(const std::string& name, const std::string& content) {
        std::ofstream f(dir / name, std::ios::binary);
        if (!f) throw kpx::ConfigError("cannot write " + (dir / name).string());
        f << content;
        files[name] = sha256_hex(content);
    }
};

void print_gates(const kpx::SuiteReport& r) {
    for (const kpx::Gate& g : r.gates) {
        std::cout << "  " << (g.pass ? "PASS " : "FAIL ") << (g.criterion.empty() ? "-" : g.criterion) << "  "
                  << g.name << ": " << g.value << " " << g.relation << " " << g.limit;
        if (!g.note.empty()) std::cout << "  (" << g.note << ")";
        std::cout << "\n";
    }
    std::cout << r.suite << ": " << (r.pass() ? "PASS" : "FAIL") << " in " << std::fixed << std::setprecision(1)
              << r.seconds << " s\n"
              << std::defaultfloat;
}

int run(const std::vector<std::string>& suites, kpx::ExperimentConfig cfg, bool quiet) {
    Writer w{cfg.out};
    fs::create_directories(w.dir);
    bool ok = true;
    json summary = json::object();
    for (const std::string& s : suites) {
        const kpx::SuiteReport r = kpx::run_suite(s, cfg, quiet ? nullptr : &std::cerr);
        for (const auto& t : r.tables) w.put(s + "_" + t.name + ".csv", t.csv());
        for (const auto& f : r.figures) w.put(s + "_" + f.name + ".svg", f.svg);
        w.put("ledger_" + s + ".json", r.ledger_json(cfg));
        print_gates(r);
        summary[s] = r.pass();
        ok = ok && r.pass();
    }
    json manifest;
    manifest["config"] = json::parse(cfg.to_json());
    manifest["config_hash"] = cfg.hash();
    manifest["seed"] = cfg.montecarlo.seed;
    manifest["suites"] = summary;
    manifest["files"] = w.files;
    std::ofstream(w.dir / "manifest.json") << manifest.dump(2) << "\n";
    return ok ? 0 : 1;
}

std::vector<int> parse_ladder(const std::string& text) {
    std::vector<int> v;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t pos = 0;
            v.push_back(std::stoi(item, &pos));
            if (pos != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw kpx::ConfigError("--n-ladder: '" + item + "' is not an integer");
        }
    }
    if (v.empty()) throw kpx::ConfigError("--n-ladder: empty list");
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"verification suites for the kinetic singular-drift toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // global options may follow the subcommand
    std::string config_path, out_dir, ladder;
    std::uint64_t seed = 0;
    int jobs = -1;
    bool quiet = false;
    app.add_option("--config", config_path, "JSON configuration file");
    app.add_option("--out", out_dir, "output directory (overrides config 'out')");
    app.add_option("--seed", seed, "Monte Carlo seed (overrides config)");
    app.add_option("--n-ladder", ladder, "comma-separated mollification levels, e.g. 4,8,16");
    app.add_option("--jobs", jobs, "worker threads (0: all cores; default from KPX_JOBS)");
    app.add_flag("-q,--quiet", quiet, "no progress lines");

    std::vector<CLI::App*> suite_cmds;
    for (const std::string& s : kpx::suite_names()) suite_cmds.push_back(app.add_subcommand(s, "run the " + s + " suite"));
    CLI::App* all = app.add_subcommand("all", "run every suite");
    CLI::App* cmp = app.add_subcommand("compare", "compare two ledgers written under the same configuration");
    std::string ledger_a, ledger_b;
    double threshold = 0.2;
    cmp->add_option("ledger_a", ledger_a)->required()->check(CLI::ExistingFile);
    cmp->add_option("ledger_b", ledger_b)->required()->check(CLI::ExistingFile);
    cmp->add_option("--threshold", threshold, "allowed relative drift per constant");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (cmp->parsed()) {
            const kpx::CompareResult res = kpx::compare_ledgers(slurp(ledger_a), slurp(ledger_b), threshold);
            for (const auto& r : res.rows)
                std::cout << (r.pass ? "ok    " : "DRIFT ") << r.key << ": " << r.a << " vs " << r.b
                          << " (relative " << r.drift << ")\n";
            for (const auto& k : res.missing) std::cout << "MISSING " << k << "\n";
            return res.pass && res.missing.empty() ? 0 : 1;
        }

        kpx::ExperimentConfig cfg = config_path.empty() ? kpx::ExperimentConfig{} : kpx::ExperimentConfig::load(config_path);
        if (!out_dir.empty()) cfg.out = out_dir;
        if (app.count("--seed")) cfg.montecarlo.seed = seed;
        if (!ladder.empty()) cfg.n_ladder = parse_ladder(ladder);
        if (jobs >= 0) cfg.jobs = jobs;
        else if (const char* e = std::getenv("KPX_JOBS")) {
            try {
                cfg.jobs = std::stoi(e);
            } catch (const std::exception&) {
                throw kpx::ConfigError("KPX_JOBS: not an integer");
            }
        }
        cfg.validate();

        std::vector<std::string> suites;
        if (all->parsed()) suites = kpx::suite_names();
        for (size_t i = 0; i < suite_cmds.size(); ++i)
            if (suite_cmds[i]->parsed()) suites.push_back(kpx::suite_names()[i]);
        if (suites.empty()) {
            std::cerr << "no suite selected\n";
            return 2;
        }
        return run(suites, cfg, quiet);
    } catch (const kpx::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
