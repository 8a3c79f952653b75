#pragma once

#include "kpx/config.hpp"
#include "kpx/report.hpp"

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace kpx {

// One measured quantity checked against a threshold. `criterion` tags the acceptance
// criterion ("1".."10") the gate belongs to; empty for suite-level diagnostics.
struct Gate {
    std::string criterion;
    std::string name;
    double value = NAN;
    std::string relation;  // "<=", "<", ">=", ">"
    double limit = NAN;
    bool pass = false;
    std::string note;
};

Gate make_gate(std::string criterion, std::string name, double value, const std::string& relation, double limit,
               std::string note = {});

struct Figure {
    std::string name;  // file name without extension
    std::string svg;
};

struct SuiteReport {
    std::string suite;
    std::vector<Gate> gates;
    std::map<std::string, double> constants;  // fitted constants for the ledger
    std::vector<Table> tables;
    std::vector<Figure> figures;
    double seconds = 0.0;

    bool pass() const;
    // {"suite", "config_hash", "seed", "seconds", "pass", "constants", "gates"}
    std::string ledger_json(const ExperimentConfig& cfg) const;
};

const std::vector<std::string>& suite_names();  // kernels proxy parametrix besov cauchy montecarlo

// Runs one suite; progress lines go to `log` when given. Throws ConfigError when the
// configured model is outside a suite's scope.
SuiteReport run_suite(const std::string& suite, const ExperimentConfig& cfg, std::ostream* log = nullptr);

struct DriftRow {
    std::string key;
    double a = 0.0, b = 0.0;
    double drift = 0.0;  // |a − b| / max(|a|, |b|)
    bool pass = true;
};
struct CompareResult {
    std::vector<DriftRow> rows;
    std::vector<std::string> missing;  // constants present in only one ledger
    bool pass = true;
};
// Ledgers must carry the same config hash (ConfigError otherwise).
CompareResult compare_ledgers(const std::string& json_a, const std::string& json_b, double threshold);

}  // namespace kpx
