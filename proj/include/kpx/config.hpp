#pragma once

#include "kpx/model.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace kpx {

// Batch configuration. Serialized as one JSON document; unknown keys are rejected.
struct ExperimentConfig {
    std::string model = "kinetic_const";  // registry entry, or "inline"
    double lambda = 1.0;                   // kinetic_const: σ = √λ
    // inline coefficients in t, x1, x2
    std::string sigma_expr;
    std::string F1_expr = "0";
    std::string F2_expr = "x1";

    double beta = -0.25;
    double nu = 0.75;
    double T = 1.0;

    struct Drift {
        bool enabled = true;
        std::uint64_t seed = 7;
        int J_max = 6;
        int waves_per_shell = 1;
        double quantum = 0.5;
        std::vector<double> slices{0.0, 0.25, 0.5, 0.75, 1.0};
        double amplitude = 1.0;  // sup |b^(sup_level)| when sup_level > 0, raw amplitude otherwise
        int sup_level = 64;
    } drift;

    std::vector<int> n_ladder{4, 8, 16, 32, 64};

    struct Grid {
        int n = 41;
        double half_width = 6.0;
    } grid;

    struct Parametrix {
        int K = 6;
        int n1 = 1024;
        int n2 = 128;
        int n2_envelope = 256;
        int steps = 96;
    } parametrix;

    struct MonteCarlo {
        long paths = 1000000;
        int steps = 1024;
        std::uint64_t seed = 1;
        long martingale_paths = 100000;
        long bias_paths = 250000;  // per run of the step-doubling check
    } montecarlo;

    struct Cauchy {
        int slices = 16;
        int modes = 1024;
        double gamma = 1.5;
        int level = 32;
        std::vector<int> ladder{16, 32, 64, 128, 256};
        std::vector<double> horizons{0.1, 0.2, 0.4};
    } cauchy;

    struct Probe {
        double eta_f = 0.4;
        double eta_b = 0.6;
    } probe;

    // gate thresholds, see default_tolerances()
    std::map<std::string, double> tolerances;

    std::string out = "kpx_out";
    int jobs = 0;

    double tol(const std::string& key) const;
    // throws ConfigError naming the offending field
    void validate() const;
    std::string to_json() const;
    static ExperimentConfig from_json(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    // stable hash of the serialized document (hex)
    std::string hash() const;
};

const std::map<std::string, double>& default_tolerances();

// Model described by the configuration, drift included when enabled.
ModelSpec build_model(const ExperimentConfig& cfg);
// The same model without drift.
ModelSpec build_base_model(const ExperimentConfig& cfg);

}  // namespace kpx
