#pragma once

#include "srmpc/estimator.hpp"
#include "srmpc/model.hpp"
#include "srmpc/sim.hpp"
#include "srmpc/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace srmpc {

/// Experiment configuration file: a single JSON document with strict
/// parsing. Unknown keys are rejected with the object path in the message;
/// parse errors carry line/column. The full schema is documented in the
/// repository README.
struct BenchmarkConfig {
    std::string name;
    BenchmarkParams params;
};

struct SolverConfig {
    double tol = 1e-6;
    int max_iterations = 400;
    SolverOptions options() const {
        SolverOptions o;
        o.tol = tol;
        o.max_iterations = max_iterations;
        return o;
    }
};

struct SimSection {
    bool present = false;
    int steps = 100;
    int horizon = 10;
    Vec x0_star;
    Vec y0;  // defaults to x0_star
    Mat sigma0;
    std::vector<ControllerSpec> controllers;
    std::uint64_t seed = 1;
    double divergence_bound = 1e3;
    SolverConfig solver;
};

struct GameSection {
    bool present = false;
    int horizon = 10;
    Vec x0_star;
    Vec y0;
    bool sample_y0 = true;
    Mat sigma0;
    ControllerSpec controller;
    SolverConfig solver{1e-10, 4000};
};

struct McAnalysisConfig {
    bool present = false;
    int trials = 1000;
    std::uint64_t seed = 1;
};

struct GammaAnalysisConfig {
    bool present = false;
    std::vector<double> levels;
    int trials = 1000;
    std::uint64_t seed = 1;
};

struct AlphaSweepConfig {
    bool present = false;
    std::vector<double> alphas;
    int horizon = 10;
    Vec y0;
    Mat sigma0;
    SolverConfig solver;
};

struct AnalysisSection {
    bool loss_decomposition = false;
    std::uint64_t loss_seed = 1;
    bool estimate = false;
    McAnalysisConfig mc;
    GammaAnalysisConfig gamma;
    AlphaSweepConfig sweep;
    bool any() const {
        return loss_decomposition || estimate || mc.present || gamma.present || sweep.present;
    }
};

struct OutputSection {
    std::string dir = "out";
    std::string prefix = "run";
    bool plot_data = false;
};

struct ExperimentConfig {
    BenchmarkConfig benchmark;
    NoiseSpec noise;
    SimSection sim;
    GameSection game;
    AnalysisSection analysis;
    OutputSection output;
    std::uint64_t config_hash = 0;
};

/// Loads and validates a config file. Throws ConfigError with a line/field
/// diagnostic on any problem.
ExperimentConfig load_experiment_config(const std::string& path);

Model build_model(const BenchmarkConfig& cfg);

}  // namespace srmpc
