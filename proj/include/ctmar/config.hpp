#pragma once

#include <filesystem>
#include <string>

#include "ctmar/classical.hpp"
#include "ctmar/core.hpp"
#include "ctmar/fbp.hpp"
#include "ctmar/simulate.hpp"
#include "ctmar/solver.hpp"

namespace ctmar {

struct DisplayConfig {
    HuMap hu;                      // attenuation <-> HU map
    double window_lo_hu = -175.0;  // default display window
    double window_hi_hu = 275.0;
};

/// Everything one experiment needs; nested sections mirror the module
/// configs. Unknown keys anywhere in the JSON are errors.
struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string output_dir = "out";
    Geometry geometry{256, 256, 320, 367};
    FbpConfig fbp;
    PhantomSpec phantom{PhantomKind::shepp_logan, 0, 8, 0.0, 0.04};
    MetalSpec metal;
    CorruptionSpec corruption;
    NmarConfig nmar;
    SolverConfig solver;
    DisplayConfig display;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string config_to_json(const ExperimentConfig& cfg);
void save_config(const ExperimentConfig& cfg, const std::filesystem::path& path);

}  // namespace ctmar
