#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ctmar/config.hpp"
#include "ctmar/metrics.hpp"
#include "ctmar/raster_io.hpp"

namespace ctmar {

enum class Method { input, fbp, li, nmar, dudo };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// One simulated phantom/metal case with every artifact the toolkit consumes.
struct SimulatedCase {
    Geometry geo;
    Image x_gt;       // scoring ground truth (metal pixels replaced by tissue)
    Image metal;      // binary implant mask
    Sinogram y;       // corrupted sinogram
    Sinogram y_gt;    // clean sinogram of the tissue image
    Sinogram trace;   // binary metal trace
    Image x_ma;       // FBP of y
};

SimulatedCase simulate_case(const ExperimentConfig& cfg);

/// Writes the standard artifact set (x_gt, m, y, y_gt, tr, x_ma plus the
/// effective config) into dir.
void write_case(const SimulatedCase& c, const ExperimentConfig& cfg,
                const std::filesystem::path& dir);

/// Reads back what write_case produced.
SimulatedCase read_case(const std::filesystem::path& dir);

/// Runs one reconstruction method. For Method::dudo, solver_out (when given)
/// receives the final sinogram and recorded stages.
Image reconstruct_case(Method method, const SimulatedCase& c, const ExperimentConfig& cfg,
                       const Projector& proj, SolveResult* solver_out = nullptr);

struct BenchCase {
    int index = 0;
    int group = 0;                           // 1 = largest implants
    std::int64_t metal_area = 0;             // pixels
    std::map<Method, MetricReport> reports;
};

struct BenchResult {
    std::vector<BenchCase> cases;
    std::vector<Method> methods;
};

/// Seeded bench: n_cases cases whose implant sizes sweep the five reference
/// size groups (two per group when n_cases == 10), each scored with every
/// method.
BenchResult run_bench(const ExperimentConfig& cfg, int n_cases);

/// Pixel-area group boundaries, descending; index i separates group i+1 from
/// group i+2.
const std::vector<double>& bench_group_boundaries();
int bench_group_of(std::int64_t area);

void write_bench_csv(const BenchResult& res, const std::filesystem::path& path);
void write_bench_case_csv(const BenchResult& res, const std::filesystem::path& path);

/// Appends one row (writing the header first if the file is new).
void append_metrics_csv(const std::filesystem::path& path, const std::string& case_id,
                        const std::string& method, const MetricReport& report);

}  // namespace ctmar
