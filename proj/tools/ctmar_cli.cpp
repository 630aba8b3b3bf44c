// Command-line front end: simulate, reconstruct, evaluate, bench, stages.
// Exit codes: 0 success, 1 usage, 2 validation/config/file-format error,
// 3 runtime failure (fully traced view, placement exhaustion, diverged solve).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ctmar/pipeline.hpp"
#include "ctmar/rng.hpp"

namespace fs = std::filesystem;
using namespace ctmar;

namespace {

ExperimentConfig config_from_flag(const std::string& config_path) {
    return config_path.empty() ? ExperimentConfig{} : load_config(config_path);
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    ExperimentConfig cfg = config_from_flag(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    SimulatedCase c = simulate_case(cfg);
    write_case(c, cfg, cfg.output_dir);
    std::cout << "wrote " << cfg.output_dir << "/{x_gt,m,y,y_gt,tr,x_ma}.f32\n";
    return 0;
}

int cmd_reconstruct(const std::string& config_path, const std::string& in_dir,
                    const std::string& out_dir, const std::string& method_name,
                    bool record_stages) {
    ExperimentConfig cfg = config_from_flag(config_path);
    Method method = method_from_string(method_name);
    SimulatedCase c = read_case(in_dir);
    Projector proj(c.geo);
    cfg.solver.record_stages = record_stages;

    const fs::path dir = out_dir.empty() ? fs::path(in_dir) : fs::path(out_dir);
    fs::create_directories(dir);

    RasterMeta meta;
    meta.kind = RasterKind::image;
    meta.units = "attenuation_per_length";
    meta.seeds = {{"global", static_cast<std::int64_t>(cfg.seed)}};

    SolveResult solver_out{Image::zeros(c.geo), Sinogram::zeros(c.geo), {}};
    Image x = reconstruct_case(method, c, cfg, proj, &solver_out);
    const fs::path x_path = dir / ("x_" + to_string(method) + ".f32");
    write_raster(x_path, x, meta);
    std::cout << "wrote " << x_path.string() << "\n";

    if (method == Method::dudo) {
        RasterMeta smeta = meta;
        smeta.kind = RasterKind::sinogram;
        smeta.units = "line_integral";
        write_raster(dir / "s_n.f32", solver_out.s, smeta);
        std::cout << "wrote " << (dir / "s_n.f32").string() << "\n";
        if (record_stages) {
            for (std::size_t k = 0; k < solver_out.stages.size(); ++k) {
                const SolverState& st = solver_out.stages[k];
                char tag[16];
                std::snprintf(tag, sizeof(tag), "%02zu", k);
                write_raster(dir / ("stage_" + std::string(tag) + "_s_tilde.f32"), st.s_tilde, smeta);
                std::vector<double> syn(static_cast<std::size_t>(st.s_tilde.size()));
                for (std::int64_t i = 0; i < st.s_tilde.size(); ++i) {
                    syn[i] = st.y_tilde.data()[i] * st.s_tilde.data()[i];
                }
                write_raster(dir / ("stage_" + std::string(tag) + "_s.f32"),
                             Sinogram(st.s_tilde.bins(), st.s_tilde.views(),
                                      st.s_tilde.detector_spacing(), std::move(syn)),
                             smeta);
                write_raster(dir / ("stage_" + std::string(tag) + "_x.f32"), st.x, meta);
            }
            std::cout << "wrote " << solver_out.stages.size() << " stage dumps\n";
        }
    }
    return 0;
}

int cmd_evaluate(const std::string& x_path, const std::string& ref_path, const std::string& mask_path,
                 const std::string& csv_path, const std::string& case_id,
                 const std::string& method_label) {
    auto [x, mx] = read_image(x_path);
    auto [ref, mr] = read_image(ref_path);
    auto [mask, mm] = read_image(mask_path);
    MetricReport report = evaluate(x, ref, mask);
    append_metrics_csv(csv_path, case_id, method_label, report);
    std::printf("%s,%s: psnr %.4f dB  ssim %.4f  masked_mse %.6g\n", case_id.c_str(),
                method_label.c_str(), csv_psnr_cap(report.psnr_db), report.ssim, report.masked_mse);
    return 0;
}

int cmd_bench(const std::string& config_path, int cases, const std::string& out_dir) {
    ExperimentConfig cfg = config_from_flag(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    fs::create_directories(cfg.output_dir);
    BenchResult res = run_bench(cfg, cases);
    write_bench_csv(res, fs::path(cfg.output_dir) / "bench.csv");
    write_bench_case_csv(res, fs::path(cfg.output_dir) / "bench_cases.csv");
    std::cout << "wrote " << cfg.output_dir << "/bench.csv and bench_cases.csv\n";
    return 0;
}

int cmd_stages(const std::string& config_path, const std::string& in_dir, const std::string& out_dir,
               std::optional<std::pair<double, double>> raw_window) {
    ExperimentConfig cfg = config_from_flag(config_path);
    const fs::path out = out_dir.empty() ? fs::path(in_dir) : fs::path(out_dir);
    fs::create_directories(out);
    int rendered = 0;
    for (int k = 0;; ++k) {
        char tag[16];
        std::snprintf(tag, sizeof(tag), "%02d", k);
        const fs::path s_tilde = fs::path(in_dir) / ("stage_" + std::string(tag) + "_s_tilde.f32");
        if (!fs::exists(s_tilde)) break;
        auto [st, m1] = read_sinogram(s_tilde);
        auto [sn, m2] = read_sinogram(fs::path(in_dir) / ("stage_" + std::string(tag) + "_s.f32"));
        auto [xn, m3] = read_image(fs::path(in_dir) / ("stage_" + std::string(tag) + "_x.f32"));

        // sinograms render with their own data window; the image uses the
        // configured HU display window unless a raw window is given
        auto window_of = [](std::span<const double> d) {
            return std::pair<double, double>(*std::min_element(d.begin(), d.end()),
                                             *std::max_element(d.begin(), d.end()) + 1e-12);
        };
        auto [slo, shi] = window_of(st.data());
        export_pgm(Image(st.bins(), st.views(), 1.0, st.copy_data()), slo, shi,
                   out / ("stage_" + std::string(tag) + "_s_tilde.pgm"));
        auto [nlo, nhi] = window_of(sn.data());
        export_pgm(Image(sn.bins(), sn.views(), 1.0, sn.copy_data()), nlo, nhi,
                   out / ("stage_" + std::string(tag) + "_s.pgm"));
        double lo, hi;
        if (raw_window) {
            lo = raw_window->first;
            hi = raw_window->second;
        } else {
            lo = cfg.display.hu.to_mu(cfg.display.window_lo_hu);
            hi = cfg.display.hu.to_mu(cfg.display.window_hi_hu);
        }
        export_pgm(xn, lo, hi, out / ("stage_" + std::string(tag) + "_x.pgm"));
        ++rendered;
    }
    if (rendered == 0) throw IoError("stages: no stage dumps found in " + in_dir);
    std::cout << "rendered " << rendered << " stages into " << out.string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CT metal artifact reduction toolkit"};
    app.require_subcommand(1);

    std::string config_path, in_dir, out_dir, method_name = "dudo";
    std::string x_path, ref_path, mask_path, csv_path = "metrics.csv";
    std::string case_id = "case", method_label = "method";
    int cases = 10;
    bool record_stages = false;
    std::vector<double> window_flag;

    auto* sim = app.add_subcommand("simulate", "generate a phantom/metal case");
    sim->add_option("--config", config_path, "experiment config JSON");
    sim->add_option("--out", out_dir, "output directory");

    auto* rec = app.add_subcommand("reconstruct", "reconstruct a simulated case");
    rec->add_option("--config", config_path, "experiment config JSON");
    rec->add_option("--in", in_dir, "directory holding the simulate outputs")->required();
    rec->add_option("--out", out_dir, "output directory (default: --in)");
    rec->add_option("--method", method_name, "fbp | li | nmar | dudo")->required();
    rec->add_flag("--record-stages", record_stages, "write per-stage dumps (dudo only)");

    auto* eval = app.add_subcommand("evaluate", "score a reconstruction against ground truth");
    eval->add_option("--x", x_path, "reconstruction raster")->required();
    eval->add_option("--ref", ref_path, "ground-truth raster")->required();
    eval->add_option("--mask", mask_path, "metal mask raster")->required();
    eval->add_option("--csv", csv_path, "CSV to append to");
    eval->add_option("--case", case_id, "case label for the CSV row");
    eval->add_option("--method", method_label, "method label for the CSV row");

    auto* bench = app.add_subcommand("bench", "run the seeded multi-case comparison");
    bench->add_option("--config", config_path, "experiment config JSON");
    bench->add_option("--cases", cases, "number of cases");
    bench->add_option("--out", out_dir, "output directory");

    auto* stages = app.add_subcommand("stages", "render per-stage dumps to PGM");
    stages->add_option("--config", config_path, "experiment config JSON");
    stages->add_option("--in", in_dir, "directory holding stage_*.f32 dumps")->required();
    stages->add_option("--out", out_dir, "output directory (default: --in)");
    stages->add_option("--window", window_flag, "raw-value display window lo hi")->expected(2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 1;
    }

    try {
        if (sim->parsed()) return cmd_simulate(config_path, out_dir);
        if (rec->parsed()) return cmd_reconstruct(config_path, in_dir, out_dir, method_name,
                                                  record_stages);
        if (eval->parsed()) return cmd_evaluate(x_path, ref_path, mask_path, csv_path, case_id,
                                                method_label);
        if (bench->parsed()) return cmd_bench(config_path, cases, out_dir);
        if (stages->parsed()) {
            std::optional<std::pair<double, double>> win;
            if (!window_flag.empty()) win = {window_flag[0], window_flag[1]};
            return cmd_stages(config_path, in_dir, out_dir, win);
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const PipelineError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
