// dinr: simulate -> train -> infer -> metrics, plus the FBP baseline and the
// strong-scaling harness.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <omp.h>

#include "dinr/config.hpp"
#include "dinr/io.hpp"
#include "dinr/recon.hpp"
#include "dinr/simulator.hpp"
#include "dinr/trainer.hpp"

namespace fs = std::filesystem;
using namespace dinr;

namespace {

enum Exit { kOk = 0, kValidation = 1, kIo = 2, kNumeric = 3 };

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void apply_thread_override()
{
    if (const char* env = std::getenv("DINR_NUM_THREADS")) {
        char* end = nullptr;
        const long n = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || n < 1) throw ValidationError("DINR_NUM_THREADS must be a positive integer");
        omp_set_num_threads(static_cast<int>(n));
    }
}

RunConfig load_config(const std::string& path)
{
    RunConfig rc = RunConfig::load(path);
    for (const auto& w : rc.warnings) std::cerr << "warning: " << w << "\n";
    return rc;
}

/// Writes the resolved config next to an output so the run can be repeated from it.
void echo_config(const RunConfig& rc, const fs::path& output)
{
    const fs::path echo = output.string() + ".config.json";
    std::ofstream out(echo);
    if (!out) throw IoError("cannot write " + echo.string());
    out << rc.to_json().dump(2) << "\n";
}

template <typename T>
void expect_field(const std::string& name, T header, T config)
{
    if (header != config) {
        std::ostringstream msg;
        msg.precision(17);
        msg << "projection header " << name << "=" << header << " does not match config " << name << "=" << config;
        throw ValidationError(msg.str());
    }
}

void check_header(const ProjectionSet& proj, const RunConfig& rc)
{
    const ScannerGeometry& a = proj.geometry;
    const ScannerGeometry& b = rc.geometry;
    expect_field("geometry.beam", a.beam == BeamType::Cone ? 1 : 0, b.beam == BeamType::Cone ? 1 : 0);
    expect_field("geometry.n_rows", a.n_rows, b.n_rows);
    expect_field("geometry.n_cols", a.n_cols, b.n_cols);
    expect_field("geometry.sod", a.sod, b.sod);
    expect_field("geometry.odd", a.odd, b.odd);
    expect_field("geometry.pixel_dx", a.pixel_dx, b.pixel_dx);
    expect_field("geometry.pixel_dz", a.pixel_dz, b.pixel_dz);
    expect_field("geometry.offset_cx", a.offset_cx, b.offset_cx);
    expect_field("geometry.offset_cz", a.offset_cz, b.offset_cz);
    expect_field("geometry.fov_radius", a.fov_radius, b.fov_radius);
    expect_field("geometry.rot_center_x", a.rot_center_x, b.rot_center_x);
    expect_field("schedule.n_views", proj.n_views(), rc.schedule.size());
    for (std::size_t m = 0; m < proj.n_views(); ++m) {
        expect_field("schedule.angles[" + std::to_string(m) + "]", proj.schedule.angles[m], rc.schedule.angles[m]);
        expect_field("schedule.times[" + std::to_string(m) + "]", proj.schedule.times[m], rc.schedule.times[m]);
    }
}

void check_network(const NetworkConfig& ck, const NetworkConfig& cfg)
{
    auto fail = [](const std::string& f) {
        throw ValidationError("checkpoint network." + f + " does not match the config");
    };
    if (ck.c_half != cfg.c_half) fail("c_half");
    if (ck.n_hidden != cfg.n_hidden) fail("n_hidden");
    if (ck.sigma_s != cfg.sigma_s) fail("sigma_s");
    if (ck.sigma_t != cfg.sigma_t) fail("sigma_t");
    if (ck.mu0 != cfg.mu0) fail("mu0");
    if (ck.seed != cfg.seed) fail("seed");
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// simulate ---------------------------------------------------------------

struct SimulateArgs {
    std::string config;
    std::string out;
};

int cmd_simulate(const SimulateArgs& a)
{
    RunConfig rc = load_config(a.config);
    if (rc.phantom.primitives.empty() && rc.phantom.background == 0.0)
        throw ValidationError("phantom: missing section (simulate needs an object)");
    const fs::path out = a.out.empty() ? fs::path(rc.outputs.projections) : fs::path(a.out);
    ProjectionSet proj = simulate(rc.phantom, rc.geometry, rc.schedule, rc.simulate_d_factor, rc.noise_frac, rc.seed);
    proj.blank_intensity = rc.blank_intensity;
    write_projection_file(out, proj);
    echo_config(rc, out);
    std::cout << "wrote " << out.string() << " (" << proj.n_views() << " views, " << proj.geometry.pixels_per_view()
              << " pixels per view)\n";
    return kOk;
}

// train ------------------------------------------------------------------

struct TrainArgs {
    std::string config;
    std::string projections;
    std::string checkpoint;
    std::string log;
    std::string resume;
    std::size_t max_iterations = 0;
};

int cmd_train(const TrainArgs& a)
{
    RunConfig rc = load_config(a.config);
    if (a.max_iterations > 0) rc.training.max_iterations = a.max_iterations;
    const fs::path proj_path = a.projections.empty() ? fs::path(rc.outputs.projections) : fs::path(a.projections);
    const fs::path ck_path = a.checkpoint.empty() ? fs::path(rc.outputs.checkpoint) : fs::path(a.checkpoint);
    const fs::path log_path = a.log.empty() ? fs::path(rc.outputs.train_log) : fs::path(a.log);

    const ProjectionSet proj = read_projection_file(proj_path);
    check_header(proj, rc);

    std::optional<ResumePoint> resume;
    if (!a.resume.empty()) {
        Checkpoint ck = read_checkpoint(a.resume);
        if (!ck.resume) throw ValidationError(a.resume + ": checkpoint has no optimizer state to resume from");
        check_network(ck.state.config, rc.network);
        resume = std::move(ck.resume);
    }

    std::ofstream log(log_path, resume ? std::ios::app : std::ios::trunc);
    if (!log) throw IoError("cannot write " + log_path.string());
    if (!resume) log << "epoch,iteration,mean_loss,lr,wall_time_s\n";

    const std::size_t per_epoch = iterations_per_epoch(proj.size(), rc.training.total_batch());
    TrainHooks hooks;
    hooks.on_iteration = [&](const IterationRecord& r) {
        log << r.epoch << ',' << r.iteration << ',' << fmt(r.loss) << ',' << fmt(r.lr) << ','
            << (rc.log_wall_time ? fmt(r.wall_time) : std::string("0")) << '\n';
    };
    std::size_t last_complete = resume ? resume->next_epoch : 0;
    hooks.on_epoch_end = [&](const EpochReport& rep, const NetworkState& st, const OptimizerState& opt) {
        std::cerr << "epoch " << rep.epoch << " loss " << rep.mean_loss << " (" << rep.wall_time << " s)\n";
        if (rep.iterations != per_epoch) return;
        last_complete = rep.epoch + 1;
        if (rc.checkpoint_every > 0 && last_complete % rc.checkpoint_every == 0) {
            log.flush();
            write_checkpoint(ck_path, st, &opt, last_complete);
        }
    };

    const NetworkState initial = init_network(rc.network, NormalizationBounds::from(proj.geometry, proj.schedule));
    TrainResult res = train(proj, initial, rc.training, hooks, resume);

    // A run stopped by the iteration budget ends mid-epoch and cannot be resumed exactly.
    const bool complete = !res.reports.empty() && res.reports.back().iterations == per_epoch;
    write_checkpoint(ck_path, res.state, complete ? &res.optimizer : nullptr, last_complete);
    log.flush();
    if (!log) throw IoError("write failed: " + log_path.string());
    echo_config(rc, ck_path);
    std::cout << "wrote " << ck_path.string() << " and " << log_path.string() << "\n";
    return kOk;
}

// infer ------------------------------------------------------------------

struct GridArgs {
    std::optional<std::size_t> frames;
    std::optional<double> voxel_size;
    std::size_t downsample = 1;
};

std::vector<double> frame_times(const GridArgs& g, double t0, double t1, const ViewSchedule* schedule)
{
    if (!g.frames) {
        if (!schedule) throw ValidationError("--frames is required without --config");
        return schedule->times;
    }
    const std::size_t n = *g.frames;
    if (n <= 1) return {0.5 * (t0 + t1)};
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = t0 + (t1 - t0) * static_cast<double>(k) / static_cast<double>(n - 1);
    return t;
}

double resolve_voxel(const GridArgs& g, const ScannerGeometry* geom)
{
    if (g.downsample < 1) throw ValidationError("--downsample must be >= 1");
    double voxel = 0.0;
    if (g.voxel_size) {
        if (!(*g.voxel_size > 0.0)) throw ValidationError("--voxel-size must be > 0");
        voxel = *g.voxel_size;
    } else {
        if (!geom) throw ValidationError("--voxel-size is required without --config");
        voxel = geom->object_pixel_size();
    }
    return voxel * static_cast<double>(g.downsample);
}

struct InferArgs {
    std::string checkpoint;
    std::string config;
    std::string out;
    std::string truth;
    GridArgs grid;
};

int cmd_infer(const InferArgs& a)
{
    std::optional<RunConfig> rc;
    if (!a.config.empty()) rc = load_config(a.config);
    const Checkpoint ck = read_checkpoint(a.checkpoint);
    const NormalizationBounds& b = ck.state.bounds;

    GridSpec grid = GridSpec::covering(b, resolve_voxel(a.grid, rc ? &rc->geometry : nullptr));
    grid.frame_times = frame_times(a.grid, b.t_min, b.t_max, rc ? &rc->schedule : nullptr);

    const fs::path out = !a.out.empty() ? fs::path(a.out) : rc ? fs::path(rc->outputs.volume) : fs::path("recon.vol4");
    VolumeWriter writer(out, grid);
    infer_stream(ck.state, grid, [&](std::size_t, std::span<const double> v) { writer.write_frame(v); });
    writer.close();
    if (rc) echo_config(*rc, out);
    std::cout << "wrote " << out.string() << " (" << grid.frame_times.size() << " frames of " << grid.nz << "x"
              << grid.ny << "x" << grid.nx << ")\n";

    if (!a.truth.empty()) {
        if (!rc) throw ValidationError("--truth needs --config with a phantom section");
        write_volume_file(a.truth, sample_phantom(rc->phantom, grid));
        std::cout << "wrote " << a.truth << "\n";
    }
    return kOk;
}

// metrics ----------------------------------------------------------------

struct MetricsArgs {
    std::string recon;
    std::string truth;
    std::string out;
};

int cmd_metrics(const MetricsArgs& a)
{
    const VoxelGrid4D recon = read_volume_file(a.recon);
    const VoxelGrid4D truth = read_volume_file(a.truth);
    if (recon.nt != truth.nt)
        throw ValidationError("frame count differs: " + std::to_string(recon.nt) + " vs " + std::to_string(truth.nt));
    if (recon.nz != truth.nz || recon.ny != truth.ny || recon.nx != truth.nx)
        throw ValidationError("volume dimensions differ");
    const QualityReport rep = evaluate_quality(recon, truth);

    std::ostringstream csv;
    auto num = [](double v) { return std::isinf(v) ? std::string("inf") : fmt(v); };
    csv << "frame_index,time_s,psnr_db,ssim\n";
    for (std::size_t t = 0; t < truth.nt; ++t)
        csv << t << ',' << fmt(truth.frame_times[t]) << ',' << num(rep.per_frame[t].first) << ','
            << num(rep.per_frame[t].second) << '\n';
    csv << "mean,," << num(rep.psnr_db) << ',' << num(rep.ssim) << '\n';

    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(a.out);
        if (!out) throw IoError("cannot write " + a.out);
        out << csv.str();
    }
    return kOk;
}

// fbp --------------------------------------------------------------------

struct FbpArgs {
    std::string projections;
    std::string out;
    std::size_t frames = 2;
    std::optional<double> voxel_size;
    std::size_t downsample = 1;
};

int cmd_fbp(const FbpArgs& a)
{
    const ProjectionSet proj = read_projection_file(a.projections);
    if (proj.geometry.beam != BeamType::Parallel)
        throw ValidationError("fbp: unsupported geometry (cone beam input)");
    GridArgs ga;
    ga.voxel_size = a.voxel_size;
    ga.downsample = a.downsample;
    GridSpec grid = GridSpec::covering(proj.geometry, proj.schedule, resolve_voxel(ga, &proj.geometry));
    const VoxelGrid4D vol = fbp_frames(proj, a.frames, grid);
    const fs::path out = a.out.empty() ? fs::path("fbp.vol4") : fs::path(a.out);
    write_volume_file(out, vol);
    std::cout << "wrote " << out.string() << " (" << vol.nt << " frames)\n";
    return kOk;
}

// scaling ----------------------------------------------------------------

struct ScalingArgs {
    std::string config;
    std::string projections;
    std::string out;
    std::vector<std::size_t> workers{1, 2, 4};
    std::size_t iterations = 10;
};

int cmd_scaling(const ScalingArgs& a)
{
    RunConfig rc = load_config(a.config);
    ProjectionSet proj;
    if (!a.projections.empty()) {
        proj = read_projection_file(a.projections);
        check_header(proj, rc);
    } else {
        proj = simulate(rc.phantom, rc.geometry, rc.schedule, rc.simulate_d_factor, rc.noise_frac, rc.seed);
    }
    const auto rows = scaling_benchmark(proj, rc.network, rc.training, a.workers, a.iterations);
    std::ostringstream csv;
    csv << "workers,wall_time_s,speedup\n";
    for (const auto& r : rows) csv << r.workers << ',' << fmt(r.wall_time) << ',' << fmt(r.speedup) << '\n';
    if (a.out.empty()) {
        std::cout << csv.str();
    } else {
        std::ofstream out(a.out);
        if (!out) throw IoError("cannot write " + a.out);
        out << csv.str();
        echo_config(rc, a.out);
    }
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Dynamic CT reconstruction with an implicit neural representation"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* c_sim = app.add_subcommand("simulate", "Simulate projections of the configured phantom");
    c_sim->add_option("-c,--config", sim.config, "Run config (JSON)")->required();
    c_sim->add_option("-o,--out", sim.out, "Projection file (default: outputs.projections)");

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train the network on a projection file");
    c_train->add_option("-c,--config", tr.config, "Run config (JSON)")->required();
    c_train->add_option("-p,--projections", tr.projections, "Projection file (default: outputs.projections)");
    c_train->add_option("--checkpoint", tr.checkpoint, "Checkpoint path (default: outputs.checkpoint)");
    c_train->add_option("--log", tr.log, "Training log CSV (default: outputs.train_log)");
    c_train->add_option("--resume", tr.resume, "Continue from a checkpoint written at an epoch boundary");
    c_train->add_option("--max-iterations", tr.max_iterations, "Stop after this many iterations (0 = all epochs)");

    InferArgs inf;
    auto* c_infer = app.add_subcommand("infer", "Evaluate a checkpoint on a voxel grid");
    c_infer->add_option("-k,--checkpoint", inf.checkpoint, "Checkpoint")->required();
    c_infer->add_option("-c,--config", inf.config, "Run config; supplies the default voxel size and frame times");
    c_infer->add_option("-o,--out", inf.out, "VOL4 output (default: outputs.volume)");
    c_infer->add_option("--frames", inf.grid.frames, "Evenly spaced frames; 0 or 1 = the middle time only");
    c_infer->add_option("--voxel-size", inf.grid.voxel_size, "Voxel size in mm");
    c_infer->add_option("--downsample", inf.grid.downsample, "Integer factor applied to the voxel size");
    c_infer->add_option("--truth", inf.truth, "Also write the phantom sampled on the same grid");

    MetricsArgs met;
    auto* c_met = app.add_subcommand("metrics", "Per-frame PSNR and SSIM of a reconstruction");
    c_met->add_option("recon", met.recon, "Reconstructed VOL4")->required();
    c_met->add_option("truth", met.truth, "Ground-truth VOL4")->required();
    c_met->add_option("-o,--out", met.out, "CSV output (default: stdout)");

    FbpArgs fbp;
    auto* c_fbp = app.add_subcommand("fbp", "Filtered backprojection baseline");
    c_fbp->add_option("-p,--projections", fbp.projections, "Projection file")->required();
    c_fbp->add_option("-o,--out", fbp.out, "VOL4 output (default: fbp.vol4)");
    c_fbp->add_option("--frames", fbp.frames, "Number of contiguous view groups")->check(CLI::PositiveNumber);
    c_fbp->add_option("--voxel-size", fbp.voxel_size, "Voxel size in mm");
    c_fbp->add_option("--downsample", fbp.downsample, "Integer factor applied to the voxel size");

    ScalingArgs sc;
    auto* c_sc = app.add_subcommand("scaling", "Strong-scaling timings over worker counts");
    c_sc->add_option("-c,--config", sc.config, "Run config (JSON)")->required();
    c_sc->add_option("-p,--projections", sc.projections, "Projection file (default: simulate from the config)");
    c_sc->add_option("--workers", sc.workers, "Worker counts")->delimiter(',');
    c_sc->add_option("--iterations", sc.iterations, "Timed iterations per worker count");
    c_sc->add_option("-o,--out", sc.out, "CSV output (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kValidation;
    }

    try {
        apply_thread_override();
        if (*c_sim) return cmd_simulate(sim);
        if (*c_train) return cmd_train(tr);
        if (*c_infer) return cmd_infer(inf);
        if (*c_met) return cmd_metrics(met);
        if (*c_fbp) return cmd_fbp(fbp);
        if (*c_sc) return cmd_scaling(sc);
    } catch (const ConfigError& e) {
        std::cerr << "error: invalid config\n";
        for (const auto& p : e.problems()) std::cerr << "  " << p << "\n";
        return kValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kIo;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const MetricError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: out of range: " << e.what() << "\n";
        return kValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kValidation;
    }
    return kOk;
}
