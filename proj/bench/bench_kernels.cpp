// OpenMP / batched kernels against the serial reference implementations.
// Thread count follows OMP_NUM_THREADS.

#include <numbers>

#include <benchmark/benchmark.h>

#include "dinr/phantom.hpp"
#include "dinr/recon.hpp"
#include "dinr/reference.hpp"
#include "dinr/sampler.hpp"
#include "dinr/simulator.hpp"
#include "dinr/trainer.hpp"

using namespace dinr;

namespace {

struct Scene {
    ScannerGeometry geom;
    ViewSchedule schedule;
    DynamicPhantom phantom;
    ProjectionSet proj;
    NetworkState net;
};

const Scene& scene()
{
    static const Scene s = [] {
        Scene sc;
        ScannerGeometry& g = sc.geom;
        g.beam = BeamType::Parallel;
        g.sod = g.odd = 10.0;
        g.n_rows = g.n_cols = 32;
        g.pixel_dx = g.pixel_dz = 0.1;
        g.offset_cx = g.offset_cz = 1.6;
        g.fov_radius = 1.6;
        sc.schedule = ViewSchedule::uniform(45, std::numbers::pi, 1.0);
        sc.phantom = compress_phantom(g, 44.0);
        sc.proj = simulate(sc.phantom, g, sc.schedule, 2, 0.0, 0);
        NetworkConfig nc;
        nc.c_half = 32;
        nc.n_hidden = 3;
        sc.net = init_network(nc, NormalizationBounds::from(g, sc.schedule));
        return sc;
    }();
    return s;
}

std::vector<CoordinateSample> samples(std::size_t n)
{
    const Scene& s = scene();
    std::vector<CoordinateSample> out;
    for (std::size_t i = 0; out.size() < n; i = (i + 97) % s.proj.size())
        sample_pixel_into(s.geom, s.schedule, i, 2, SamplingMode::EquiSpaced, 0, out);
    out.resize(n);
    return out;
}

std::vector<std::size_t> omega()
{
    std::vector<std::size_t> o;
    for (std::size_t k = 0; k < 48; ++k) o.push_back((k * 7919) % scene().proj.size());
    return o;
}

GridSpec grid()
{
    GridSpec g = GridSpec::covering(scene().geom, scene().schedule);
    g.frame_times = {scene().schedule.times[20]};
    return g;
}

void BM_Simulate(benchmark::State& st)
{
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(simulate(s.phantom, s.geom, s.schedule, 2, 0.001, 1));
}

void BM_SimulateReference(benchmark::State& st)
{
    const Scene& s = scene();
    for (auto _ : st) benchmark::DoNotOptimize(reference::simulate(s.phantom, s.geom, s.schedule, 2, 0.001, 1));
}

void BM_Forward(benchmark::State& st)
{
    const auto x = samples(static_cast<std::size_t>(st.range(0)));
    BatchEvaluator eval;
    for (auto _ : st) benchmark::DoNotOptimize(eval.forward(scene().net, x).data());
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_ForwardReference(benchmark::State& st)
{
    const auto x = samples(static_cast<std::size_t>(st.range(0)));
    for (auto _ : st)
        for (const auto& r : x) benchmark::DoNotOptimize(reference::forward_unitless(scene().net, r));
    st.SetItemsProcessed(st.iterations() * st.range(0));
}

void BM_LocalLoss(benchmark::State& st)
{
    const auto o = omega();
    GradientVector g;
    WorkerScratch scratch;
    for (auto _ : st)
        benchmark::DoNotOptimize(
            local_loss_and_grad(scene().net, scene().proj, o, 2, SamplingMode::EquiSpaced, 0, g, scratch).loss);
}

void BM_LocalLossReference(benchmark::State& st)
{
    const auto o = omega();
    GradientVector g;
    for (auto _ : st)
        benchmark::DoNotOptimize(
            reference::local_loss_and_grad(scene().net, scene().proj, o, 2, SamplingMode::EquiSpaced, 0, g).loss);
}

void BM_Infer(benchmark::State& st)
{
    const GridSpec gs = grid();
    for (auto _ : st) benchmark::DoNotOptimize(infer(scene().net, gs).data.data());
}

void BM_InferReference(benchmark::State& st)
{
    const GridSpec gs = grid();
    for (auto _ : st) benchmark::DoNotOptimize(reference::infer(scene().net, gs).data.data());
}

void BM_Fbp(benchmark::State& st)
{
    const GridSpec gs = grid();
    for (auto _ : st) benchmark::DoNotOptimize(fbp_frames(scene().proj, 1, gs).data.data());
}

void BM_BackprojectReference(benchmark::State& st)
{
    const GridSpec gs = grid();
    const ProjectionSet& p = scene().proj;
    const auto filtered = ramp_filter(p);
    const double dtheta = (p.schedule.angles.back() - p.schedule.angles.front()) / double(p.n_views() - 1);
    for (auto _ : st)
        benchmark::DoNotOptimize(reference::backproject(p, filtered, 0, p.n_views(), gs, dtheta).data());
}

}  // namespace

BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Forward)->Arg(1024)->Arg(4096)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ForwardReference)->Arg(1024)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_LocalLoss)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LocalLossReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Infer)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InferReference)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Fbp)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackprojectReference)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
