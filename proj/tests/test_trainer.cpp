#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include <gtest/gtest.h>

#include "common.hpp"
#include "dinr/phantom.hpp"
#include "dinr/reference.hpp"
#include "dinr/trainer.hpp"

using namespace dinr;

namespace {

struct Problem {
    ProjectionSet proj;
    NetworkState net;
};

Problem desk_problem(std::size_t n = 8, std::size_t views = 6, std::size_t c = 4, std::size_t l = 2)
{
    const ScannerGeometry g = test::parallel_geometry(n, 1.0);
    const ViewSchedule s = test::half_turn(views);
    Problem p;
    p.proj = simulate(static_disk_phantom(g), g, s, 2, 0.0, 1);
    NetworkConfig cfg;
    cfg.c_half = c;
    cfg.n_hidden = l;
    cfg.seed = 3;
    p.net = init_network(cfg, NormalizationBounds::from(g, s));
    return p;
}

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double m = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, test::rel_err(a[k], b[k], 1e-8));
    return m;
}

}  // namespace

TEST(EpochArithmetic, IterationsPerEpoch)
{
    TrainConfig cfg;
    cfg.k_workers = 128;
    cfg.batch_per_worker = 48;
    EXPECT_EQ(cfg.total_batch(), 6144u);
    EXPECT_EQ(iterations_per_epoch(6144, 6144), 1u);
    EXPECT_EQ(iterations_per_epoch(6145, 6144), 2u);
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<std::size_t> d(1, 5000);
    for (int k = 0; k < 1000; ++k) {
        const std::size_t mn = d(rng) * d(rng), b = d(rng);
        EXPECT_EQ(iterations_per_epoch(mn, b), (mn + b - 1) / b);
    }
    EXPECT_THROW(iterations_per_epoch(10, 0), std::invalid_argument);
}

TEST(TrainConfig, Validation)
{
    TrainConfig cfg;
    EXPECT_NO_THROW(cfg.validate());
    cfg.k_workers = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.lr_decay = 1.5;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.batch_per_worker = 0;
    EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Adam, FirstStepIsSignStep)
{
    OptimizerState opt(4);
    std::vector<double> p{1, 2, 3, 4};
    const std::vector<double> g{0.5, -2.0, 1e-3, -7.0};
    adam_step(opt, p, g, 0.01);
    EXPECT_NEAR(p[0], 1 - 0.01, 1e-9);
    EXPECT_NEAR(p[1], 2 + 0.01, 1e-9);
    EXPECT_NEAR(p[2], 3 - 0.01, 1e-7);
    EXPECT_NEAR(p[3], 4 + 0.01, 1e-9);
    EXPECT_EQ(opt.step_count, 1u);
}

TEST(Adam, ZeroGradientKeepsParameters)
{
    OptimizerState opt(3);
    std::vector<double> p{1, -2, 3};
    const auto before = p;
    adam_step(opt, p, std::vector<double>(3, 0.0), 0.1);
    EXPECT_EQ(p, before);
}

TEST(Adam, DeterministicTrajectories)
{
    OptimizerState a(2), b(2);
    std::vector<double> pa{0.3, 0.4}, pb = pa;
    for (int k = 0; k < 20; ++k) {
        const std::vector<double> g{std::sin(k * 1.0), std::cos(k * 0.7)};
        adam_step(a, pa, g, 1e-2);
        adam_step(b, pb, g, 1e-2);
    }
    EXPECT_EQ(pa, pb);
    EXPECT_EQ(a.first_moment, b.first_moment);
}

TEST(AllReduce, Examples)
{
    GradientVector g(3);
    g.values = {1, -2, 3};
    std::vector<GradientVector> same(4, g);
    EXPECT_EQ(allreduce_mean(same).values, g.values);
    GradientVector neg(3);
    neg.values = {-1, 2, -3};
    std::vector<GradientVector> pair{g, neg};
    for (double v : allreduce_mean(pair).values) EXPECT_EQ(v, 0.0);
    std::vector<GradientVector> bad{g, GradientVector(2)};
    EXPECT_THROW(allreduce_mean(bad), std::invalid_argument);
}

TEST(AllReduce, ThreadedCommunicatorMatchesSerialMean)
{
    const std::size_t ranks = 4, len = 1001;
    std::mt19937_64 rng(4);
    std::normal_distribution<double> gauss;
    std::vector<GradientVector> grads(ranks, GradientVector(len));
    for (auto& g : grads)
        for (double& v : g.values) v = gauss(rng);
    const GradientVector expect = allreduce_mean(grads);
    for (int round = 0; round < 3; ++round) {
        InProcessCommunicator comm(ranks, len);
        std::vector<GradientVector> work = grads;
        std::vector<std::jthread> threads;
        for (std::size_t k = 0; k < ranks; ++k)
            threads.emplace_back([&, k] { comm.allreduce_mean(k, work[k].span(), 1.0); });
        threads.clear();
        for (const auto& w : work) EXPECT_EQ(w.values, expect.values);
    }
}

TEST(LocalLoss, ConsistentDataGivesZeroLossAndGradient)
{
    Problem p = desk_problem();
    for (std::size_t i = 0; i < p.proj.size(); ++i)
        p.proj.values[i] = predicted_projection(p.net, p.proj, i, 2, SamplingMode::EquiSpaced, 0);
    std::vector<std::size_t> omega(p.proj.size());
    std::iota(omega.begin(), omega.end(), 0);
    GradientVector grad;
    WorkerScratch scratch;
    const LocalResult r = local_loss_and_grad(p.net, p.proj, omega, 2, SamplingMode::EquiSpaced, 0, grad, scratch);
    EXPECT_LE(r.loss, 1e-24);
    for (double g : grad.values) EXPECT_LE(std::abs(g), 1e-12);
}

TEST(LocalLoss, MatchesFiniteDifferences)
{
    const Problem p = desk_problem(8, 4, 4, 2);
    const std::vector<std::size_t> omega{4 * 8 + 3};
    GradientVector grad;
    WorkerScratch scratch;
    local_loss_and_grad(p.net, p.proj, omega, 2, SamplingMode::EquiSpaced, 0, grad, scratch);
    double gmax = 0.0;
    for (double g : grad.values) gmax = std::max(gmax, std::abs(g));
    const double h = 1e-4;
    for (std::size_t k = 0; k < p.net.params.size(); ++k) {
        NetworkState plus = p.net, minus = p.net;
        plus.params[k] += h;
        minus.params[k] -= h;
        GradientVector tmp;
        const double lp = local_loss_and_grad(plus, p.proj, omega, 2, SamplingMode::EquiSpaced, 0, tmp, scratch).loss;
        const double lm = local_loss_and_grad(minus, p.proj, omega, 2, SamplingMode::EquiSpaced, 0, tmp, scratch).loss;
        const double fd = (lp - lm) / (2 * h);
        const double scale = std::max({std::abs(fd), std::abs(grad.values[k]), 1e-3 * gmax});
        EXPECT_LT(std::abs(fd - grad.values[k]) / scale, 1e-4) << "parameter " << k;
    }
}

TEST(LocalLoss, MeanOfSinglePixelLossesAndReference)
{
    const Problem p = desk_problem();
    const std::vector<std::size_t> omega{3, 70, 71, 200, 301, 5};
    GradientVector grad, one, ref;
    WorkerScratch scratch;
    const auto mode = SamplingMode::Randomized;
    const LocalResult all = local_loss_and_grad(p.net, p.proj, omega, 2, mode, 5, grad, scratch, 100);
    double sum = 0.0;
    for (std::size_t i : omega)
        sum += local_loss_and_grad(p.net, p.proj, std::vector<std::size_t>{i}, 2, mode, 5, one, scratch).loss;
    EXPECT_NEAR(all.loss, sum / omega.size(), 1e-15 * std::max(1.0, all.loss));
    const LocalResult r = reference::local_loss_and_grad(p.net, p.proj, omega, 2, mode, 5, ref);
    EXPECT_NEAR(all.loss, r.loss, 1e-12 * all.loss);
    EXPECT_EQ(all.sample_count, r.sample_count);
    EXPECT_LT(max_rel_diff(grad.values, ref.values), 1e-9);
}

TEST(LocalLoss, EmptyPhiContributesSquaredProjection)
{
    Problem p = desk_problem();
    p.proj.geometry.fov_radius = 0.2;  // corner pixels now miss the FOV
    p.proj.values[0] = 0.3;
    GradientVector grad;
    WorkerScratch scratch;
    const LocalResult r =
        local_loss_and_grad(p.net, p.proj, std::vector<std::size_t>{0}, 2, SamplingMode::EquiSpaced, 0, grad, scratch);
    EXPECT_EQ(r.sample_count, 0u);
    EXPECT_DOUBLE_EQ(r.loss, 0.09);
    for (double g : grad.values) EXPECT_EQ(g, 0.0);
}

TEST(Train, EpochPermutationCoversEveryPixel)
{
    auto perm = epoch_permutation(1000, 7, 3);
    EXPECT_EQ(perm, epoch_permutation(1000, 7, 3));
    EXPECT_NE(perm, epoch_permutation(1000, 7, 4));
    std::sort(perm.begin(), perm.end());
    for (std::size_t k = 0; k < perm.size(); ++k) EXPECT_EQ(perm[k], k);
}

TEST(Train, WorkerSplitMatchesSingleWorker)
{
    const Problem p = desk_problem();
    TrainConfig one;
    one.k_workers = 1;
    one.batch_per_worker = 6;
    one.max_iterations = 10;
    one.seed = 2;
    TrainConfig two = one;
    two.k_workers = 2;
    two.batch_per_worker = 3;
    const TrainResult a = train(p.proj, p.net, one);
    const TrainResult b = train(p.proj, p.net, two);
    EXPECT_LT(max_rel_diff(a.state.params, b.state.params), 1e-12);
}

TEST(Train, ReplicasBitIdenticalAndBFrozen)
{
    const Problem p = desk_problem();
    TrainConfig cfg;
    cfg.k_workers = 3;
    cfg.batch_per_worker = 5;
    cfg.epochs = 2;
    std::size_t checks = 0;
    TrainHooks hooks;
    hooks.on_iteration = [&](const IterationRecord& r) {
        ASSERT_EQ(r.replicas.size(), 3u);
        for (const auto* rep : r.replicas) EXPECT_EQ(*rep, *r.replicas[0]);
        ++checks;
    };
    const TrainResult res = train(p.proj, p.net, cfg, hooks);
    const std::size_t per_epoch = iterations_per_epoch(p.proj.size(), 15);
    EXPECT_EQ(checks, 2 * per_epoch);
    ASSERT_EQ(res.reports.size(), 2u);
    EXPECT_EQ(res.reports[0].iterations, per_epoch);
    EXPECT_TRUE(res.state.b_matrix == p.net.b_matrix);
    EXPECT_NE(res.state.params, p.net.params);
}

TEST(Train, ThreadsAndSerialAgreeBitwise)
{
    const Problem p = desk_problem();
    TrainConfig cfg;
    cfg.k_workers = 4;
    cfg.batch_per_worker = 7;  // 384 pixels leave an uneven final batch
    cfg.epochs = 1;
    cfg.sampling_mode = SamplingMode::Randomized;
    const TrainResult a = train(p.proj, p.net, cfg);
    cfg.execution = Execution::Serial;
    const TrainResult b = train(p.proj, p.net, cfg);
    EXPECT_EQ(a.state.params, b.state.params);
    EXPECT_EQ(a.reports[0].mean_loss, b.reports[0].mean_loss);
}

TEST(Train, ResumeContinuesTrajectory)
{
    const Problem p = desk_problem();
    TrainConfig cfg;
    cfg.batch_per_worker = 40;
    cfg.epochs = 3;
    const TrainResult full = train(p.proj, p.net, cfg);
    TrainConfig first = cfg;
    first.epochs = 1;
    const TrainResult head = train(p.proj, p.net, first);
    const TrainResult tail = train(p.proj, p.net, cfg, {}, ResumePoint{head.state, head.optimizer, 1});
    EXPECT_EQ(full.state.params, tail.state.params);
    ASSERT_EQ(tail.reports.size(), 2u);
    EXPECT_EQ(tail.reports[1].mean_loss, full.reports[2].mean_loss);
}

TEST(Train, LossTrendsDownOnStaticDisk)
{
    const Problem p = desk_problem(16, 30, 16, 2);
    TrainConfig cfg;
    cfg.batch_per_worker = 48;
    cfg.epochs = 8;
    cfg.lr0 = 3e-3;
    const TrainResult r = train(p.proj, p.net, cfg);
    ASSERT_EQ(r.reports.size(), 8u);
    for (std::size_t e = 4; e < r.reports.size(); ++e)
        EXPECT_LE(r.reports[e].mean_loss, 1.05 * r.reports[e - 1].mean_loss) << "epoch " << e;
    EXPECT_LT(r.reports.back().mean_loss, 0.5 * r.reports.front().mean_loss);
}

TEST(Train, NonFiniteLossIsReported)
{
    Problem p = desk_problem();
    p.net.params[0] = std::nan("");
    TrainConfig cfg;
    cfg.max_iterations = 1;
    EXPECT_THROW(train(p.proj, p.net, cfg), NumericError);
}

TEST(Scaling, OneRowPerWorkerCount)
{
    const Problem p = desk_problem();
    TrainConfig cfg;
    cfg.k_workers = 4;
    cfg.batch_per_worker = 6;
    const std::vector<std::size_t> workers{1, 2, 4};
    const auto rows = scaling_benchmark(p.proj, p.net.config, cfg, workers, 2);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].workers, 1u);
    EXPECT_DOUBLE_EQ(rows[0].speedup, 1.0);
    for (const auto& r : rows) EXPECT_GT(r.wall_time, 0.0);
    const std::vector<std::size_t> bad{5};
    EXPECT_THROW(scaling_benchmark(p.proj, p.net.config, cfg, bad, 1), std::invalid_argument);
}
