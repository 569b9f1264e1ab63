#pragma once

#include <barrier>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "dinr/network.hpp"
#include "dinr/sampler.hpp"
#include "dinr/simulator.hpp"

namespace dinr {

enum class Execution {
    Threads,  // one thread per worker, collective all-reduce
    Serial    // workers run in rank order on the calling thread
};

/// Raised when the loss or gradient stops being finite.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct TrainConfig {
    std::size_t k_workers = 1;          // K
    std::size_t batch_per_worker = 48;  // |Omega_k|
    double lr0 = 1e-3;
    double lr_decay = 0.95;
    std::size_t epochs = 1;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    std::size_t d_factor = 2;
    SamplingMode sampling_mode = SamplingMode::EquiSpaced;
    std::uint64_t seed = 0;
    std::size_t max_iterations = 0;     // 0 = run all epochs
    std::size_t chunk_samples = 1024;   // network batch size inside a worker
    Execution execution = Execution::Threads;

    void validate() const;
    std::size_t total_batch() const { return k_workers * batch_per_worker; }  // Omega_*
};

/// ceil(MN / Omega_*)
std::size_t iterations_per_epoch(std::size_t n_projections, std::size_t total_batch);

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step_count = 0;

    OptimizerState() = default;
    explicit OptimizerState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(OptimizerState& opt, std::span<double> params, std::span<const double> grad, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Element-wise mean over ranks, summed in rank order.
GradientVector allreduce_mean(std::span<const GradientVector> grads);

/// Collective used by the workers of one training run. A network transport only
/// has to provide this exchange; the trainer never shares other mutable state.
class Communicator {
public:
    virtual ~Communicator() = default;
    virtual std::size_t size() const = 0;
    /// Every rank contributes `data` with batch `weight`; on return each rank's
    /// `data` holds the weighted mean, summed in rank order. Equal weights give
    /// the plain mean.
    virtual void allreduce_mean(std::size_t rank, std::span<double> data, double weight) = 0;
};

/// Shared-memory communicator for ranks running on threads of one process.
class InProcessCommunicator final : public Communicator {
public:
    InProcessCommunicator(std::size_t ranks, std::size_t length);
    std::size_t size() const override { return slots_.size(); }
    void allreduce_mean(std::size_t rank, std::span<double> data, double weight) override;

private:
    std::vector<double*> slots_;
    std::vector<double> weights_;
    std::vector<double> result_;
    std::barrier<> sync_;
};

/// Per-worker scratch for loss evaluation.
struct WorkerScratch {
    BatchEvaluator evaluator;
    std::vector<CoordinateSample> samples;
    std::vector<std::size_t> pixel_begin;
    std::vector<double> upstream;
};

struct LocalResult {
    double loss = 0.0;           // mean d_i over Omega_k
    std::size_t sample_count = 0;
};

/// Loss L(Omega_k) and its gradient. `grad` is overwritten.
LocalResult local_loss_and_grad(const NetworkState& state, const ProjectionSet& proj,
                                std::span<const std::size_t> omega_k, std::size_t d_factor, SamplingMode mode,
                                std::uint64_t seed, GradientVector& grad, WorkerScratch& scratch,
                                std::size_t chunk_samples = 1024);

/// Model projection p_bar_i alone (no gradient).
double predicted_projection(const NetworkState& state, const ProjectionSet& proj, std::size_t i,
                            std::size_t d_factor, SamplingMode mode, std::uint64_t seed);

struct EpochReport {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    std::size_t iterations = 0;
    double wall_time = 0.0;
};

struct IterationRecord {
    std::size_t epoch = 0;
    std::size_t iteration = 0;      // within the epoch
    std::size_t global_step = 0;
    double loss = 0.0;              // global batch mean
    double lr = 0.0;
    double wall_time = 0.0;         // seconds since train() started
    /// Parameter replicas held by the workers after the update.
    std::span<const std::vector<double>* const> replicas;
};

struct TrainHooks {
    std::function<void(const IterationRecord&)> on_iteration;
    std::function<void(const EpochReport&, const NetworkState&, const OptimizerState&)> on_epoch_end;
};

/// Where to pick up a run: parameters, optimizer moments and the first epoch to run.
struct ResumePoint {
    NetworkState state;
    OptimizerState optimizer;
    std::size_t next_epoch = 0;
};

struct TrainResult {
    NetworkState state;
    OptimizerState optimizer;
    std::vector<EpochReport> reports;
};

/// Distributed stochastic training of `initial` on `proj`.
TrainResult train(const ProjectionSet& proj, const NetworkState& initial, const TrainConfig& cfg,
                  const TrainHooks& hooks = {}, std::optional<ResumePoint> resume = std::nullopt);

/// Convenience overload: initializes the network from `net_cfg` first.
TrainResult train(const ProjectionSet& proj, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const TrainHooks& hooks = {});

/// Pixel permutation for one epoch.
std::vector<std::size_t> epoch_permutation(std::size_t n_projections, std::uint64_t seed, std::size_t epoch);

struct ScalingRow {
    std::size_t workers = 0;
    double wall_time = 0.0;
    double speedup = 1.0;
};

/// Times `iterations` training iterations at each worker count with the total
/// batch held fixed at cfg.total_batch().
std::vector<ScalingRow> scaling_benchmark(const ProjectionSet& proj, const NetworkConfig& net_cfg,
                                          const TrainConfig& cfg, std::span<const std::size_t> worker_counts,
                                          std::size_t iterations);

}  // namespace dinr
