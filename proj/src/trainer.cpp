#include "dinr/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <string>
#include <thread>

#include "dinr/rng.hpp"

namespace dinr {

void TrainConfig::validate() const
{
    if (k_workers < 1) throw std::invalid_argument("training: k_workers must be >= 1");
    if (batch_per_worker < 1) throw std::invalid_argument("training: batch_per_worker must be >= 1");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw std::invalid_argument("training: lr_decay must be in (0, 1]");
    if (!(lr0 > 0.0)) throw std::invalid_argument("training: lr0 must be > 0");
    if (d_factor < 1) throw std::invalid_argument("training: d_factor must be >= 1");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw std::invalid_argument("training: Adam betas must be in [0, 1)");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("training: adam_eps must be > 0");
    if (chunk_samples < 1) throw std::invalid_argument("training: chunk_samples must be >= 1");
}

std::size_t iterations_per_epoch(std::size_t n_projections, std::size_t total_batch)
{
    if (total_batch == 0) throw std::invalid_argument("total batch must be > 0");
    return (n_projections + total_batch - 1) / total_batch;
}

void adam_step(OptimizerState& opt, std::span<double> params, std::span<const double> grad, double lr,
               double beta1, double beta2, double eps)
{
    if (grad.size() != params.size()) throw std::invalid_argument("adam_step: gradient size mismatch");
    if (opt.first_moment.size() != params.size()) {
        opt.first_moment.assign(params.size(), 0.0);
        opt.second_moment.assign(params.size(), 0.0);
    }
    ++opt.step_count;
    const double t = static_cast<double>(opt.step_count);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t e = 0; e < params.size(); ++e) {
        const double g = grad[e];
        double& m = opt.first_moment[e];
        double& v = opt.second_moment[e];
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        params[e] -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
    }
}

namespace {

/// Rank-ordered weighted mean of elements [begin, end). Shared by the serial
/// reduction and the threaded communicator so both give identical bits.
void reduce_range(std::span<const double* const> sources, std::span<const double> weights, std::size_t begin,
                  std::size_t end, double* out)
{
    const std::size_t ranks = sources.size();
    const bool uniform = std::all_of(weights.begin(), weights.end(), [&](double w) { return w == weights[0]; });
    if (uniform) {
        const double inv = static_cast<double>(ranks);
        for (std::size_t e = begin; e < end; ++e) {
            double acc = 0.0;
            for (std::size_t k = 0; k < ranks; ++k) acc += sources[k][e];
            out[e] = acc / inv;
        }
        return;
    }
    double total = 0.0;
    for (double w : weights) total += w;
    for (std::size_t e = begin; e < end; ++e) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ranks; ++k) acc += weights[k] * sources[k][e];
        out[e] = acc / total;
    }
}

}  // namespace

GradientVector allreduce_mean(std::span<const GradientVector> grads)
{
    if (grads.empty()) throw std::invalid_argument("allreduce_mean: no gradients");
    const std::size_t n = grads.front().size();
    std::vector<const double*> sources;
    for (const auto& g : grads) {
        if (g.size() != n) throw std::invalid_argument("allreduce_mean: gradient length mismatch");
        sources.push_back(g.values.data());
    }
    const std::vector<double> weights(grads.size(), 1.0);
    GradientVector out(n);
    reduce_range(sources, weights, 0, n, out.values.data());
    return out;
}

InProcessCommunicator::InProcessCommunicator(std::size_t ranks, std::size_t length)
    : slots_(ranks, nullptr), weights_(ranks, 0.0), result_(length, 0.0),
      sync_(static_cast<std::ptrdiff_t>(ranks))
{
    if (ranks == 0) throw std::invalid_argument("communicator needs at least one rank");
}

void InProcessCommunicator::allreduce_mean(std::size_t rank, std::span<double> data, double weight)
{
    if (data.size() != result_.size()) throw std::invalid_argument("allreduce_mean: gradient length mismatch");
    slots_[rank] = data.data();
    weights_[rank] = weight;
    sync_.arrive_and_wait();

    // Each rank reduces one contiguous slice of the vector.
    const std::size_t ranks = slots_.size();
    const std::size_t n = result_.size();
    const std::size_t begin = n * rank / ranks;
    const std::size_t end = n * (rank + 1) / ranks;
    reduce_range(slots_, weights_, begin, end, result_.data());
    sync_.arrive_and_wait();

    std::copy(result_.begin(), result_.end(), data.begin());
}

namespace {

void flush_chunk(const NetworkState& state, const ProjectionSet& proj, std::span<const std::size_t> pixels,
                 double inv_omega, WorkerScratch& scratch, GradientVector& grad, double& loss_sum)
{
    const double mu0 = state.config.mu0;
    const auto out = scratch.evaluator.forward(state, scratch.samples);
    scratch.upstream.resize(scratch.samples.size());
    for (std::size_t q = 0; q < pixels.size(); ++q) {
        const std::size_t b = scratch.pixel_begin[q];
        const std::size_t e = scratch.pixel_begin[q + 1];
        const double n = static_cast<double>(e - b);
        double pbar = 0.0;
        for (std::size_t j = b; j < e; ++j) pbar += weight(scratch.samples[j], mu0) * out[j];
        pbar /= n;
        const double resid = proj.values[pixels[q]] - pbar;
        loss_sum += resid * resid;
        const double coef = -2.0 * resid * inv_omega / n;
        for (std::size_t j = b; j < e; ++j) scratch.upstream[j] = coef * weight(scratch.samples[j], mu0);
    }
    scratch.evaluator.backward(state, scratch.upstream, grad.span());
    scratch.samples.clear();
    scratch.pixel_begin.clear();
}

}  // namespace

LocalResult local_loss_and_grad(const NetworkState& state, const ProjectionSet& proj,
                                std::span<const std::size_t> omega_k, std::size_t d_factor, SamplingMode mode,
                                std::uint64_t seed, GradientVector& grad, WorkerScratch& scratch,
                                std::size_t chunk_samples)
{
    if (omega_k.empty()) throw std::invalid_argument("local_loss_and_grad: empty batch");
    if (grad.size() != state.params.size()) grad = GradientVector(state.params.size());
    grad.set_zero();

    const double inv_omega = 1.0 / static_cast<double>(omega_k.size());
    double loss_sum = 0.0;
    LocalResult result;
    scratch.samples.clear();
    scratch.pixel_begin.clear();

    std::vector<std::size_t> pending;
    for (std::size_t q = 0; q < omega_k.size(); ++q) {
        const std::size_t i = omega_k[q];
        if (i >= proj.size()) throw std::out_of_range("projection index " + std::to_string(i) + " out of range");
        const std::size_t start = scratch.samples.size();
        const std::size_t n =
            sample_pixel_into(proj.geometry, proj.schedule, i, d_factor, mode, seed, scratch.samples);
        result.sample_count += n;
        if (n == 0) {
            // No ray meets the FOV: the estimate is 0 and there is no gradient.
            loss_sum += proj.values[i] * proj.values[i];
            continue;
        }
        scratch.pixel_begin.push_back(start);
        pending.push_back(i);
        if (scratch.samples.size() >= chunk_samples) {
            scratch.pixel_begin.push_back(scratch.samples.size());
            flush_chunk(state, proj, pending, inv_omega, scratch, grad, loss_sum);
            pending.clear();
        }
    }
    if (!pending.empty()) {
        scratch.pixel_begin.push_back(scratch.samples.size());
        flush_chunk(state, proj, pending, inv_omega, scratch, grad, loss_sum);
    }
    result.loss = loss_sum * inv_omega;
    return result;
}

double predicted_projection(const NetworkState& state, const ProjectionSet& proj, std::size_t i,
                            std::size_t d_factor, SamplingMode mode, std::uint64_t seed)
{
    const SampleSet set = sample_pixel(proj.geometry, proj.schedule, i, d_factor, mode, seed);
    if (set.samples.empty()) return 0.0;
    BatchEvaluator eval;
    const auto out = eval.forward(state, set.samples);
    double sum = 0.0;
    for (std::size_t j = 0; j < set.samples.size(); ++j) sum += weight(set.samples[j], state.config.mu0) * out[j];
    return sum / static_cast<double>(set.samples.size());
}

std::vector<std::size_t> epoch_permutation(std::size_t n_projections, std::uint64_t seed, std::size_t epoch)
{
    std::vector<std::size_t> perm(n_projections);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Stream stream = make_stream(seed, {seed_tag::permutation, epoch});
    std::shuffle(perm.begin(), perm.end(), stream);
    return perm;
}

namespace {

/// State owned by one worker rank.
struct Worker {
    NetworkState replica;
    OptimizerState optimizer;
    GradientVector grad;
    WorkerScratch scratch;
    LocalResult local;
};

struct IterationJob {
    std::span<const std::size_t> batch;
    double lr = 0.0;
    std::uint64_t sampling_seed = 0;
    bool stop = false;
};

/// Contiguous split of `batch` into K near-equal parts (equal when |batch| = K |Omega_k|).
std::span<const std::size_t> worker_slice(std::span<const std::size_t> batch, std::size_t k, std::size_t ranks)
{
    const std::size_t n = batch.size();
    const std::size_t base = n / ranks;
    const std::size_t extra = n % ranks;
    const std::size_t begin = k * base + std::min(k, extra);
    const std::size_t len = base + (k < extra ? 1 : 0);
    return batch.subspan(begin, len);
}

void run_local(Worker& w, const ProjectionSet& proj, const TrainConfig& cfg, const IterationJob& job, std::size_t k)
{
    const auto slice = worker_slice(job.batch, k, cfg.k_workers);
    if (slice.empty()) {
        w.grad.set_zero();
        w.local = {};
        return;
    }
    w.local = local_loss_and_grad(w.replica, proj, slice, cfg.d_factor, cfg.sampling_mode, job.sampling_seed,
                                  w.grad, w.scratch, cfg.chunk_samples);
}

void apply_update(Worker& w, const TrainConfig& cfg, double lr)
{
    adam_step(w.optimizer, w.replica.params, w.grad.values, lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
}

}  // namespace

TrainResult train(const ProjectionSet& proj, const NetworkState& initial, const TrainConfig& cfg,
                  const TrainHooks& hooks, std::optional<ResumePoint> resume)
{
    cfg.validate();
    proj.validate();

    const std::size_t ranks = cfg.k_workers;
    const std::size_t n_proj = proj.size();
    const std::size_t per_epoch = iterations_per_epoch(n_proj, cfg.total_batch());
    const std::size_t first_epoch = resume ? resume->next_epoch : 0;

    std::vector<Worker> workers(ranks);
    for (auto& w : workers) {
        w.replica = resume ? resume->state : initial;
        w.optimizer = resume ? resume->optimizer : OptimizerState(w.replica.params.size());
        w.grad = GradientVector(w.replica.params.size());
    }
    std::vector<const std::vector<double>*> replica_views;
    for (const auto& w : workers) replica_views.push_back(&w.replica.params);

    const std::size_t n_params = workers.front().replica.params.size();
    InProcessCommunicator comm(ranks, n_params);
    IterationJob job;

    std::mutex error_mutex;
    std::exception_ptr error;
    auto record_error = [&] {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
    };

    // Threaded workers meet the driver at two barriers per iteration.
    std::barrier start_line(static_cast<std::ptrdiff_t>(ranks + 1));
    std::barrier finish_line(static_cast<std::ptrdiff_t>(ranks + 1));
    std::vector<std::jthread> threads;
    if (cfg.execution == Execution::Threads) {
        for (std::size_t k = 0; k < ranks; ++k) {
            threads.emplace_back([&, k] {
                Worker& w = workers[k];
                for (;;) {
                    start_line.arrive_and_wait();
                    if (job.stop) return;
                    try {
                        run_local(w, proj, cfg, job, k);
                    } catch (...) {
                        record_error();
                        w.grad.set_zero();
                        w.local = {};
                    }
                    const double share = static_cast<double>(worker_slice(job.batch, k, ranks).size());
                    comm.allreduce_mean(k, w.grad.span(), share);
                    apply_update(w, cfg, job.lr);
                    finish_line.arrive_and_wait();
                }
            });
        }
    }
    auto stop_threads = [&] {
        if (threads.empty()) return;
        job.stop = true;
        start_line.arrive_and_wait();
        threads.clear();
    };

    TrainResult result;
    const auto t_start = std::chrono::steady_clock::now();
    auto seconds_since = [](std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };

    std::size_t global_step = 0;
    bool budget_hit = false;
    try {
        for (std::size_t epoch = first_epoch; epoch < cfg.epochs && !budget_hit; ++epoch) {
            const auto t_epoch = std::chrono::steady_clock::now();
            const std::vector<std::size_t> perm = epoch_permutation(n_proj, cfg.seed, epoch);
            const double lr = cfg.lr0 * std::pow(cfg.lr_decay, static_cast<double>(epoch));
            const std::uint64_t sampling_seed = derive_seed(cfg.seed, {seed_tag::sampling, epoch});
            double loss_acc = 0.0;
            std::size_t done = 0;

            for (std::size_t it = 0; it < per_epoch; ++it) {
                if (cfg.max_iterations > 0 && global_step >= cfg.max_iterations) {
                    budget_hit = true;
                    break;
                }
                const std::size_t b = it * cfg.total_batch();
                const std::size_t e = std::min(b + cfg.total_batch(), n_proj);
                job.batch = std::span<const std::size_t>(perm).subspan(b, e - b);
                job.lr = lr;
                job.sampling_seed = sampling_seed;

                if (cfg.execution == Execution::Threads) {
                    start_line.arrive_and_wait();
                    finish_line.arrive_and_wait();
                    if (error) std::rethrow_exception(error);
                } else {
                    std::vector<const double*> sources;
                    std::vector<double> weights;
                    for (std::size_t k = 0; k < ranks; ++k) {
                        run_local(workers[k], proj, cfg, job, k);
                        sources.push_back(workers[k].grad.values.data());
                        weights.push_back(static_cast<double>(worker_slice(job.batch, k, ranks).size()));
                    }
                    std::vector<double> mean(n_params);
                    reduce_range(sources, weights, 0, n_params, mean.data());
                    for (auto& w : workers) {
                        std::copy(mean.begin(), mean.end(), w.grad.values.begin());
                        apply_update(w, cfg, lr);
                    }
                }

                double loss = 0.0;
                for (std::size_t k = 0; k < ranks; ++k)
                    loss += workers[k].local.loss * static_cast<double>(worker_slice(job.batch, k, ranks).size());
                loss /= static_cast<double>(job.batch.size());
                if (!std::isfinite(loss))
                    throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", iteration " +
                                       std::to_string(it));
                loss_acc += loss;
                ++done;
                ++global_step;

                if (hooks.on_iteration) {
                    IterationRecord rec;
                    rec.epoch = epoch;
                    rec.iteration = it;
                    rec.global_step = global_step;
                    rec.loss = loss;
                    rec.lr = lr;
                    rec.wall_time = seconds_since(t_start);
                    rec.replicas = replica_views;
                    hooks.on_iteration(rec);
                }
            }
            if (done == 0) break;
            EpochReport report{epoch, loss_acc / static_cast<double>(done), done, seconds_since(t_epoch)};
            result.reports.push_back(report);
            if (hooks.on_epoch_end) hooks.on_epoch_end(report, workers.front().replica, workers.front().optimizer);
        }
    } catch (...) {
        stop_threads();
        throw;
    }
    stop_threads();

    result.state = std::move(workers.front().replica);
    result.optimizer = std::move(workers.front().optimizer);
    return result;
}

TrainResult train(const ProjectionSet& proj, const NetworkConfig& net_cfg, const TrainConfig& cfg,
                  const TrainHooks& hooks)
{
    const NetworkState initial = init_network(net_cfg, NormalizationBounds::from(proj.geometry, proj.schedule));
    return train(proj, initial, cfg, hooks);
}

std::vector<ScalingRow> scaling_benchmark(const ProjectionSet& proj, const NetworkConfig& net_cfg,
                                          const TrainConfig& cfg, std::span<const std::size_t> worker_counts,
                                          std::size_t iterations)
{
    const std::size_t total = cfg.total_batch();
    const NetworkState initial = init_network(net_cfg, NormalizationBounds::from(proj.geometry, proj.schedule));
    std::vector<ScalingRow> rows;
    for (std::size_t k : worker_counts) {
        if (k == 0 || total % k != 0)
            throw std::invalid_argument("scaling: total batch " + std::to_string(total) +
                                        " is not divisible by worker count " + std::to_string(k));
        TrainConfig run = cfg;
        run.k_workers = k;
        run.batch_per_worker = total / k;
        run.max_iterations = iterations;
        run.epochs = iterations / iterations_per_epoch(proj.size(), total) + 1;
        run.execution = Execution::Threads;
        const auto t0 = std::chrono::steady_clock::now();
        train(proj, initial, run);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        rows.push_back({k, secs, 1.0});
    }
    if (!rows.empty()) {
        double base = rows.front().wall_time;
        for (const auto& r : rows)
            if (r.workers == 1) base = r.wall_time;
        for (auto& r : rows) r.speedup = base / r.wall_time;
    }
    return rows;
}

}  // namespace dinr
