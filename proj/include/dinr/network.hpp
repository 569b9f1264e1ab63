#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dinr/geometry.hpp"
#include "dinr/sampler.hpp"

namespace dinr {

struct NetworkConfig {
    std::size_t c_half = 128;   // C; the feature and hidden width is 2C
    std::size_t n_hidden = 5;   // L
    double sigma_s = 0.5;
    double sigma_t = 0.1;
    double mu0 = 0.05;          // output scale, LAC per mm
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t width() const { return 2 * c_half; }
    /// L (2C*2C + 2C) + (2C + 1)
    std::size_t parameter_count() const;
};

/// Box used to map coordinates into [-1, 1]: time by the schedule span, z by the
/// object-space detector extent, x and y by the FOV cylinder.
struct NormalizationBounds {
    double t_min = 0.0;
    double t_max = 1.0;
    double z_min = -1.0;
    double z_max = 1.0;
    double x_center = 0.0;
    double radius = 1.0;

    static NormalizationBounds from(const ScannerGeometry& geom, const ViewSchedule& schedule);
    bool contains(const CoordinateSample& r, double tol = 1e-6) const;
};

/// Normalized (t, z, y, x), clamped to [-1, 1].
std::array<double, 4> normalize(const CoordinateSample& r, const NormalizationBounds& bounds);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flat gradient with the same layout as NetworkState::params.
struct GradientVector {
    std::vector<double> values;

    GradientVector() = default;
    explicit GradientVector(std::size_t n) : values(n, 0.0) {}
    std::size_t size() const { return values.size(); }
    void set_zero() { std::fill(values.begin(), values.end(), 0.0); }
    std::span<double> span() { return values; }
    std::span<const double> span() const { return values; }
};

/// The implicit representation M(r; gamma). `b_matrix` holds the frozen Fourier
/// frequencies; `params` holds the trainable weights laid out as
///   for each hidden layer k: W_k (2C x 2C, row-major, out x in), b_k (2C)
///   head: w (2C), b (1)
struct NetworkState {
    NetworkConfig config;
    NormalizationBounds bounds;
    RowMatrix b_matrix;            // C x 4, columns (t, z, y, x)
    std::vector<double> params;

    std::size_t width() const { return config.width(); }
    std::size_t layer_offset(std::size_t k) const { return k * (width() * width() + width()); }
    std::size_t head_offset() const { return config.n_hidden * (width() * width() + width()); }

    Eigen::Map<const RowMatrix> weight(std::size_t k) const;
    Eigen::Map<const Eigen::VectorXd> bias(std::size_t k) const;
    Eigen::Map<const Eigen::VectorXd> head_weight() const;
    double head_bias() const { return params.back(); }
    double& head_bias() { return params.back(); }
};

NetworkState init_network(const NetworkConfig& cfg, const NormalizationBounds& bounds);

/// [cos(2 pi B nr); sin(2 pi B nr)]
Eigen::VectorXd grff(const std::array<double, 4>& nr, const RowMatrix& b_matrix);

inline double swish(double x) { return x / (1.0 + std::exp(-x)); }
double swish_derivative(double x);

/// Unitless network output (head value before the mu0 scale).
double forward_unitless(const NetworkState& state, const CoordinateSample& r);

/// Attenuation estimate mu0 * M(r), LAC per mm.
double forward(const NetworkState& state, const CoordinateSample& r);

/// Batched forward/backward over sample rows. Keeps the activations of the last
/// forward() so that backward() can follow with upstream weights that depend on
/// the outputs. Not thread-safe; use one evaluator per worker.
class BatchEvaluator {
public:
    /// Unitless outputs for each sample; valid until the next call.
    std::span<const double> forward(const NetworkState& state, std::span<const CoordinateSample> samples);

    /// Adds d/dgamma sum_j upstream[j] * M(r_j) to `grad` for the samples of the
    /// preceding forward().
    void backward(const NetworkState& state, std::span<const double> upstream, std::span<double> grad);

private:
    Eigen::MatrixXd input_;                 // S x 4
    Eigen::MatrixXd phase_;                 // S x C, B nr
    std::vector<Eigen::MatrixXd> pre_;      // Z_k, S x W
    std::vector<Eigen::MatrixXd> gate_;     // sigmoid(Z_k)
    std::vector<Eigen::MatrixXd> act_;      // H_0 .. H_L
    Eigen::MatrixXd dact_;
    Eigen::MatrixXd dpre_;
    Eigen::VectorXd out_;
    // Eigen-owned copies: matrix-vector kernels peel to the operand alignment, so
    // running them on raw parameter memory would make rounding depend on the heap.
    Eigen::VectorXd head_w_;
    Eigen::VectorXd up_;
    Eigen::VectorXd g_head_;
};

struct BatchResult {
    std::vector<double> outputs;  // unitless M(r_j)
    GradientVector grad;          // d/dgamma sum_j u_j M(r_j)
};

BatchResult forward_batch_with_grad(const NetworkState& state, std::span<const CoordinateSample> samples,
                                    std::span<const double> upstream);

}  // namespace dinr
