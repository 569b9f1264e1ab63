#include "dinr/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "dinr/rng.hpp"

namespace dinr {

void NetworkConfig::validate() const
{
    if (c_half < 1) throw std::invalid_argument("network: c_half must be >= 1");
    if (n_hidden < 1) throw std::invalid_argument("network: n_hidden must be >= 1");
    if (!(sigma_s > 0.0) || !(sigma_t > 0.0)) throw std::invalid_argument("network: sigma_s and sigma_t must be > 0");
    if (!(mu0 > 0.0)) throw std::invalid_argument("network: mu0 must be > 0");
}

std::size_t NetworkConfig::parameter_count() const
{
    const std::size_t w = width();
    return n_hidden * (w * w + w) + (w + 1);
}

NormalizationBounds NormalizationBounds::from(const ScannerGeometry& geom, const ViewSchedule& schedule)
{
    NormalizationBounds b;
    b.t_min = schedule.times.front();
    b.t_max = schedule.times.back();
    // Rays diverge in z for cone beam; the far side of the FOV sees the widest slab.
    const double scale =
        geom.beam == BeamType::Cone ? (geom.sod + geom.fov_radius) / (geom.sod + geom.odd) : 1.0;
    b.z_min = -geom.offset_cz * scale;
    b.z_max = (-geom.offset_cz + static_cast<double>(geom.n_rows) * geom.pixel_dz) * scale;
    b.x_center = geom.rot_center_x;
    b.radius = geom.fov_radius;
    return b;
}

bool NormalizationBounds::contains(const CoordinateSample& r, double tol) const
{
    const double dx = r.x - x_center;
    return r.t >= t_min - tol && r.t <= t_max + tol && r.z >= z_min - tol && r.z <= z_max + tol &&
           dx >= -radius - tol && dx <= radius + tol && r.y >= -radius - tol && r.y <= radius + tol;
}

namespace {

double affine_unit(double v, double lo, double hi)
{
    if (!(hi > lo)) return 0.0;
    return std::clamp(2.0 * (v - lo) / (hi - lo) - 1.0, -1.0, 1.0);
}

void fill_normalized(const CoordinateSample& r, const NormalizationBounds& b, double* out)
{
    out[0] = affine_unit(r.t, b.t_min, b.t_max);
    out[1] = affine_unit(r.z, b.z_min, b.z_max);
    out[2] = std::clamp(r.y / b.radius, -1.0, 1.0);
    out[3] = std::clamp((r.x - b.x_center) / b.radius, -1.0, 1.0);
}

}  // namespace

std::array<double, 4> normalize(const CoordinateSample& r, const NormalizationBounds& bounds)
{
    std::array<double, 4> nr{};
    fill_normalized(r, bounds, nr.data());
    return nr;
}

Eigen::Map<const RowMatrix> NetworkState::weight(std::size_t k) const
{
    const auto w = static_cast<Eigen::Index>(width());
    return {params.data() + layer_offset(k), w, w};
}

Eigen::Map<const Eigen::VectorXd> NetworkState::bias(std::size_t k) const
{
    return {params.data() + layer_offset(k) + width() * width(), static_cast<Eigen::Index>(width())};
}

Eigen::Map<const Eigen::VectorXd> NetworkState::head_weight() const
{
    return {params.data() + head_offset(), static_cast<Eigen::Index>(width())};
}

NetworkState init_network(const NetworkConfig& cfg, const NormalizationBounds& bounds)
{
    cfg.validate();
    NetworkState state;
    state.config = cfg;
    state.bounds = bounds;
    Stream stream = make_stream(cfg.seed, {seed_tag::network_init});

    std::normal_distribution<double> gauss(0.0, 1.0);
    state.b_matrix.resize(static_cast<Eigen::Index>(cfg.c_half), 4);
    for (Eigen::Index row = 0; row < state.b_matrix.rows(); ++row) {
        state.b_matrix(row, 0) = cfg.sigma_t * gauss(stream);
        for (Eigen::Index col = 1; col < 4; ++col) state.b_matrix(row, col) = cfg.sigma_s * gauss(stream);
    }

    const std::size_t w = cfg.width();
    const double bound = 1.0 / std::sqrt(static_cast<double>(w));
    std::uniform_real_distribution<double> uni(-bound, bound);
    state.params.assign(cfg.parameter_count(), 0.0);
    for (std::size_t k = 0; k < cfg.n_hidden; ++k) {
        double* wk = state.params.data() + state.layer_offset(k);
        for (std::size_t e = 0; e < w * w; ++e) wk[e] = uni(stream);
    }
    double* head = state.params.data() + state.head_offset();
    for (std::size_t e = 0; e < w; ++e) head[e] = uni(stream);
    return state;
}

Eigen::VectorXd grff(const std::array<double, 4>& nr, const RowMatrix& b_matrix)
{
    const Eigen::Index c = b_matrix.rows();
    const Eigen::Vector4d v(nr[0], nr[1], nr[2], nr[3]);
    const Eigen::VectorXd phase = (2.0 * std::numbers::pi) * (b_matrix * v);
    Eigen::VectorXd out(2 * c);
    out.head(c) = phase.array().cos();
    out.tail(c) = phase.array().sin();
    return out;
}

double swish_derivative(double x)
{
    const double s = 1.0 / (1.0 + std::exp(-x));
    return s * (1.0 + x * (1.0 - s));
}

double forward_unitless(const NetworkState& state, const CoordinateSample& r)
{
    Eigen::VectorXd h = grff(normalize(r, state.bounds), state.b_matrix);
    for (std::size_t k = 0; k < state.config.n_hidden; ++k) {
        const Eigen::VectorXd z = state.weight(k) * h + state.bias(k);
        h = z.array() / (1.0 + (-z.array()).exp());
    }
    return state.head_weight().dot(h) + state.head_bias();
}

double forward(const NetworkState& state, const CoordinateSample& r)
{
    return state.config.mu0 * forward_unitless(state, r);
}

std::span<const double> BatchEvaluator::forward(const NetworkState& state, std::span<const CoordinateSample> samples)
{
    const auto s = static_cast<Eigen::Index>(samples.size());
    const auto c = static_cast<Eigen::Index>(state.config.c_half);
    const std::size_t layers = state.config.n_hidden;

    input_.resize(s, 4);
    for (Eigen::Index row = 0; row < s; ++row) {
        double nr[4];
        fill_normalized(samples[static_cast<std::size_t>(row)], state.bounds, nr);
        for (int col = 0; col < 4; ++col) input_(row, col) = nr[col];
    }

    pre_.resize(layers);
    gate_.resize(layers);
    act_.resize(layers + 1);

    Eigen::MatrixXd& h0 = act_[0];
    h0.resize(s, 2 * c);
    phase_.noalias() = input_ * state.b_matrix.transpose();
    for (Eigen::Index col = 0; col < c; ++col) {
        for (Eigen::Index row = 0; row < s; ++row) {
            double sn, cs;
            ::sincos(2.0 * std::numbers::pi * phase_(row, col), &sn, &cs);
            h0(row, col) = cs;
            h0(row, c + col) = sn;
        }
    }
    for (std::size_t k = 0; k < layers; ++k) {
        Eigen::MatrixXd& z = pre_[k];
        z.noalias() = act_[k] * state.weight(k).transpose();
        z.rowwise() += state.bias(k).transpose();
        gate_[k] = (1.0 + (-z.array()).exp()).inverse();
        act_[k + 1] = z.array() * gate_[k].array();
    }
    head_w_ = state.head_weight();
    out_.noalias() = act_[layers] * head_w_;
    out_.array() += state.head_bias();
    return {out_.data(), samples.size()};
}

void BatchEvaluator::backward(const NetworkState& state, std::span<const double> upstream, std::span<double> grad)
{
    const Eigen::Index s = out_.size();
    if (static_cast<Eigen::Index>(upstream.size()) != s)
        throw std::invalid_argument("backward: upstream size does not match the last forward batch");
    if (grad.size() != state.params.size()) throw std::invalid_argument("backward: gradient size mismatch");

    const auto w = static_cast<Eigen::Index>(state.width());
    const std::size_t layers = state.config.n_hidden;
    up_ = Eigen::Map<const Eigen::VectorXd>(upstream.data(), s);
    const Eigen::VectorXd& u = up_;

    g_head_.noalias() = act_[layers].transpose() * u;
    Eigen::Map<Eigen::VectorXd>(grad.data() + state.head_offset(), w) += g_head_;
    grad[state.head_offset() + static_cast<std::size_t>(w)] += u.sum();

    dact_.noalias() = u * head_w_.transpose();
    for (std::size_t k = layers; k-- > 0;) {
        const auto& z = pre_[k].array();
        const auto& g = gate_[k].array();
        dpre_ = dact_.array() * (g * (1.0 + z * (1.0 - g)));
        Eigen::Map<RowMatrix> g_w(grad.data() + state.layer_offset(k), w, w);
        Eigen::Map<Eigen::VectorXd> g_b(grad.data() + state.layer_offset(k) + static_cast<std::size_t>(w * w), w);
        g_w.noalias() += dpre_.transpose() * act_[k];
        g_b.noalias() += dpre_.colwise().sum().transpose();
        if (k > 0) dact_.noalias() = dpre_ * state.weight(k);
    }
}

BatchResult forward_batch_with_grad(const NetworkState& state, std::span<const CoordinateSample> samples,
                                    std::span<const double> upstream)
{
    if (samples.empty()) throw std::invalid_argument("forward_batch_with_grad: empty batch");
    BatchEvaluator eval;
    BatchResult result;
    const auto out = eval.forward(state, samples);
    result.outputs.assign(out.begin(), out.end());
    result.grad = GradientVector(state.params.size());
    eval.backward(state, upstream, result.grad.span());
    return result;
}

}  // namespace dinr
