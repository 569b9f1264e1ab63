#pragma once

// Single-threaded, loop-only versions of the hot kernels. Slow on purpose: the
// tests compare the optimized kernels against these, and the benchmarks time both.

#include <span>
#include <vector>

#include "dinr/network.hpp"
#include "dinr/phantom.hpp"
#include "dinr/recon.hpp"
#include "dinr/simulator.hpp"
#include "dinr/trainer.hpp"

namespace dinr::reference {

/// Unitless M(r) with explicit loops, no Eigen.
double forward_unitless(const NetworkState& state, const CoordinateSample& r);

/// Adds upstream * dM(r)/dgamma to `grad`, one sample at a time.
void backward_sample(const NetworkState& state, const CoordinateSample& r, double upstream, std::span<double> grad);

/// Same contract as dinr::local_loss_and_grad.
LocalResult local_loss_and_grad(const NetworkState& state, const ProjectionSet& proj,
                                std::span<const std::size_t> omega_k, std::size_t d_factor, SamplingMode mode,
                                std::uint64_t seed, GradientVector& grad);

ProjectionSet simulate(const DynamicPhantom& ph, const ScannerGeometry& geom, const ViewSchedule& schedule,
                       std::size_t d_factor, double noise_frac, std::uint64_t seed);

VoxelGrid4D infer(const NetworkState& state, const GridSpec& grid);

/// Backprojection of already-filtered rows for the views [view_begin, view_end).
std::vector<double> backproject(const ProjectionSet& proj, std::span<const double> filtered, std::size_t view_begin,
                                std::size_t view_end, const GridSpec& grid, double dtheta);

}  // namespace dinr::reference
