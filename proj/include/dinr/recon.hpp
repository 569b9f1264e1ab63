#pragma once

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "dinr/geometry.hpp"
#include "dinr/network.hpp"
#include "dinr/phantom.hpp"
#include "dinr/simulator.hpp"

namespace dinr {

/// Regular voxel lattice. `origin` is the center of voxel (0, 0, 0).
struct GridSpec {
    std::size_t nx = 1;
    std::size_t ny = 1;
    std::size_t nz = 1;
    double voxel_size = 1.0;
    Vec3 origin;
    std::vector<double> frame_times;
    bool mask_fov = true;  // voxels outside the FOV cylinder are written as 0

    std::size_t voxels_per_frame() const { return nx * ny * nz; }
    Vec3 center(std::size_t x, std::size_t y, std::size_t z) const;
    void validate() const;

    /// Lattice covering the FOV cylinder and the object-space detector z range at
    /// `voxel_size` (<= 0 selects the detector pitch over the magnification),
    /// with one frame per schedule view.
    static GridSpec covering(const ScannerGeometry& geom, const ViewSchedule& schedule, double voxel_size = 0.0);
    /// Same lattice from the network's normalization box; no frame times.
    static GridSpec covering(const NormalizationBounds& bounds, double voxel_size);
};

/// Reconstructed attenuation, T x Z x Y x X with x fastest.
struct VoxelGrid4D {
    std::size_t nt = 0, nz = 0, ny = 0, nx = 0;
    double voxel_size = 1.0;
    Vec3 origin;
    std::vector<double> frame_times;
    std::vector<double> data;

    std::size_t frame_size() const { return nz * ny * nx; }
    std::span<const double> frame(std::size_t t) const { return std::span(data).subspan(t * frame_size(), frame_size()); }
    std::span<double> frame(std::size_t t) { return std::span(data).subspan(t * frame_size(), frame_size()); }
    double at(std::size_t t, std::size_t z, std::size_t y, std::size_t x) const
    {
        return data[((t * nz + z) * ny + y) * nx + x];
    }
    static VoxelGrid4D allocate(const GridSpec& grid);
};

/// Dimensions of one frame, used by the metrics.
struct FrameShape {
    std::size_t nz = 1, ny = 1, nx = 1;
    std::size_t size() const { return nz * ny * nx; }
};

class MetricError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using FrameSink = std::function<void(std::size_t frame, std::span<const double> values)>;

/// Evaluates the network at every voxel center, one frame at a time; `sink`
/// receives each frame as soon as it is complete. Returns the number of network
/// evaluations. Throws std::out_of_range if the grid leaves the network bounds.
std::size_t infer_stream(const NetworkState& state, const GridSpec& grid, const FrameSink& sink);

/// In-memory variant of infer_stream.
VoxelGrid4D infer(const NetworkState& state, const GridSpec& grid);

/// Ground truth at the voxel centers, or the mean over supersample^3 sub-voxel
/// centers when supersample > 1.
VoxelGrid4D sample_phantom(const DynamicPhantom& ph, const GridSpec& grid, std::size_t supersample = 1);

/// Sentinel for a perfect reconstruction.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

/// PSNR after mapping both frames through the truth's [min, max] -> [0, 1].
double psnr(std::span<const double> recon, std::span<const double> truth);

/// Mean SSIM over axial slices, 11 x 11 uniform window, on the same
/// normalized scale as psnr().
double ssim(std::span<const double> recon, std::span<const double> truth, FrameShape shape, std::size_t window = 11);

struct QualityReport {
    double psnr_db = 0.0;
    double ssim = 0.0;
    std::vector<std::pair<double, double>> per_frame;
};

QualityReport evaluate_quality(const VoxelGrid4D& recon, const VoxelGrid4D& truth);

/// Contiguous view groups used by the baseline: `frames` groups of ceil(M / frames)
/// views, the last group taking the remainder.
std::vector<std::pair<std::size_t, std::size_t>> view_groups(std::size_t n_views, std::size_t frames);

/// Parallel-beam filtered backprojection with one frame per view group; each
/// frame is placed at its group's mid time. Ram-Lak filtering in the frequency
/// domain, bilinear detector interpolation.
VoxelGrid4D fbp_frames(const ProjectionSet& proj, std::size_t frames, GridSpec grid);

/// Ram-Lak filtered rows: M x rows x cols, same layout as the projections.
std::vector<double> ramp_filter(const ProjectionSet& proj);

}  // namespace dinr
