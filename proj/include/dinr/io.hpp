#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "dinr/network.hpp"
#include "dinr/recon.hpp"
#include "dinr/simulator.hpp"
#include "dinr/trainer.hpp"

namespace dinr {

/// Unreadable/unwritable files and malformed file contents.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kProjectionFileVersion = 1;
inline constexpr std::uint32_t kVolumeFileVersion = 1;
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "PROJ" file: header, geometry block, f64 angles and times, f32 projections.
void write_projection_file(const std::filesystem::path& path, const ProjectionSet& proj);
ProjectionSet read_projection_file(const std::filesystem::path& path);

/// Streams a "VOL4" file one frame at a time; the header is written on open.
class VolumeWriter {
public:
    VolumeWriter(const std::filesystem::path& path, const GridSpec& grid);
    void write_frame(std::span<const double> values);
    /// Flushes and checks that every declared frame was written.
    void close();
    std::size_t frames_written() const { return written_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t frame_size_ = 0;
    std::size_t frames_ = 0;
    std::size_t written_ = 0;
};

void write_volume_file(const std::filesystem::path& path, const VoxelGrid4D& vol);
VoxelGrid4D read_volume_file(const std::filesystem::path& path);

struct Checkpoint {
    NetworkState state;
    std::optional<ResumePoint> resume;  // present when optimizer state was saved
};

/// "DINR" checkpoint. Optimizer moments and the next epoch follow the network
/// when `optimizer` is given, so training can resume bit-exactly.
void write_checkpoint(const std::filesystem::path& path, const NetworkState& state,
                      const OptimizerState* optimizer = nullptr, std::size_t next_epoch = 0);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace dinr
