#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "team/image.hpp"
#include "team/network.hpp"

namespace team {

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

/// Reads a big-endian IDX image/label pair. Bytes map to [0,1] as b / 255.
/// Throws FormatError (bad magic or dimensions), LengthError (truncated
/// payload), ConsistencyError (image and label counts differ) and
/// ResourceError (unreadable file).
Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                 int class_count = 10);

/// Writes a dataset as IDX. Pixels are stored as round(255 v).
void save_idx(const Dataset& data, const std::filesystem::path& images,
              const std::filesystem::path& labels);

enum class SynthKind { all_black, all_white, uniform_noise };
SynthKind parse_synth_kind(std::string_view name);

Image synth_image(SynthKind kind, int height, int width, std::uint64_t seed = 0);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary model file: "TEAM", u32 version, u64 seed, u32 layer count, then
/// per layer (u32 in, u32 out, u32 activation), u32 metadata length and the
/// metadata bytes, followed by each layer's weights (row-major) and biases as
/// little-endian binary32.
void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     std::string_view metadata = {});

struct LoadedCheckpoint {
  Model model;
  std::string metadata;
};

/// Throws FormatError (bad magic or layer table), VersionError (newer format)
/// and LengthError (truncated or trailing bytes).
LoadedCheckpoint load_checkpoint_with_metadata(const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace team
