#pragma once

#include <filesystem>

#include "melmix/spectral.hpp"

namespace melmix {

/// Reads a RIFF/WAVE file holding 16-bit PCM mono. Throws IoError when the
/// file cannot be opened and FormatError for anything else it cannot decode.
AudioBuffer read_wav(const std::filesystem::path& path);

/// Writes 16-bit PCM mono, clipping samples to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioBuffer& audio);

}  // namespace melmix
