#pragma once

// PNG/JPEG codecs for the raster types. Masks are stored as 8-bit grey
// (0/255), label maps as 16-bit grey.

#include "leafdx/imaging.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace leafdx::io {

using Bytes = std::vector<std::uint8_t>;

/// PNG or JPEG, detected from the file signature. Alpha is dropped,
/// palettes and sub-byte depths are expanded; 16-bit input is reduced to 8.
Raster decode_image(std::span<const std::uint8_t> bytes);
Raster read_image(const std::filesystem::path& path);

Bytes encode_png(const Raster& img);
void write_png(const std::filesystem::path& path, const Raster& img);

Bytes encode_jpeg(const Raster& img, int quality = 92);
void write_jpeg(const std::filesystem::path& path, const Raster& img, int quality = 92);

Bytes encode_mask_png(const BinaryMask& m);
BinaryMask decode_mask_png(std::span<const std::uint8_t> bytes);

Bytes encode_labels_png(const LabelMap& labels);
LabelMap decode_labels_png(std::span<const std::uint8_t> bytes);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace leafdx::io
