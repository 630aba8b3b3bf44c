#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ctmar/core.hpp"

namespace ctmar {

inline constexpr const char* kCreatorVersion = "ctmar 0.1.0";

enum class RasterKind { image, sinogram, mask, trace };

std::string to_string(RasterKind kind);
RasterKind raster_kind_from_string(const std::string& s);

/// Sidecar metadata stored next to the payload as <path>.json. The payload
/// itself is a little-endian 32-bit float raster in row-major order.
struct RasterMeta {
    RasterKind kind = RasterKind::image;
    int rows = 0;               // image height / sinogram bins
    int cols = 0;               // image width / sinogram views
    double spacing = 1.0;       // pixel_size / detector_spacing
    std::string units;
    std::vector<std::pair<std::string, std::int64_t>> seeds;  // provenance chain
    std::string creator = kCreatorVersion;
};

/// Writes payload and sidecar atomically (temp file + rename each).
void write_raster(const std::filesystem::path& path, const Image& img, RasterMeta meta);
void write_raster(const std::filesystem::path& path, const Sinogram& sino, RasterMeta meta);

std::pair<Image, RasterMeta> read_image(const std::filesystem::path& path);
std::pair<Sinogram, RasterMeta> read_sinogram(const std::filesystem::path& path);

/// 16-bit P5 PGM (big-endian samples) with a linear window; values at or
/// below lo map to 0, at or above hi to 65535.
void export_pgm(const Image& img, double lo, double hi, const std::filesystem::path& path);

}  // namespace ctmar
