#pragma once

#include <filesystem>

#include "ghostcert/image.hpp"

namespace ghostcert {

// Binary PGM (P5, 1 channel) / PPM (P6, 3 channels), maxval <= 255, values scaled to [0,1].
Image read_netpbm(const std::filesystem::path& path);
void write_netpbm(const std::filesystem::path& path, const Image& img);

}  // namespace ghostcert
