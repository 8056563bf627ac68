#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace diffgan {

/// 8-bit interleaved image, channels = 1 (gray) or 3 (RGB).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;
};

/// Decodes a PNG or JPEG file (dispatch by magic bytes). Throws IoError.
ImageU8 read_image(const std::string& path);

void write_png(const std::string& path, const ImageU8& image);

}  // namespace diffgan
