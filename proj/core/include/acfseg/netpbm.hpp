#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace acfseg {

// Interleaved 8-bit raster; channels is 3 (PPM) or 1 (PGM).
struct Raster {
    int height = 0;
    int width = 0;
    int channels = 1;
    std::vector<uint8_t> data;

    uint8_t& at(int y, int x, int c = 0) {
        return data[static_cast<size_t>((int64_t(y) * width + x) * channels + c)];
    }
    uint8_t at(int y, int x, int c = 0) const {
        return data[static_cast<size_t>((int64_t(y) * width + x) * channels + c)];
    }
};

// Binary P6/P5 only, maxval 255. Parse failures throw std::runtime_error
// naming the byte offset.
Raster read_ppm(const std::string& path);
Raster read_pgm(const std::string& path);
void write_ppm(const std::string& path, const Raster& image);
void write_pgm(const std::string& path, const Raster& image);

}  // namespace acfseg
