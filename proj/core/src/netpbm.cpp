#include "acfseg/netpbm.hpp"

#include <fstream>
#include <stdexcept>

namespace acfseg {

namespace {

[[noreturn]] void parse_fail(const std::string& path, std::streampos offset, const std::string& msg) {
    throw std::runtime_error(path + ": " + msg + " (byte offset " +
                             std::to_string(static_cast<long long>(offset)) + ")");
}

// Skips whitespace and '#' comment lines, then reads one unsigned integer.
int read_header_int(std::istream& in, const std::string& path) {
    int ch;
    while ((ch = in.peek()) != EOF) {
        if (ch == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(ch)) {
            in.get();
        } else {
            break;
        }
    }
    int value;
    if (!(in >> value) || value < 0) parse_fail(path, in.tellg(), "malformed header integer");
    return value;
}

Raster read_netpbm(const std::string& path, const char* magic, int channels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open");
    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != magic[0] || m1 != magic[1])
        parse_fail(path, 0, std::string("expected magic ") + magic);
    Raster r;
    r.width = read_header_int(in, path);
    r.height = read_header_int(in, path);
    r.channels = channels;
    const int maxval = read_header_int(in, path);
    if (maxval != 255) parse_fail(path, in.tellg(), "maxval must be 255, got " + std::to_string(maxval));
    in.get();  // single whitespace byte before the raster
    const size_t expected = static_cast<size_t>(int64_t(r.width) * r.height * channels);
    r.data.resize(expected);
    in.read(reinterpret_cast<char*>(r.data.data()), static_cast<std::streamsize>(expected));
    const auto got = in.gcount();
    if (static_cast<size_t>(got) != expected)
        parse_fail(path, in.tellg(),
                   "truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                       std::to_string(got));
    return r;
}

void write_netpbm(const std::string& path, const Raster& image, const char* magic, int channels) {
    if (image.channels != channels)
        throw std::invalid_argument(path + ": raster has " + std::to_string(image.channels) +
                                    " channels, format needs " + std::to_string(channels));
    if (image.data.size() != static_cast<size_t>(int64_t(image.width) * image.height * channels))
        throw std::invalid_argument(path + ": raster data size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << magic << "\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.data.data()),
              static_cast<std::streamsize>(image.data.size()));
    if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace

Raster read_ppm(const std::string& path) { return read_netpbm(path, "P6", 3); }
Raster read_pgm(const std::string& path) { return read_netpbm(path, "P5", 1); }
void write_ppm(const std::string& path, const Raster& image) { write_netpbm(path, image, "P6", 3); }
void write_pgm(const std::string& path, const Raster& image) { write_netpbm(path, image, "P5", 1); }

}  // namespace acfseg
