#include "graspgen/png.hpp"

#include <fstream>
#include <stdexcept>

namespace graspgen {

namespace {

std::uint32_t crc32(const std::uint8_t* data, size_t len, std::uint32_t crc = 0) {
    static std::uint32_t table[256];
    static bool init = false;
    if (!init) {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            table[i] = c;
        }
        init = true;
    }
    crc ^= 0xFFFFFFFFu;
    for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
    return crc ^ 0xFFFFFFFFu;
}

std::uint32_t adler32(const std::vector<std::uint8_t>& data) {
    std::uint32_t a = 1, b = 0;
    for (const std::uint8_t byte : data) {
        a = (a + byte) % 65521;
        b = (b + a) % 65521;
    }
    return (b << 16) | a;
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(std::uint8_t(v >> 24));
    out.push_back(std::uint8_t(v >> 16));
    out.push_back(std::uint8_t(v >> 8));
    out.push_back(std::uint8_t(v));
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4],
               const std::vector<std::uint8_t>& payload) {
    put_be32(out, std::uint32_t(payload.size()));
    std::vector<std::uint8_t> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    put_be32(out, crc32(body.data(), body.size()));
}

// zlib stream with stored (uncompressed) deflate blocks.
std::vector<std::uint8_t> zlib_store(const std::vector<std::uint8_t>& raw) {
    std::vector<std::uint8_t> out;
    out.push_back(0x78);  // 32K window, deflate
    out.push_back(0x01);
    size_t pos = 0;
    do {
        const size_t n = std::min<size_t>(raw.size() - pos, 65535);
        const bool last = pos + n == raw.size();
        out.push_back(last ? 0x01 : 0x00);
        out.push_back(std::uint8_t(n & 0xFF));
        out.push_back(std::uint8_t(n >> 8));
        out.push_back(std::uint8_t(~n & 0xFF));
        out.push_back(std::uint8_t((~n >> 8) & 0xFF));
        out.insert(out.end(), raw.begin() + std::ptrdiff_t(pos), raw.begin() + std::ptrdiff_t(pos + n));
        pos += n;
    } while (pos < raw.size());
    put_be32(out, adler32(raw));
    return out;
}

void write_png(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
               int height, int channels) {
    if (pixels.size() != size_t(width) * size_t(height) * size_t(channels)) {
        throw std::runtime_error("png: pixel buffer size mismatch");
    }
    // Each scanline gets a filter byte (0 = none).
    std::vector<std::uint8_t> raw;
    raw.reserve(size_t(height) * (size_t(width) * size_t(channels) + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);
        const size_t off = size_t(y) * size_t(width) * size_t(channels);
        raw.insert(raw.end(), pixels.begin() + std::ptrdiff_t(off),
                   pixels.begin() + std::ptrdiff_t(off + size_t(width) * size_t(channels)));
    }

    std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    std::vector<std::uint8_t> ihdr;
    put_be32(ihdr, std::uint32_t(width));
    put_be32(ihdr, std::uint32_t(height));
    ihdr.push_back(8);                                // bit depth
    ihdr.push_back(channels == 1 ? 0 : 2);            // gray / truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", zlib_store(raw));
    put_chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("png: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!f) throw std::runtime_error("png: short write to " + path);
}

}  // namespace

void write_png_gray(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                    int height) {
    write_png(path, pixels, width, height, 1);
}

void write_png_rgb(const std::string& path, const std::vector<std::uint8_t>& pixels, int width,
                   int height) {
    write_png(path, pixels, width, height, 3);
}

}  // namespace graspgen
