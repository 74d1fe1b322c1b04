#include "dfbk/image_io.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>

namespace dfbk {

namespace {

const uint8_t kSignature[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};

void put_u32_be(std::vector<uint8_t>& out, uint32_t x) {
    out.push_back(static_cast<uint8_t>(x >> 24));
    out.push_back(static_cast<uint8_t>(x >> 16));
    out.push_back(static_cast<uint8_t>(x >> 8));
    out.push_back(static_cast<uint8_t>(x));
}

uint32_t get_u32_be(const uint8_t* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void append_chunk(std::vector<uint8_t>& out, const char type[4],
                  const std::vector<uint8_t>& data) {
    put_u32_be(out, static_cast<uint32_t>(data.size()));
    const size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, out.data() + type_at, static_cast<uInt>(4 + data.size()));
    put_u32_be(out, static_cast<uint32_t>(crc));
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

}  // namespace

void write_png(const std::filesystem::path& path, const PngImage& img) {
    if (img.channels != 1 && img.channels != 3)
        throw ValidationError("write_png: only gray or rgb supported");
    if (img.pixels.size() !=
        static_cast<size_t>(img.width) * img.height * img.channels)
        throw ShapeError("write_png: pixel buffer size mismatch");

    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    for (int y = 0; y < img.height; ++y) {
        raw[y * (stride + 1)] = 0;  // filter: none
        std::memcpy(&raw[y * (stride + 1) + 1], &img.pixels[y * stride], stride);
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK)
        throw std::runtime_error("write_png: deflate failed");
    comp.resize(comp_len);

    std::vector<uint8_t> ihdr;
    put_u32_be(ihdr, static_cast<uint32_t>(img.width));
    put_u32_be(ihdr, static_cast<uint32_t>(img.height));
    ihdr.push_back(8);                                      // bit depth
    ihdr.push_back(img.channels == 1 ? 0 : 2);              // color type
    ihdr.push_back(0);                                      // compression
    ihdr.push_back(0);                                      // filter
    ihdr.push_back(0);                                      // no interlace

    std::vector<uint8_t> file(kSignature, kSignature + 8);
    append_chunk(file, "IHDR", ihdr);
    append_chunk(file, "IDAT", comp);
    append_chunk(file, "IEND", {});

    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_png: cannot open " + path.string());
    os.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!os) throw std::runtime_error("write_png: write failed for " + path.string());
}

PngImage read_png(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_png: cannot open " + path.string());
    std::vector<uint8_t> file((std::istreambuf_iterator<char>(is)),
                              std::istreambuf_iterator<char>());

    if (file.size() < 8 || std::memcmp(file.data(), kSignature, 8) != 0)
        throw FormatError("read_png: not a PNG file: " + path.string());

    PngImage img;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool saw_ihdr = false, saw_iend = false;
    while (pos + 8 <= file.size() && !saw_iend) {
        const uint32_t len = get_u32_be(&file[pos]);
        if (pos + 12 + len > file.size())
            throw FormatError("read_png: truncated chunk at byte " + std::to_string(pos));
        const char* type = reinterpret_cast<const char*>(&file[pos + 4]);
        const uint8_t* data = &file[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw FormatError("read_png: bad IHDR length");
            img.width = static_cast<int>(get_u32_be(data));
            img.height = static_cast<int>(get_u32_be(data + 4));
            const int depth = data[8], color = data[9], interlace = data[12];
            if (depth != 8) throw FormatError("read_png: only 8-bit depth supported");
            if (color != 0 && color != 2)
                throw FormatError("read_png: only grayscale or RGB supported");
            if (interlace != 0) throw FormatError("read_png: interlaced PNG not supported");
            img.channels = color == 0 ? 1 : 3;
            saw_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
        }
        pos += 12 + len;
    }
    if (!saw_ihdr || img.width <= 0 || img.height <= 0)
        throw FormatError("read_png: missing or invalid IHDR");
    if (idat.empty()) throw FormatError("read_png: no IDAT data");

    const size_t stride = static_cast<size_t>(img.width) * img.channels;
    std::vector<uint8_t> raw((stride + 1) * img.height);
    uLongf raw_len = static_cast<uLongf>(raw.size());
    const int zrc = uncompress(raw.data(), &raw_len, idat.data(), static_cast<uLong>(idat.size()));
    if (zrc != Z_OK || raw_len != raw.size())
        throw FormatError("read_png: inflate failed (corrupt or truncated image data)");

    img.pixels.assign(stride * img.height, 0);
    const int bpp = img.channels;
    std::vector<uint8_t> prev(stride, 0);
    for (int y = 0; y < img.height; ++y) {
        const uint8_t filter = raw[y * (stride + 1)];
        const uint8_t* src = &raw[y * (stride + 1) + 1];
        uint8_t* dst = &img.pixels[y * stride];
        for (size_t x = 0; x < stride; ++x) {
            const int a = x >= static_cast<size_t>(bpp) ? dst[x - bpp] : 0;
            const int b = prev[x];
            const int c = x >= static_cast<size_t>(bpp) ? prev[x - bpp] : 0;
            int v = src[x];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default:
                    throw FormatError("read_png: unknown filter type " +
                                        std::to_string(filter));
            }
            dst[x] = static_cast<uint8_t>(v);
        }
        std::memcpy(prev.data(), dst, stride);
    }
    return img;
}

void write_png_gray(const std::filesystem::path& path, const FeatureMap& img) {
    if (img.c != 1) throw ShapeError("write_png_gray: expected 1 channel");
    PngImage out;
    out.width = img.w;
    out.height = img.h;
    out.channels = 1;
    out.pixels.resize(static_cast<size_t>(img.w) * img.h);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const double v = std::clamp(img.at(y, x, 0), 0.0, 1.0);
            out.pixels[static_cast<size_t>(y) * img.w + x] =
                static_cast<uint8_t>(std::lround(v * 255.0));
        }
    write_png(path, out);
}

FeatureMap read_png_gray(const std::filesystem::path& path) {
    PngImage img = read_png(path);
    if (img.channels != 1)
        throw FormatError("read_png_gray: " + path.string() + " is not grayscale");
    FeatureMap out(img.height, img.width, 1);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            out.at(y, x, 0) = img.pixels[static_cast<size_t>(y) * img.width + x] / 255.0;
    return out;
}

}  // namespace dfbk
