#include "aniadapter/image.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "aniadapter/error.hpp"

namespace aniadapter {

void write_pgm(const Image& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write image: " + path);
    f << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(img.width);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v = std::clamp(img.at(y, x), 0.0, 1.0);
            row[x] = uint8_t(std::lround(v * 255.0));
        }
        f.write(reinterpret_cast<const char*>(row.data()), row.size());
    }
}

Image read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read image: " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5") throw DataError("not a P5 PGM file: " + path);
    int w, h, maxv;
    f >> w >> h >> maxv;
    if (!f || w <= 0 || h <= 0 || maxv <= 0 || maxv > 255)
        throw DataError("bad PGM header: " + path);
    f.get();  // single whitespace after header
    Image img(h, w);
    std::vector<uint8_t> row(w);
    for (int y = 0; y < h; ++y) {
        f.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!f) throw DataError("truncated PGM: " + path);
        for (int x = 0; x < w; ++x) img.at(y, x) = double(row[x]) / maxv;
    }
    return img;
}

// ---- minimal 1-bit PNG codec -------------------------------------------------

static void put_be32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v >> 24));
    out.push_back(uint8_t(v >> 16));
    out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v));
}

static uint32_t get_be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

static void write_chunk(std::vector<uint8_t>& out, const char type[4],
                        const uint8_t* data, size_t len) {
    put_be32(out, uint32_t(len));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data, data + len);
    uint32_t crc = crc32(0L, out.data() + start, uInt(4 + len));
    put_be32(out, crc);
}

static const uint8_t kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

void write_mask_png(const PixelMask& mask, const std::string& path) {
    if (mask.width <= 0 || mask.height <= 0) throw DataError("empty mask");
    const int rowbytes = (mask.width + 7) / 8;

    // filter byte 0 + packed bits, MSB first, 1 = foreground
    std::vector<uint8_t> raw(size_t(mask.height) * (1 + rowbytes), 0);
    for (int y = 0; y < mask.height; ++y) {
        uint8_t* row = raw.data() + size_t(y) * (1 + rowbytes) + 1;
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(y, x)) row[x / 8] |= uint8_t(0x80 >> (x % 8));
    }

    uLongf comp_len = compressBound(uLong(raw.size()));
    std::vector<uint8_t> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), uLong(raw.size()), 9) != Z_OK)
        throw DataError("png deflate failed");
    comp.resize(comp_len);

    std::vector<uint8_t> out(kPngSig, kPngSig + 8);
    uint8_t ihdr[13];
    ihdr[0] = uint8_t(mask.width >> 24);
    ihdr[1] = uint8_t(mask.width >> 16);
    ihdr[2] = uint8_t(mask.width >> 8);
    ihdr[3] = uint8_t(mask.width);
    ihdr[4] = uint8_t(mask.height >> 24);
    ihdr[5] = uint8_t(mask.height >> 16);
    ihdr[6] = uint8_t(mask.height >> 8);
    ihdr[7] = uint8_t(mask.height);
    ihdr[8] = 1;   // bit depth
    ihdr[9] = 0;   // grayscale
    ihdr[10] = 0;  // compression
    ihdr[11] = 0;  // filter
    ihdr[12] = 0;  // no interlace
    write_chunk(out, "IHDR", ihdr, 13);
    write_chunk(out, "IDAT", comp.data(), comp.size());
    write_chunk(out, "IEND", nullptr, 0);

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write mask: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), out.size());
}

// PNG scanline unfilter; for bit depth 1 the left-neighbor offset is one byte.
static void unfilter(std::vector<uint8_t>& rows, int height, int rowbytes) {
    std::vector<uint8_t> prev(rowbytes, 0);
    for (int y = 0; y < height; ++y) {
        uint8_t* p = rows.data() + size_t(y) * (1 + rowbytes);
        uint8_t filt = p[0];
        uint8_t* cur = p + 1;
        for (int i = 0; i < rowbytes; ++i) {
            int a = i > 0 ? cur[i - 1] : 0;
            int b = prev[i];
            int c = i > 0 ? prev[i - 1] : 0;
            int x = cur[i];
            switch (filt) {
                case 0: break;
                case 1: x = (x + a) & 0xff; break;
                case 2: x = (x + b) & 0xff; break;
                case 3: x = (x + (a + b) / 2) & 0xff; break;
                case 4: {
                    int pp = a + b - c;
                    int pa = std::abs(pp - a), pb = std::abs(pp - b), pc = std::abs(pp - c);
                    int pred = (pa <= pb && pa <= pc) ? a : (pb <= pc ? b : c);
                    x = (x + pred) & 0xff;
                    break;
                }
                default: throw DataError("png: unknown filter type");
            }
            cur[i] = uint8_t(x);
        }
        std::memcpy(prev.data(), cur, rowbytes);
    }
}

PixelMask read_mask_png(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot read mask: " + path);
    std::vector<uint8_t> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.size() < 8 || std::memcmp(buf.data(), kPngSig, 8) != 0)
        throw DataError("not a PNG file: " + path);

    int width = 0, height = 0;
    std::vector<uint8_t> idat;
    size_t pos = 8;
    bool seen_ihdr = false;
    while (pos + 8 <= buf.size()) {
        uint32_t len = get_be32(buf.data() + pos);
        if (pos + 12 + len > buf.size()) throw DataError("truncated PNG: " + path);
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        const uint8_t* data = buf.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw DataError("bad IHDR: " + path);
            width = int(get_be32(data));
            height = int(get_be32(data + 4));
            if (data[8] != 1 || data[9] != 0 || data[12] != 0)
                throw DataError("mask PNG must be 1-bit grayscale, non-interlaced: " + path);
            seen_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!seen_ihdr || width <= 0 || height <= 0) throw DataError("bad PNG: " + path);

    const int rowbytes = (width + 7) / 8;
    std::vector<uint8_t> raw(size_t(height) * (1 + rowbytes));
    uLongf raw_len = uLongf(raw.size());
    if (uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw DataError("png inflate failed: " + path);
    unfilter(raw, height, rowbytes);

    PixelMask mask(height, width);
    for (int y = 0; y < height; ++y) {
        const uint8_t* row = raw.data() + size_t(y) * (1 + rowbytes) + 1;
        for (int x = 0; x < width; ++x)
            mask.at(y, x) = (row[x / 8] >> (7 - x % 8)) & 1;
    }
    return mask;
}

Image resize_nearest(const Image& img, int new_h, int new_w) {
    Image out(new_h, new_w);
    for (int y = 0; y < new_h; ++y) {
        int sy = std::min(img.height - 1, int(size_t(y) * img.height / new_h));
        for (int x = 0; x < new_w; ++x) {
            int sx = std::min(img.width - 1, int(size_t(x) * img.width / new_w));
            out.at(y, x) = img.at(sy, sx);
        }
    }
    return out;
}

PixelMask resize_nearest(const PixelMask& mask, int new_h, int new_w) {
    PixelMask out(new_h, new_w);
    for (int y = 0; y < new_h; ++y) {
        int sy = std::min(mask.height - 1, int(size_t(y) * mask.height / new_h));
        for (int x = 0; x < new_w; ++x) {
            int sx = std::min(mask.width - 1, int(size_t(x) * mask.width / new_w));
            out.at(y, x) = mask.at(sy, sx);
        }
    }
    return out;
}

Image white_composite(const Image& img, const PixelMask& mask) {
    if (img.height != mask.height || img.width != mask.width)
        throw DataError("white_composite: image/mask dimension mismatch");
    Image out = img;
    for (size_t i = 0; i < out.pix.size(); ++i)
        if (!mask.bits[i]) out.pix[i] = 1.0;
    return out;
}

Mat Image::to_matrix() const {
    Mat m(height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) m(y, x) = at(y, x);
    return m;
}

Image Image::from_matrix(const Mat& m, bool clamp) {
    Image img(int(m.rows()), int(m.cols()));
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double v = m(y, x);
            if (clamp) v = std::min(1.0, std::max(0.0, v));
            img.at(y, x) = v;
        }
    return img;
}

}  // namespace aniadapter
