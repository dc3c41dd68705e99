#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include <zlib.h>

#include "motionlab/binio.hpp"
#include "motionlab/io.hpp"

namespace motionlab {

namespace {

// [-1,1] -> [0,255], clamping anything that overshoots the display range
uint8_t to_byte(float v) {
    return uint8_t(std::clamp(std::lround((double(v) + 1.0) * 127.5), 0L, 255L));
}

void check_exportable(const LatentClip<float>& clip) {
    require(clip.latent.defined() && clip.latent.rank() == 5 && clip.latent.dim(0) == 1 &&
                clip.latent.dim(4) == 3,
            ErrCat::shape, "export expects a clip of shape [1,F,H,W,3]");
    for (float v : clip.latent.vec())
        require(std::isfinite(double(v)), ErrCat::domain, "clip values must be finite");
}

// rows of the frame grid: frames laid left to right, RGB bytes
std::vector<uint8_t> grid_rows(const Tensor<float>& latent) {
    const int64_t frames = latent.dim(1), height = latent.dim(2), width = latent.dim(3);
    std::vector<uint8_t> rows(size_t(height) * size_t(frames) * size_t(width) * 3);
    const float* p = latent.data();
    for (int64_t f = 0; f < frames; ++f)
        for (int64_t y = 0; y < height; ++y)
            for (int64_t x = 0; x < width; ++x)
                for (int64_t c = 0; c < 3; ++c) {
                    const size_t src = size_t(((f * height + y) * width + x) * 3 + c);
                    const size_t dst =
                        size_t((y * frames * width + f * width + x) * 3 + c);
                    rows[dst] = to_byte(p[src]);
                }
    return rows;
}

void be32(binio::Writer& w, uint32_t v) {
    const unsigned char b[4] = {(unsigned char)(v >> 24), (unsigned char)(v >> 16),
                                (unsigned char)(v >> 8), (unsigned char)(v)};
    w.bytes(b, 4);
}

void png_chunk(binio::Writer& w, const char type[4], const std::string& data) {
    be32(w, uint32_t(data.size())); // PNG frames lengths and values big-endian
    w.bytes(type, 4);
    w.bytes(data.data(), data.size());
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), uInt(data.size()));
    be32(w, uint32_t(crc));
}

void write_png(const LatentClip<float>& clip, const std::string& path) {
    const int64_t frames = clip.latent.dim(1), height = clip.latent.dim(2),
                  width = clip.latent.dim(3);
    const uint32_t out_w = uint32_t(frames * width), out_h = uint32_t(height);
    const std::vector<uint8_t> rows = grid_rows(clip.latent);

    // scanlines with the per-row filter byte (0 = none)
    std::vector<uint8_t> raw;
    raw.reserve(size_t(out_h) * (size_t(out_w) * 3 + 1));
    for (uint32_t y = 0; y < out_h; ++y) {
        raw.push_back(0);
        const uint8_t* r = rows.data() + size_t(y) * size_t(out_w) * 3;
        raw.insert(raw.end(), r, r + size_t(out_w) * 3);
    }
    uLongf zlen = compressBound(uLong(raw.size()));
    std::vector<uint8_t> zbuf(zlen);
    // fixed compression level keeps export bytes reproducible
    const int rc = compress2(zbuf.data(), &zlen, raw.data(), uLong(raw.size()), 6);
    require(rc == Z_OK, ErrCat::io, "deflate failed: " + path);

    binio::Writer w(path);
    const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    w.bytes(sig, 8);

    std::string ihdr;
    auto push32 = [&ihdr](uint32_t v) {
        ihdr.push_back(char(v >> 24));
        ihdr.push_back(char(v >> 16));
        ihdr.push_back(char(v >> 8));
        ihdr.push_back(char(v));
    };
    push32(out_w);
    push32(out_h);
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    png_chunk(w, "IHDR", ihdr);
    png_chunk(w, "IDAT", std::string(reinterpret_cast<const char*>(zbuf.data()), zlen));
    png_chunk(w, "IEND", "");
    w.close();
}

// ---- GIF ------------------------------------------------------------------

// fixed 3-3-2 RGB palette: full color fidelity is the PNG export's job,
// the GIF exists to show motion
uint8_t palette_index(uint8_t r, uint8_t g, uint8_t b) {
    return uint8_t((r >> 5) << 5 | (g >> 5) << 2 | (b >> 6));
}

class GifCodeStream {
public:
    explicit GifCodeStream(binio::Writer& w) : w_(w) {}

    void put(uint32_t code, int bits) {
        bitbuf_ |= uint64_t(code) << bitcnt_;
        bitcnt_ += bits;
        while (bitcnt_ >= 8) {
            block_.push_back(char(bitbuf_ & 0xff));
            bitbuf_ >>= 8;
            bitcnt_ -= 8;
            if (block_.size() == 255) flush();
        }
    }

    void finish() {
        if (bitcnt_ > 0) {
            block_.push_back(char(bitbuf_ & 0xff));
            bitbuf_ = 0;
            bitcnt_ = 0;
            if (block_.size() == 255) flush();
        }
        flush();
        w_.u8(0); // data stream terminator
    }

private:
    void flush() {
        if (block_.empty()) return;
        w_.u8(uint8_t(block_.size()));
        w_.bytes(block_.data(), block_.size());
        block_.clear();
    }

    binio::Writer& w_;
    std::string block_;
    uint64_t bitbuf_ = 0;
    int bitcnt_ = 0;
};

void lzw_encode(const std::vector<uint8_t>& px, binio::Writer& w) {
    constexpr int kMinCode = 8;
    constexpr int kClear = 1 << kMinCode;
    constexpr int kEoi = kClear + 1;
    w.u8(kMinCode);
    GifCodeStream cs(w);

    std::vector<int32_t> table(size_t(4096) * 256);
    int next = 0, bits = 0;
    auto reset = [&] {
        std::fill(table.begin(), table.end(), -1);
        next = kEoi + 1;
        bits = kMinCode + 1;
    };
    reset();
    cs.put(kClear, bits);

    int prefix = px[0];
    for (size_t i = 1; i < px.size(); ++i) {
        const int c = px[i];
        const size_t slot = size_t(prefix) * 256 + size_t(c);
        if (table[slot] >= 0) {
            prefix = table[slot];
            continue;
        }
        cs.put(uint32_t(prefix), bits);
        if (next < 4096) {
            table[slot] = next++;
            // widen once the largest assigned code no longer fits; the
            // decoder grows its table one step behind and tracks this
            if (next - 1 == (1 << bits) && bits < 12) ++bits;
        } else {
            cs.put(uint32_t(kClear), bits);
            reset();
        }
        prefix = c;
    }
    cs.put(uint32_t(prefix), bits);
    cs.put(uint32_t(kEoi), bits);
    cs.finish();
}

void write_gif(const LatentClip<float>& clip, const std::string& path) {
    const int64_t frames = clip.latent.dim(1), height = clip.latent.dim(2),
                  width = clip.latent.dim(3);
    require(width <= 0xffff && height <= 0xffff, ErrCat::shape, "frame too large for GIF");

    binio::Writer w(path);
    w.bytes("GIF89a", 6);
    w.u16(uint16_t(width));
    w.u16(uint16_t(height));
    w.u8(0xf7); // global 256-entry color table, 8-bit color resolution
    w.u8(0);
    w.u8(0);
    for (int i = 0; i < 256; ++i) {
        w.u8(uint8_t(std::lround(((i >> 5) & 7) * 255.0 / 7.0)));
        w.u8(uint8_t(std::lround(((i >> 2) & 7) * 255.0 / 7.0)));
        w.u8(uint8_t(std::lround((i & 3) * 255.0 / 3.0)));
    }

    // loop forever
    const unsigned char loop[] = {0x21, 0xff, 0x0b, 'N', 'E', 'T', 'S', 'C', 'A', 'P',
                                  'E',  '2',  '.',  '0', 3,   1,   0,   0,   0};
    w.bytes(loop, sizeof loop);

    const float* p = clip.latent.data();
    std::vector<uint8_t> px(size_t(height) * size_t(width));
    for (int64_t f = 0; f < frames; ++f) {
        // graphic control: keep previous frame until replaced; the 10 ms
        // tick grid cannot express 8 fps exactly, 12 ticks is the nearest
        w.u8(0x21);
        w.u8(0xf9);
        w.u8(4);
        w.u8(0x04);
        w.u16(12);
        w.u8(0);
        w.u8(0);

        w.u8(0x2c); // image descriptor, full logical screen
        w.u16(0);
        w.u16(0);
        w.u16(uint16_t(width));
        w.u16(uint16_t(height));
        w.u8(0);

        for (int64_t y = 0; y < height; ++y)
            for (int64_t x = 0; x < width; ++x) {
                const size_t i = size_t(((f * height + y) * width + x) * 3);
                px[size_t(y * width + x)] =
                    palette_index(to_byte(p[i]), to_byte(p[i + 1]), to_byte(p[i + 2]));
            }
        lzw_encode(px, w);
    }
    w.u8(0x3b); // trailer
    w.close();
}

} // namespace

void export_clip(const LatentClip<float>& clip, const std::string& path, ExportFormat fmt) {
    check_exportable(clip);
    switch (fmt) {
        case ExportFormat::png_grid: write_png(clip, path); break;
        case ExportFormat::gif: write_gif(clip, path); break;
        default: fail(ErrCat::config, "unknown export format");
    }
}

} // namespace motionlab
