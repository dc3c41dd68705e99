#include <cstring>
#include <vector>

#include "motionlab/binio.hpp"
#include "motionlab/digest.hpp"
#include "motionlab/io.hpp"

namespace motionlab {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'A', 'B', 'C', 'L', 'I', 'P'};
constexpr uint64_t kMaxClipFloats = 1ull << 33;

} // namespace

void save_clip(const LatentClip<float>& clip, const std::string& path) {
    require(clip.latent.defined() && clip.latent.rank() == 5, ErrCat::shape,
            "clip latent must be [B,F,H,W,C]");
    binio::Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kClipVersion);
    for (int i = 0; i < 5; ++i) w.i64(clip.latent.dim(i));
    require(clip.prompt.size() <= 0xffff, ErrCat::contract, "prompt too long");
    w.u16(uint16_t(clip.prompt.size()));
    for (int32_t id : clip.prompt.ids) w.i32(id);

    Fnv1a64 digest;
    const float* p = clip.latent.data();
    std::vector<unsigned char> buf(size_t(clip.latent.numel()) * 4);
    for (int64_t i = 0; i < clip.latent.numel(); ++i) {
        uint32_t b;
        std::memcpy(&b, p + i, 4);
        for (int k = 0; k < 4; ++k) buf[size_t(i) * 4 + size_t(k)] = (unsigned char)(b >> (8 * k));
    }
    digest.update(buf.data(), buf.size());
    w.bytes(buf.data(), buf.size());
    w.u64(digest.value());
    w.close();
}

LatentClip<float> load_clip(const std::string& path) {
    binio::Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    require(std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrCat::corrupt,
            "not a clip file: " + path);
    const uint32_t version = r.u32();
    require(version == kClipVersion, ErrCat::version,
            "unsupported clip format version " + std::to_string(version) + ": " + path);

    Shape shape;
    int64_t numel = 1;
    for (int i = 0; i < 5; ++i) {
        const int64_t d = r.i64();
        require(d >= 1 && d <= int64_t(kMaxClipFloats), ErrCat::corrupt,
                "implausible clip dimension: " + path);
        shape.push_back(d);
        numel *= d;
        require(numel <= int64_t(kMaxClipFloats), ErrCat::corrupt,
                "implausible clip size: " + path);
    }

    LatentClip<float> clip;
    const uint16_t tokens = r.u16();
    clip.prompt.ids.reserve(tokens);
    for (uint16_t i = 0; i < tokens; ++i) clip.prompt.ids.push_back(r.i32());

    clip.latent = Tensor<float>::zeros(shape);
    std::vector<unsigned char> buf(size_t(numel) * 4);
    r.bytes(buf.data(), buf.size());
    Fnv1a64 digest;
    digest.update(buf.data(), buf.size());
    float* p = clip.latent.data();
    for (int64_t i = 0; i < numel; ++i) {
        uint32_t b = 0;
        for (int k = 0; k < 4; ++k) b |= uint32_t(buf[size_t(i) * 4 + size_t(k)]) << (8 * k);
        std::memcpy(p + i, &b, 4);
    }
    const uint64_t want = r.u64();
    require(digest.value() == want, ErrCat::corrupt, "clip payload digest mismatch: " + path);
    require(r.at_eof(), ErrCat::corrupt, "trailing bytes after clip: " + path);
    return clip;
}

} // namespace motionlab
