#include <algorithm>
#include <cstring>
#include <vector>

#include "motionlab/binio.hpp"
#include "motionlab/digest.hpp"
#include "motionlab/io.hpp"

namespace motionlab {

namespace {

constexpr char kMagic[8] = {'M', 'L', 'A', 'B', 'C', 'K', 'P', 'T'};

// modest structural bounds so a garbage file fails cleanly instead of
// provoking a giant allocation
constexpr uint64_t kMaxTensors = 1u << 20;
constexpr uint64_t kMaxPayload = 1ull << 33; // floats
constexpr int kMaxRank = 8;

uint8_t tag_byte(ParamTag t) {
    switch (t) {
        case ParamTag::spatial: return 0;
        case ParamTag::temporal: return 1;
        default: return 2;
    }
}

void write_f32_le(binio::Writer& w, const float* p, int64_t n, Fnv1a64& digest) {
    std::vector<unsigned char> buf(size_t(n) * 4);
    for (int64_t i = 0; i < n; ++i) {
        uint32_t b;
        std::memcpy(&b, p + i, 4);
        buf[size_t(i) * 4 + 0] = (unsigned char)(b);
        buf[size_t(i) * 4 + 1] = (unsigned char)(b >> 8);
        buf[size_t(i) * 4 + 2] = (unsigned char)(b >> 16);
        buf[size_t(i) * 4 + 3] = (unsigned char)(b >> 24);
    }
    digest.update(buf.data(), buf.size());
    w.bytes(buf.data(), buf.size());
}

void read_f32_le(binio::Reader& r, float* p, int64_t n, Fnv1a64& digest) {
    std::vector<unsigned char> buf(size_t(n) * 4);
    r.bytes(buf.data(), buf.size());
    digest.update(buf.data(), buf.size());
    for (int64_t i = 0; i < n; ++i) {
        const uint32_t b = uint32_t(buf[size_t(i) * 4 + 0]) |
                           uint32_t(buf[size_t(i) * 4 + 1]) << 8 |
                           uint32_t(buf[size_t(i) * 4 + 2]) << 16 |
                           uint32_t(buf[size_t(i) * 4 + 3]) << 24;
        std::memcpy(p + i, &b, 4);
    }
}

} // namespace

void save_checkpoint(const Model<float>& m, const std::string& path) {
    m.config.validate();
    binio::Writer w(path);
    w.bytes(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);

    const UNetConfig& c = m.config;
    w.i32(c.frames);
    w.i32(c.size);
    w.i32(int32_t(c.channels.size()));
    for (int ch : c.channels) w.i32(ch);
    w.i32(c.heads);
    w.i32(c.in_channels);
    w.i32(c.vocab);
    w.i32(c.text_len);
    w.i32(c.text_dim);
    w.i32(c.time_dim);
    w.i32(c.timesteps);

    w.i32(m.sched.steps);
    w.f64(m.sched.beta_start);
    w.f64(m.sched.beta_end);

    w.u64(uint64_t(m.params.size()));
    uint64_t offset = 0;
    for (const auto& [name, t] : m.params) {
        w.str(name);
        w.u8(tag_byte(param_tag(name)));
        w.u8(uint8_t(t.rank()));
        for (int i = 0; i < t.rank(); ++i) w.i64(t.dim(i));
        w.u64(offset);
        offset += uint64_t(t.numel());
    }

    w.u64(offset); // payload length in floats
    Fnv1a64 digest;
    for (const auto& [name, t] : m.params) {
        (void)name;
        write_f32_le(w, t.data(), t.numel(), digest);
    }
    w.u64(digest.value());
    w.close();
}

Model<float> load_checkpoint(const std::string& path) {
    binio::Reader r(path);
    char magic[8];
    r.bytes(magic, sizeof magic);
    require(std::memcmp(magic, kMagic, sizeof kMagic) == 0, ErrCat::corrupt,
            "not a checkpoint file: " + path);
    const uint32_t version = r.u32();
    require(version == kCheckpointVersion, ErrCat::version,
            "unsupported checkpoint format version " + std::to_string(version) + ": " + path);

    Model<float> m;
    UNetConfig& c = m.config;
    c.frames = r.i32();
    c.size = r.i32();
    const int32_t levels = r.i32();
    require(levels >= 1 && levels <= 16, ErrCat::corrupt, "implausible level count: " + path);
    c.channels.clear();
    for (int32_t i = 0; i < levels; ++i) c.channels.push_back(r.i32());
    c.heads = r.i32();
    c.in_channels = r.i32();
    c.vocab = r.i32();
    c.text_len = r.i32();
    c.text_dim = r.i32();
    c.time_dim = r.i32();
    c.timesteps = r.i32();
    c.validate();

    const int32_t steps = r.i32();
    const double beta_start = r.f64();
    const double beta_end = r.f64();
    require(steps == c.timesteps, ErrCat::corrupt,
            "schedule length disagrees with the model configuration: " + path);
    require(steps >= 1 && beta_start > 0 && beta_end < 1 && beta_start <= beta_end,
            ErrCat::corrupt, "implausible schedule parameters: " + path);
    m.sched = make_schedule(steps, beta_start, beta_end);

    const uint64_t count = r.u64();
    require(count >= 1 && count <= kMaxTensors, ErrCat::corrupt,
            "implausible tensor count: " + path);
    struct Entry {
        std::string name;
        uint8_t tag = 0;
        Shape shape;
        uint64_t offset = 0;
        int64_t numel = 0;
    };
    std::vector<Entry> manifest;
    manifest.reserve(size_t(count));
    for (uint64_t i = 0; i < count; ++i) {
        Entry e;
        e.name = r.str();
        require(!e.name.empty(), ErrCat::corrupt, "unnamed tensor in manifest: " + path);
        e.tag = r.u8();
        require(e.tag <= 2, ErrCat::corrupt, "unknown parameter tag: " + path);
        const uint8_t rank = r.u8();
        require(rank >= 1 && rank <= kMaxRank, ErrCat::corrupt,
                "implausible tensor rank: " + path);
        e.numel = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            const int64_t dim = r.i64();
            require(dim >= 1 && dim <= int64_t(kMaxPayload), ErrCat::corrupt,
                    "implausible tensor dimension: " + path);
            e.shape.push_back(dim);
            e.numel *= dim;
            require(e.numel <= int64_t(kMaxPayload), ErrCat::corrupt,
                    "implausible tensor size: " + path);
        }
        e.offset = r.u64();
        manifest.push_back(std::move(e));
    }

    const uint64_t payload_len = r.u64();
    require(payload_len <= kMaxPayload, ErrCat::corrupt, "implausible payload size: " + path);

    // manifest order is also payload order; offsets must tile the payload
    // exactly, with no gap, overlap, or stray trailing floats
    uint64_t running = 0;
    for (const Entry& e : manifest) {
        require(e.offset == running, ErrCat::corrupt,
                "manifest offsets must tile the payload: " + path);
        running += uint64_t(e.numel);
    }
    require(running == payload_len, ErrCat::corrupt,
            "manifest disagrees with payload length: " + path);

    Fnv1a64 digest;
    for (const Entry& e : manifest) {
        Tensor<float> t = Tensor<float>::zeros(e.shape);
        read_f32_le(r, t.data(), t.numel(), digest);
        require(param_tag(e.name) == ParamTag(e.tag), ErrCat::corrupt,
                "parameter tag disagrees with its name: " + e.name + ": " + path);
        const bool fresh = m.params.emplace(e.name, std::move(t)).second;
        require(fresh, ErrCat::corrupt, "duplicate tensor name: " + e.name + ": " + path);
    }
    const uint64_t want = r.u64();
    require(digest.value() == want, ErrCat::corrupt, "payload digest mismatch: " + path);
    require(r.at_eof(), ErrCat::corrupt, "trailing bytes after checkpoint: " + path);

    m.partition = partition_params(m.params);
    return m;
}

} // namespace motionlab
