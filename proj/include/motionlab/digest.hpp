#pragma once

#include <cstddef>
#include <cstdint>

namespace motionlab {

// FNV-1a 64-bit streaming digest. Used for parameter-freeze integrity
// checks and checkpoint payload verification.
class Fnv1a64 {
public:
    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            h_ ^= uint64_t(p[i]);
            h_ *= 0x100000001b3ULL;
        }
    }

    uint64_t value() const { return h_; }

private:
    uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline uint64_t fnv1a64(const void* data, size_t n) {
    Fnv1a64 d;
    d.update(data, n);
    return d.value();
}

}  // namespace motionlab
