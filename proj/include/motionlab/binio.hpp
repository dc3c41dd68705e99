#pragma once
// Little-endian primitives shared by the binary file formats. Readers
// treat any short read as file corruption, never undefined behavior.

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>

#include "motionlab/errors.hpp"

namespace motionlab::binio {

class Writer {
public:
    Writer(const std::string& path) : path_(path) {
        f_ = std::fopen(path.c_str(), "wb");
        require(f_ != nullptr, ErrCat::io, "cannot open for writing: " + path);
    }
    ~Writer() {
        if (f_) std::fclose(f_);
    }
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    void bytes(const void* p, size_t n) {
        require(std::fwrite(p, 1, n, f_) == n, ErrCat::io, "write failed: " + path_);
    }
    void u8(uint8_t v) { bytes(&v, 1); }
    void u16(uint16_t v) { le(uint64_t(v), 2); }
    void u32(uint32_t v) { le(uint64_t(v), 4); }
    void u64(uint64_t v) { le(v, 8); }
    void i32(int32_t v) { le(uint64_t(uint32_t(v)), 4); }
    void i64(int64_t v) { le(uint64_t(v), 8); }
    void f32(float v) {
        uint32_t b;
        static_assert(sizeof b == sizeof v);
        std::memcpy(&b, &v, 4);
        u32(b);
    }
    void f64(double v) {
        uint64_t b;
        std::memcpy(&b, &v, 8);
        u64(b);
    }
    void str(const std::string& s) {
        require(s.size() <= 0xffff, ErrCat::contract, "string field too long");
        u16(uint16_t(s.size()));
        bytes(s.data(), s.size());
    }

    // flushes and reports any deferred stream error exactly once
    void close() {
        require(std::fflush(f_) == 0 && std::ferror(f_) == 0, ErrCat::io,
                "write failed: " + path_);
        std::fclose(f_);
        f_ = nullptr;
    }

private:
    void le(uint64_t v, int n) {
        unsigned char b[8];
        for (int i = 0; i < n; ++i) b[i] = (unsigned char)(v >> (8 * i));
        bytes(b, size_t(n));
    }

    std::FILE* f_ = nullptr;
    std::string path_;
};

class Reader {
public:
    Reader(const std::string& path) : path_(path) {
        f_ = std::fopen(path.c_str(), "rb");
        require(f_ != nullptr, ErrCat::io, "cannot open for reading: " + path);
    }
    ~Reader() {
        if (f_) std::fclose(f_);
    }
    Reader(const Reader&) = delete;
    Reader& operator=(const Reader&) = delete;

    void bytes(void* p, size_t n) {
        require(std::fread(p, 1, n, f_) == n, ErrCat::corrupt, "truncated file: " + path_);
    }
    uint8_t u8() {
        uint8_t v;
        bytes(&v, 1);
        return v;
    }
    uint16_t u16() { return uint16_t(le(2)); }
    uint32_t u32() { return uint32_t(le(4)); }
    uint64_t u64() { return le(8); }
    int32_t i32() { return int32_t(u32()); }
    int64_t i64() { return int64_t(u64()); }
    float f32() {
        const uint32_t b = u32();
        float v;
        std::memcpy(&v, &b, 4);
        return v;
    }
    double f64() {
        const uint64_t b = u64();
        double v;
        std::memcpy(&v, &b, 8);
        return v;
    }
    std::string str() {
        std::string s(size_t(u16()), '\0');
        bytes(s.data(), s.size());
        return s;
    }
    bool at_eof() {
        unsigned char probe;
        return std::fread(&probe, 1, 1, f_) == 0;
    }
    const std::string& path() const { return path_; }

private:
    uint64_t le(int n) {
        unsigned char b[8];
        bytes(b, size_t(n));
        uint64_t v = 0;
        for (int i = 0; i < n; ++i) v |= uint64_t(b[i]) << (8 * i);
        return v;
    }

    std::FILE* f_ = nullptr;
    std::string path_;
};

} // namespace motionlab::binio
