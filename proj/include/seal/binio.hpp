#pragma once

// Little-endian scalar I/O shared by the binary containers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "seal/error.hpp"

namespace seal::binio {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void magic(const char (&m)[4]) { out_.write(m, 4); }
    void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), n); }
    void u8(uint8_t v) { put(v); }
    void i8(int8_t v) { put(v); }
    void u16(uint16_t v) { put(v); }
    void u32(uint32_t v) { put(v); }
    void u64(uint64_t v) { put(v); }
    void i64(int64_t v) { put(v); }
    void f32(float v) { put(v); }

private:
    template <typename T>
    void put(T v) { out_.write(reinterpret_cast<const char*>(&v), sizeof v); }

    std::ostream& out_;
};

class Reader {
public:
    Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

    void expect_magic(const char (&m)[4])
    {
        char got[4];
        read(got, 4);
        if (std::memcmp(got, m, 4) != 0) {
            throw FormatError(source_ + ": bad magic, expected " + std::string(m, 4));
        }
    }
    void read(void* dst, std::size_t n)
    {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        if (static_cast<std::size_t>(in_.gcount()) != n) throw FormatError(source_ + ": truncated file");
    }
    uint8_t u8() { return get<uint8_t>(); }
    int8_t i8() { return get<int8_t>(); }
    uint16_t u16() { return get<uint16_t>(); }
    uint32_t u32() { return get<uint32_t>(); }
    uint64_t u64() { return get<uint64_t>(); }
    int64_t i64() { return get<int64_t>(); }
    float f32() { return get<float>(); }

private:
    template <typename T>
    T get()
    {
        T v;
        read(&v, sizeof v);
        return v;
    }

    std::istream& in_;
    std::string source_;
};

}  // namespace seal::binio
