#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtc {

using Bytes = std::vector<uint8_t>;
using BytesView = std::span<const uint8_t>;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed wire data, bad hex, truncated input.
struct DecodeError : Error {
    using Error::Error;
};

// Data pruned from the log or not yet synced.
struct UnavailableError : Error {
    using Error::Error;
};

std::string to_hex(BytesView data);
Bytes from_hex(std::string_view hex);

std::string to_base64(BytesView data);
Bytes from_base64(std::string_view b64);

inline BytesView as_bytes(std::string_view s) {
    return {reinterpret_cast<const uint8_t*>(s.data()), s.size()};
}

// Big-endian serializer for the deterministic wire formats.
class ByteWriter {
public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(BytesView data) { out_.insert(out_.end(), data.begin(), data.end()); }

    Bytes take() { return std::move(out_); }
    size_t size() const { return out_.size(); }

private:
    Bytes out_;
};

class ByteReader {
public:
    explicit ByteReader(BytesView data) : data_(data) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    BytesView raw(size_t n);

    size_t remaining() const { return data_.size() - pos_; }
    // Decoders reject trailing bytes.
    void expect_end() const {
        if (pos_ != data_.size()) throw DecodeError("trailing bytes after value");
    }

private:
    BytesView take(size_t n);

    BytesView data_;
    size_t pos_ = 0;
};

}  // namespace mtc
