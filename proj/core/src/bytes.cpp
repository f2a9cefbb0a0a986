#include "mtc/bytes.hpp"

namespace mtc {

namespace {

constexpr char kHexDigits[] = "0123456789abcdef";

int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

constexpr char kB64Digits[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}

}  // namespace

std::string to_hex(BytesView data) {
    std::string out;
    out.reserve(data.size() * 2);
    for (uint8_t b : data) {
        out.push_back(kHexDigits[b >> 4]);
        out.push_back(kHexDigits[b & 0x0f]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) throw DecodeError("odd-length hex string");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_nibble(hex[i]);
        int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) throw DecodeError("invalid hex digit");
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return out;
}

std::string to_base64(BytesView data) {
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    while (i + 3 <= data.size()) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
        out.push_back(kB64Digits[(v >> 18) & 0x3f]);
        out.push_back(kB64Digits[(v >> 12) & 0x3f]);
        out.push_back(kB64Digits[(v >> 6) & 0x3f]);
        out.push_back(kB64Digits[v & 0x3f]);
        i += 3;
    }
    size_t rest = data.size() - i;
    if (rest == 1) {
        uint32_t v = data[i] << 16;
        out.push_back(kB64Digits[(v >> 18) & 0x3f]);
        out.push_back(kB64Digits[(v >> 12) & 0x3f]);
        out += "==";
    } else if (rest == 2) {
        uint32_t v = (data[i] << 16) | (data[i + 1] << 8);
        out.push_back(kB64Digits[(v >> 18) & 0x3f]);
        out.push_back(kB64Digits[(v >> 12) & 0x3f]);
        out.push_back(kB64Digits[(v >> 6) & 0x3f]);
        out += "=";
    }
    return out;
}

Bytes from_base64(std::string_view b64) {
    if (b64.size() % 4 != 0) throw DecodeError("base64 length not a multiple of 4");
    Bytes out;
    out.reserve(b64.size() / 4 * 3);
    for (size_t i = 0; i < b64.size(); i += 4) {
        int pad = 0;
        uint32_t v = 0;
        for (size_t j = 0; j < 4; ++j) {
            char c = b64[i + j];
            if (c == '=') {
                if (i + 4 != b64.size() || j < 2) throw DecodeError("misplaced base64 padding");
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad) throw DecodeError("base64 data after padding");
            int d = b64_value(c);
            if (d < 0) throw DecodeError("invalid base64 digit");
            v = (v << 6) | static_cast<uint32_t>(d);
        }
        out.push_back(static_cast<uint8_t>(v >> 16));
        if (pad < 2) out.push_back(static_cast<uint8_t>(v >> 8));
        if (pad < 1) out.push_back(static_cast<uint8_t>(v));
    }
    return out;
}

void ByteWriter::u16(uint16_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
}

void ByteWriter::u32(uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out_.push_back(static_cast<uint8_t>(v >> s));
}

void ByteWriter::u64(uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out_.push_back(static_cast<uint8_t>(v >> s));
}

BytesView ByteReader::take(size_t n) {
    if (remaining() < n) throw DecodeError("truncated input");
    BytesView v = data_.subspan(pos_, n);
    pos_ += n;
    return v;
}

uint8_t ByteReader::u8() { return take(1)[0]; }

uint16_t ByteReader::u16() {
    auto v = take(2);
    return static_cast<uint16_t>((v[0] << 8) | v[1]);
}

uint32_t ByteReader::u32() {
    auto v = take(4);
    uint32_t out = 0;
    for (uint8_t b : v) out = (out << 8) | b;
    return out;
}

uint64_t ByteReader::u64() {
    auto v = take(8);
    uint64_t out = 0;
    for (uint8_t b : v) out = (out << 8) | b;
    return out;
}

BytesView ByteReader::raw(size_t n) { return take(n); }

}  // namespace mtc
