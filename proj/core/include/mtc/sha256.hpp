#pragma once

#include <array>
#include <cstdint>

#include "mtc/bytes.hpp"

namespace mtc::crypto {

using Digest = std::array<uint8_t, 32>;

Digest sha256(BytesView data);

// Streaming interface; one finish() counts as one hash operation.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(BytesView data);
    Digest finish();

private:
    void* ctx_;
};

// Thread-local count of SHA-256 evaluations, used to assert the hash-cost
// bounds of verification paths. Callers snapshot and diff.
uint64_t hash_ops();

inline BytesView digest_view(const Digest& d) { return {d.data(), d.size()}; }

}  // namespace mtc::crypto
