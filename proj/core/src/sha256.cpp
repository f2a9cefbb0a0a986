#include "mtc/sha256.hpp"

#include <openssl/evp.h>

namespace mtc::crypto {

namespace {

thread_local uint64_t g_hash_ops = 0;

// Explicitly fetched once; EVP_DigestInit_ex with an implicitly fetched md
// pays a provider lookup on every init under OpenSSL 3.
const EVP_MD* fetched_sha256() {
    static const EVP_MD* md = EVP_MD_fetch(nullptr, "SHA256", nullptr);
    return md;
}

}  // namespace

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (!ctx_ || EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), fetched_sha256(), nullptr) != 1)
        throw Error("EVP_DigestInit_ex failed");
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

Sha256& Sha256::update(BytesView data) {
    if (EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size()) != 1)
        throw Error("EVP_DigestUpdate failed");
    return *this;
}

Digest Sha256::finish() {
    Digest out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len) != 1 || len != out.size())
        throw Error("EVP_DigestFinal_ex failed");
    ++g_hash_ops;
    return out;
}

Digest sha256(BytesView data) {
    thread_local EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    Digest out{};
    unsigned int len = 0;
    if (EVP_DigestInit_ex(ctx, fetched_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, out.data(), &len) != 1 || len != out.size())
        throw Error("sha256 failed");
    ++g_hash_ops;
    return out;
}

uint64_t hash_ops() { return g_hash_ops; }

}  // namespace mtc::crypto
