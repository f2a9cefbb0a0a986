#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <unordered_map>
#include <vector>

#include "mtc/sha256.hpp"

namespace mtc {

using Hash = crypto::Digest;

// Leaf hash: SHA-256(0x00 || entry bytes).
Hash leaf_hash(BytesView entry_bytes);

// Interior node: SHA-256(0x01 || left || right), RFC 9162 domain separation.
Hash node_hash(const Hash& left, const Hash& right);

// Root of the zero-leaf tree: SHA-256 of the empty string.
Hash empty_tree_hash();

// Root over a complete in-memory leaf list (RFC 9162 tree shape).
Hash compute_root(std::span<const Hash> leaves);

struct Checkpoint {
    Hash root{};
    uint64_t size = 0;

    bool operator==(const Checkpoint&) const = default;
};

// Half-open leaf interval [start, end). An aligned range has power-of-two
// width and start divisible by the width; those are the complete subtrees.
struct SubtreeRange {
    uint64_t start = 0;
    uint64_t end = 0;

    uint64_t width() const { return end - start; }
    bool valid() const { return start < end; }
    bool aligned() const;
    bool contains(uint64_t index) const { return index >= start && index < end; }

    auto operator<=>(const SubtreeRange&) const = default;
};

// Sibling hashes ordered deepest-first (the first hash is the sibling
// closest to the leaf).
struct InclusionProof {
    std::vector<Hash> hashes;

    bool operator==(const InclusionProof&) const = default;
};

struct ConsistencyProof {
    std::vector<Hash> hashes;

    bool operator==(const ConsistencyProof&) const = default;
};

// Minimal ordered cover of [start, end) by maximal aligned ranges,
// greedy largest-aligned-prefix.
std::vector<SubtreeRange> decompose_range(SubtreeRange range);

// ceil(log2(w)) for w >= 1; the exact hash count of an aligned-subtree
// inclusion proof of width w.
unsigned proof_depth(uint64_t width);

// Number of hashes in the RFC 9162 consistency proof for (old_size, new_size),
// computed structurally without touching leaf data.
uint64_t consistency_proof_length(uint64_t old_size, uint64_t new_size);

// Fold `leaf` at `index` up through `proof` and return the reconstructed
// subtree root, or nullopt if the proof shape does not fit. The range must be
// aligned, or start at 0 (whole-tree proofs use the RFC 9162 tree shape).
std::optional<Hash> reconstruct_root(const Hash& leaf, uint64_t index,
                                     const InclusionProof& proof, SubtreeRange range);

[[nodiscard]] bool verify_inclusion(const Hash& leaf, uint64_t index,
                                    const InclusionProof& proof, SubtreeRange range,
                                    const Hash& expected_root);

[[nodiscard]] bool verify_consistency(const Checkpoint& older, const Checkpoint& newer,
                                      const ConsistencyProof& proof);

// Checks that the aligned subtree with root `subtree_root` is a complete node
// of the tree described by `within`; `path` is the node-to-root sibling list,
// deepest-first.
[[nodiscard]] bool verify_containment(const Hash& subtree_root, SubtreeRange range,
                                      const ConsistencyProof& path, const Checkpoint& within);

// Append-only log over 32-byte leaf hashes. Single writer, callers may read
// concurrently; every public operation takes a consistent snapshot.
//
// On-disk layout (when constructed with a directory):
//   leaves.bin     concatenated 32-byte leaf hashes, oldest retained first
//   frontier.json  size, min_available_index, frontier and retained node
//                  hashes (hex), enabling restart and safe pruning
class MerkleLog {
public:
    MerkleLog() = default;
    explicit MerkleLog(const std::filesystem::path& dir);

    uint64_t append(const Hash& leaf);
    uint64_t size() const;
    uint64_t min_available() const;

    Hash leaf(uint64_t index) const;
    Checkpoint checkpoint() const;
    Checkpoint checkpoint_at(uint64_t size) const;

    InclusionProof inclusion_proof(uint64_t index, SubtreeRange range) const;
    ConsistencyProof consistency_proof(uint64_t old_size, uint64_t new_size) const;
    ConsistencyProof containment_proof(SubtreeRange range, uint64_t tree_size) const;
    Hash subtree_root(SubtreeRange range) const;

    // Complete interior node at `level` (0 = leaves); exists iff
    // (index + 1) * 2^level <= size.
    Hash node(unsigned level, uint64_t index) const;

    // Drops leaves below `index`; retains the covering subtree roots so
    // checkpoints over the full tree stay computable. Monotone.
    void prune_before(uint64_t index);

private:
    using NodeKey = uint64_t;  // (level << 58) | index
    static NodeKey key(unsigned level, uint64_t index);

    Hash node_locked(unsigned level, uint64_t index) const;
    Hash mth(uint64_t lo, uint64_t hi) const;
    void path(uint64_t index, uint64_t lo, uint64_t hi, std::vector<Hash>& out) const;
    void subproof(uint64_t m, uint64_t lo, uint64_t hi, bool complete,
                  std::vector<Hash>& out) const;
    void containment_path(SubtreeRange target, uint64_t lo, uint64_t hi,
                          std::vector<Hash>& out) const;
    Hash root_locked(uint64_t size) const;
    void persist_frontier() const;
    void load(const std::filesystem::path& dir);

    mutable std::mutex mu_;
    std::vector<Hash> leaves_;  // leaves_[i] is leaf base_ + i
    uint64_t base_ = 0;         // min available index
    uint64_t size_ = 0;
    // Roots of the aligned subtrees covering [0, base_), kept across pruning.
    std::map<std::pair<unsigned, uint64_t>, Hash> retained_;
    mutable std::unordered_map<NodeKey, Hash> cache_;
    std::filesystem::path dir_;  // empty => in-memory only
};

}  // namespace mtc
