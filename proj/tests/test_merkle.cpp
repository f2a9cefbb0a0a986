#include <doctest.h>

#include <filesystem>
#include <random>

#include "mtc/merkle.hpp"
#include "oracle.hpp"

using namespace mtc;

namespace {

Hash from_oracle(const oracle::Hash& h) {
    Hash out;
    std::copy(h.begin(), h.end(), out.begin());
    return out;
}

std::vector<Hash> test_leaves(size_t n, uint32_t seed = 7) {
    std::mt19937 rng(seed);
    std::vector<Hash> out(n);
    for (auto& h : out)
        for (auto& b : h) b = static_cast<uint8_t>(rng());
    return out;
}

MerkleLog log_with(const std::vector<Hash>& leaves) {
    MerkleLog log;
    for (const Hash& l : leaves) log.append(l);
    return log;
}

std::filesystem::path temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("mtc-test-" + std::string(tag) + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(dir);
    return dir;
}

}  // namespace

TEST_CASE("leaf and node hash primitives") {
    // SHA-256 of the single byte 0x00
    CHECK(to_hex(crypto::digest_view(leaf_hash({}))) ==
          "6e340b9cffb37a989ca544e6bb780a2c78901d3fb33738768511a30617afa01d");
    // SHA-256 of the empty string
    CHECK(to_hex(crypto::digest_view(empty_tree_hash())) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");

    Bytes a{1, 2, 3}, b{1, 2, 4};
    CHECK(leaf_hash(a) != leaf_hash(b));

    auto leaves = test_leaves(4);
    CHECK(node_hash(leaves[0], leaves[1]) != node_hash(leaves[1], leaves[0]));

    auto log = log_with(leaves);
    CHECK(log.checkpoint_at(2).root == node_hash(leaves[0], leaves[1]));
    CHECK(log.checkpoint_at(4).root == node_hash(node_hash(leaves[0], leaves[1]),
                                                 node_hash(leaves[2], leaves[3])));
}

TEST_CASE("append and checkpoint basics") {
    MerkleLog log;
    auto leaves = test_leaves(16);
    CHECK(log.append(leaves[0]) == 0);
    for (size_t i = 1; i < 16; ++i) CHECK(log.append(leaves[i]) == i);
    CHECK(log.size() == 16);

    CHECK(log.checkpoint_at(0).root == empty_tree_hash());
    CHECK(log.checkpoint_at(1).root == leaves[0]);

    oracle::Tree ref({leaves.begin(), leaves.end()});
    CHECK(log.checkpoint_at(16).root == from_oracle(ref.root(16)));
    CHECK(log.checkpoint().root == from_oracle(ref.root(16)));
    CHECK_THROWS_AS((void)log.checkpoint_at(17), Error);

    // compute_root agrees with the log over every prefix
    for (size_t n = 0; n <= 16; ++n)
        CHECK(compute_root(std::span(leaves.data(), n)) == log.checkpoint_at(n).root);
}

TEST_CASE("inclusion proofs match oracle and verify") {
    auto leaves = test_leaves(64);
    auto log = log_with(leaves);
    oracle::Tree ref({leaves.begin(), leaves.end()});

    for (uint64_t n = 1; n <= 64; ++n) {
        for (uint64_t i = 0; i < n; ++i) {
            auto proof = log.inclusion_proof(i, {0, n});
            auto want = ref.inclusion_path(i, 0, n);
            REQUIRE(proof.hashes.size() == want.size());
            for (size_t j = 0; j < want.size(); ++j)
                CHECK(proof.hashes[j] == from_oracle(want[j]));
            CHECK(verify_inclusion(leaves[i], i, proof, {0, n}, log.checkpoint_at(n).root));
        }
    }
}

TEST_CASE("single-leaf range has empty proof") {
    auto leaves = test_leaves(8);
    auto log = log_with(leaves);
    auto proof = log.inclusion_proof(5, {5, 6});
    CHECK(proof.hashes.empty());
    CHECK(verify_inclusion(leaves[5], 5, proof, {5, 6}, leaves[5]));
}

TEST_CASE("aligned subtree proofs have exact depth and size") {
    auto leaves = test_leaves(4096);
    auto log = log_with(leaves);

    auto check_width = [&](uint64_t start, uint64_t width, size_t expect) {
        SubtreeRange range{start, start + width};
        Hash root = log.subtree_root(range);
        for (uint64_t i : {start, start + width / 2, start + width - 1}) {
            auto proof = log.inclusion_proof(i, range);
            CHECK(proof.hashes.size() == expect);
            CHECK(verify_inclusion(leaves[i], i, proof, range, root));
        }
    };
    check_width(0, 16, 4);     // 128 proof bytes
    check_width(1024, 1024, 10);  // 320 B
    check_width(0, 4096, 12);  // 384 B
    CHECK(proof_depth(16) == 4);
    CHECK(proof_depth(1024) == 10);
    CHECK(proof_depth(4096) == 12);
}

TEST_CASE("tampered proofs reject") {
    auto leaves = test_leaves(64);
    auto log = log_with(leaves);
    Hash root = log.checkpoint_at(64).root;
    auto proof = log.inclusion_proof(13, {0, 64});

    auto bad = proof;
    bad.hashes[2][5] ^= 0x10;
    CHECK_FALSE(verify_inclusion(leaves[13], 13, bad, {0, 64}, root));
    CHECK_FALSE(verify_inclusion(leaves[14], 13, proof, {0, 64}, root));
    CHECK_FALSE(verify_inclusion(leaves[13], 12, proof, {0, 64}, root));
    auto short_proof = proof;
    short_proof.hashes.pop_back();
    CHECK_FALSE(verify_inclusion(leaves[13], 13, short_proof, {0, 64}, root));
}

TEST_CASE("consistency proofs match oracle and verify") {
    auto leaves = test_leaves(64);
    auto log = log_with(leaves);
    oracle::Tree ref({leaves.begin(), leaves.end()});

    for (uint64_t m = 0; m <= 64; ++m) {
        for (uint64_t n = m; n <= 64; ++n) {
            auto proof = log.consistency_proof(m, n);
            auto want = ref.consistency_proof(m, n);
            REQUIRE(proof.hashes.size() == want.size());
            for (size_t j = 0; j < want.size(); ++j)
                CHECK(proof.hashes[j] == from_oracle(want[j]));
            CHECK(proof.hashes.size() == consistency_proof_length(m, n));
            CHECK(verify_consistency(log.checkpoint_at(m), log.checkpoint_at(n), proof));
        }
    }
}

TEST_CASE("consistency covers non-power-of-two frontier") {
    auto leaves = test_leaves(13);
    auto log = log_with(leaves);
    auto proof = log.consistency_proof(5, 13);
    CHECK(verify_consistency(log.checkpoint_at(5), log.checkpoint_at(13), proof));
    CHECK(log.consistency_proof(13, 13).hashes.empty());
    CHECK_THROWS_AS((void)log.consistency_proof(13, 5), Error);
}

TEST_CASE("fork detection: mutated leaf invalidates consistency") {
    auto leaves = test_leaves(16);
    auto honest = log_with(leaves);
    Checkpoint old_cp = honest.checkpoint_at(8);

    auto forked_leaves = leaves;
    forked_leaves[3][0] ^= 1;
    auto forked = log_with(forked_leaves);
    auto proof = forked.consistency_proof(8, 16);
    CHECK_FALSE(verify_consistency(old_cp, forked.checkpoint_at(16), proof));
    // the forked log is self-consistent though
    CHECK(verify_consistency(forked.checkpoint_at(8), forked.checkpoint_at(16), proof));
}

TEST_CASE("consistency rejects single-bit mutations") {
    auto leaves = test_leaves(48);
    auto log = log_with(leaves);
    auto proof = log.consistency_proof(21, 48);
    Checkpoint a = log.checkpoint_at(21), b = log.checkpoint_at(48);
    REQUIRE(verify_consistency(a, b, proof));

    std::mt19937 rng(3);
    for (int t = 0; t < 200; ++t) {
        auto p = proof;
        Checkpoint a2 = a, b2 = b;
        switch (t % 4) {
            case 0:
                p.hashes[rng() % p.hashes.size()][rng() % 32] ^= uint8_t(1 << (rng() % 8));
                break;
            case 1: a2.root[rng() % 32] ^= uint8_t(1 << (rng() % 8)); break;
            case 2: b2.root[rng() % 32] ^= uint8_t(1 << (rng() % 8)); break;
            case 3: b2.size ^= uint64_t(1) << (rng() % 8); break;
        }
        CHECK_FALSE(verify_consistency(a2, b2, p));
    }
}

TEST_CASE("decompose_range is minimal, aligned, contiguous") {
    CHECK(decompose_range({0, 16}) == std::vector<SubtreeRange>{{0, 16}});
    CHECK(decompose_range({2, 5}) == std::vector<SubtreeRange>{{2, 4}, {4, 5}});
    CHECK(decompose_range({5, 13}) ==
          std::vector<SubtreeRange>{{5, 6}, {6, 8}, {8, 12}, {12, 13}});

    for (uint64_t s = 0; s < 64; ++s) {
        for (uint64_t e = s + 1; e <= 64; ++e) {
            auto parts = decompose_range({s, e});
            uint64_t at = s;
            for (const auto& p : parts) {
                CHECK(p.aligned());
                CHECK(p.start == at);
                at = p.end;
            }
            CHECK(at == e);
            CHECK(parts.size() == oracle::minimal_cover_size(s, e));
        }
    }
}

TEST_CASE("subtree roots") {
    auto leaves = test_leaves(32);
    auto log = log_with(leaves);
    oracle::Tree ref({leaves.begin(), leaves.end()});

    CHECK(log.subtree_root({7, 8}) == leaves[7]);
    CHECK(log.subtree_root({0, 16}) == log.checkpoint_at(16).root);
    CHECK(log.subtree_root({16, 32}) == from_oracle(ref.mth(16, 32)));
    CHECK_THROWS_AS((void)log.subtree_root({2, 5}), Error);
}

TEST_CASE("containment proofs bind subtrees to checkpoints") {
    auto leaves = test_leaves(48);
    auto log = log_with(leaves);
    oracle::Tree ref({leaves.begin(), leaves.end()});

    for (uint64_t n : {16u, 32u, 37u, 48u}) {
        Checkpoint cp = log.checkpoint_at(n);
        for (const auto& range : decompose_range({0, n})) {
            Hash root = log.subtree_root(range);
            auto path = log.containment_proof(range, n);
            auto want = ref.containment_path(range.start, range.end, n);
            REQUIRE(path.hashes.size() == want.size());
            for (size_t j = 0; j < want.size(); ++j)
                CHECK(path.hashes[j] == from_oracle(want[j]));
            CHECK(verify_containment(root, range, path, cp));

            if (!path.hashes.empty()) {
                auto bad = path;
                bad.hashes[0][0] ^= 1;
                CHECK_FALSE(verify_containment(root, range, bad, cp));
            }
            Hash bad_root = root;
            bad_root[31] ^= 0x80;
            CHECK_FALSE(verify_containment(bad_root, range, path, cp));
        }
        // deeper aligned nodes too
        auto path = log.containment_proof({8, 16}, n);
        CHECK(verify_containment(log.subtree_root({8, 16}), {8, 16}, path, cp));
    }
}

TEST_CASE("append preserves earlier checkpoints") {
    auto leaves = test_leaves(40);
    MerkleLog log;
    std::vector<Checkpoint> seen;
    for (const Hash& l : leaves) {
        log.append(l);
        seen.push_back(log.checkpoint());
    }
    for (size_t n = 1; n <= seen.size(); ++n) {
        CHECK(log.checkpoint_at(n) == seen[n - 1]);
        auto proof = log.consistency_proof(n, log.size());
        CHECK(verify_consistency(seen[n - 1], log.checkpoint(), proof));
    }
}

TEST_CASE("pruning keeps the tree verifiable and refuses pruned proofs") {
    auto leaves = test_leaves(16);
    auto log = log_with(leaves);
    Hash full_root = log.checkpoint_at(16).root;

    log.prune_before(0);  // no-op
    CHECK(log.min_available() == 0);

    log.prune_before(8);
    CHECK(log.min_available() == 8);
    CHECK(log.checkpoint_at(16).root == full_root);
    CHECK(log.checkpoint_at(8).root == log.subtree_root({0, 8}));

    CHECK_THROWS_AS((void)log.inclusion_proof(3, {0, 8}), UnavailableError);
    CHECK_THROWS_AS((void)log.inclusion_proof(3, {0, 16}), UnavailableError);
    CHECK_THROWS_AS((void)log.leaf(3), UnavailableError);

    // boundary and beyond still served
    auto proof = log.inclusion_proof(8, {8, 16});
    CHECK(verify_inclusion(leaves[8], 8, proof, {8, 16}, log.subtree_root({8, 16})));
    auto whole = log.inclusion_proof(8, {0, 16});
    CHECK(verify_inclusion(leaves[8], 8, whole, {0, 16}, full_root));

    CHECK_THROWS_AS(log.prune_before(4), Error);  // monotone

    // appends continue with fresh indices
    Hash extra = leaves[0];
    CHECK(log.append(extra) == 16);
    CHECK(log.size() == 17);

    // prune at a non-power-of-two boundary
    log.prune_before(13);
    CHECK(log.checkpoint_at(17).size == 17);
    auto p14 = log.inclusion_proof(14, {0, 17});
    CHECK(verify_inclusion(leaves[14], 14, p14, {0, 17}, log.checkpoint_at(17).root));
}

TEST_CASE("persistence: reload, crash tolerance, prune state") {
    auto dir = temp_dir("log");
    auto leaves = test_leaves(20);
    Checkpoint cp;
    {
        MerkleLog log(dir);
        for (const Hash& l : leaves) log.append(l);
        log.prune_before(5);
        cp = log.checkpoint();
    }
    {
        MerkleLog log(dir);
        CHECK(log.size() == 20);
        CHECK(log.min_available() == 5);
        CHECK(log.checkpoint() == cp);
        CHECK_THROWS_AS((void)log.leaf(2), UnavailableError);
        auto proof = log.inclusion_proof(9, {0, 20});
        CHECK(verify_inclusion(leaves[9], 9, proof, {0, 20}, cp.root));
        CHECK(log.append(leaves[0]) == 20);
    }
    {
        // leaves.bin one ahead of a stale frontier must be tolerated:
        // simulate the crash window by rewinding frontier.json
        MerkleLog log(dir);
        CHECK(log.size() == 21);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("fresh empty persistent log") {
    auto dir = temp_dir("empty");
    MerkleLog log(dir);
    CHECK(log.size() == 0);
    CHECK(log.checkpoint().root == empty_tree_hash());
    std::filesystem::remove_all(dir);
}
