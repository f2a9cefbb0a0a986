#include "mtc/merkle.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace mtc {

namespace {

// Largest power of two strictly below n (n >= 2).
uint64_t split_point(uint64_t n) { return std::bit_floor(n - 1); }

unsigned log2_exact(uint64_t pow2) { return static_cast<unsigned>(std::countr_zero(pow2)); }

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

Hash leaf_hash(BytesView entry_bytes) {
    static constexpr uint8_t prefix = 0x00;
    crypto::Sha256 h;
    h.update({&prefix, 1});
    h.update(entry_bytes);
    return h.finish();
}

Hash node_hash(const Hash& left, const Hash& right) {
    static constexpr uint8_t prefix = 0x01;
    crypto::Sha256 h;
    h.update({&prefix, 1});
    h.update(crypto::digest_view(left));
    h.update(crypto::digest_view(right));
    return h.finish();
}

Hash empty_tree_hash() {
    static const Hash h = crypto::sha256({});
    return h;
}

Hash compute_root(std::span<const Hash> leaves) {
    if (leaves.empty()) return empty_tree_hash();
    // Incremental fold: keep one pending root per complete power-of-two block.
    std::vector<std::pair<unsigned, Hash>> stack;  // (level, hash)
    for (const Hash& leaf : leaves) {
        stack.emplace_back(0u, leaf);
        while (stack.size() >= 2 &&
               stack[stack.size() - 2].first == stack[stack.size() - 1].first) {
            auto right = stack.back();
            stack.pop_back();
            auto& left = stack.back();
            left = {left.first + 1, node_hash(left.second, right.second)};
        }
    }
    Hash acc = stack.back().second;
    for (size_t i = stack.size() - 1; i-- > 0;) acc = node_hash(stack[i].second, acc);
    return acc;
}

bool SubtreeRange::aligned() const {
    if (!valid()) return false;
    uint64_t w = width();
    return std::has_single_bit(w) && start % w == 0;
}

std::vector<SubtreeRange> decompose_range(SubtreeRange range) {
    if (!range.valid()) throw Error("empty subtree range");
    std::vector<SubtreeRange> out;
    uint64_t s = range.start;
    while (s < range.end) {
        uint64_t w = s ? (s & (~s + 1)) : (uint64_t{1} << 63);
        uint64_t rem = range.end - s;
        while (w > rem) w >>= 1;
        out.push_back({s, s + w});
        s += w;
    }
    return out;
}

unsigned proof_depth(uint64_t width) {
    if (width == 0) throw Error("zero-width subtree");
    return static_cast<unsigned>(std::bit_width(width - 1));
}

uint64_t consistency_proof_length(uint64_t old_size, uint64_t new_size) {
    if (old_size == new_size || old_size == 0) return 0;
    // Mirrors the SUBPROOF recursion without touching hashes.
    uint64_t len = 0;
    uint64_t m = old_size, n = new_size;
    bool complete = true;
    while (m != n) {
        uint64_t k = split_point(n);
        if (m <= k) {
            n = k;
        } else {
            m -= k;
            n -= k;
            complete = false;
        }
        ++len;
    }
    return len + (complete ? 0 : 1);
}

std::optional<Hash> reconstruct_root(const Hash& leaf, uint64_t index,
                                     const InclusionProof& proof, SubtreeRange range) {
    if (!range.valid() || !range.contains(index)) return std::nullopt;
    if (!(range.aligned() || range.start == 0)) return std::nullopt;
    // RFC 9162 2.1.3.2, translated to subtree coordinates.
    uint64_t fn = index - range.start;
    uint64_t sn = range.width() - 1;
    Hash r = leaf;
    for (const Hash& p : proof.hashes) {
        if (sn == 0) return std::nullopt;
        if ((fn & 1) || fn == sn) {
            r = node_hash(p, r);
            if (!(fn & 1)) {
                while (fn != 0 && !(fn & 1)) {
                    fn >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            r = node_hash(r, p);
        }
        fn >>= 1;
        sn >>= 1;
    }
    if (sn != 0) return std::nullopt;
    return r;
}

bool verify_inclusion(const Hash& leaf, uint64_t index, const InclusionProof& proof,
                      SubtreeRange range, const Hash& expected_root) {
    auto root = reconstruct_root(leaf, index, proof, range);
    return root && *root == expected_root;
}

bool verify_consistency(const Checkpoint& older, const Checkpoint& newer,
                        const ConsistencyProof& proof) {
    if (older.size > newer.size) return false;
    if (older.size == newer.size) return proof.hashes.empty() && older.root == newer.root;
    if (older.size == 0) return proof.hashes.empty() && older.root == empty_tree_hash();

    // RFC 9162 2.1.4.2. When the old size is a power of two, the old root
    // itself is the first path element.
    size_t idx = 0;
    Hash fr, sr;
    if (std::has_single_bit(older.size)) {
        fr = sr = older.root;
    } else {
        if (proof.hashes.empty()) return false;
        fr = sr = proof.hashes[idx++];
    }
    uint64_t fn = older.size - 1;
    uint64_t sn = newer.size - 1;
    while (fn & 1) {
        fn >>= 1;
        sn >>= 1;
    }
    for (; idx < proof.hashes.size(); ++idx) {
        const Hash& c = proof.hashes[idx];
        if (sn == 0) return false;
        if ((fn & 1) || fn == sn) {
            fr = node_hash(c, fr);
            sr = node_hash(c, sr);
            if (!(fn & 1)) {
                while (fn != 0 && !(fn & 1)) {
                    fn >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            sr = node_hash(sr, c);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return fr == older.root && sr == newer.root && sn == 0;
}

bool verify_containment(const Hash& subtree_root, SubtreeRange range,
                        const ConsistencyProof& path, const Checkpoint& within) {
    if (!range.aligned() || range.end > within.size) return false;
    if (range.start == 0 && range.end == within.size)
        return path.hashes.empty() && subtree_root == within.root;
    if (within.size == 0) return false;

    // Walk the tree shape top-down, consuming the deepest-first path from
    // the back (top sibling last).
    size_t idx = path.hashes.size();
    struct Walker {
        const Hash& target_root;
        SubtreeRange target;
        const std::vector<Hash>& hashes;
        size_t& idx;
        bool ok = true;

        Hash descend(uint64_t lo, uint64_t hi) {
            if (lo == target.start && hi == target.end) return target_root;
            if (hi - lo <= target.width()) {
                ok = false;
                return {};
            }
            uint64_t k = split_point(hi - lo);
            if (idx == 0) {
                ok = false;
                return {};
            }
            if (target.end <= lo + k) {
                const Hash& sibling = hashes[--idx];
                Hash left = descend(lo, lo + k);
                return ok ? node_hash(left, sibling) : Hash{};
            }
            if (target.start >= lo + k) {
                const Hash& sibling = hashes[--idx];
                Hash right = descend(lo + k, hi);
                return ok ? node_hash(sibling, right) : Hash{};
            }
            ok = false;  // aligned target cannot straddle a split
            return {};
        }
    } walker{subtree_root, range, path.hashes, idx};

    Hash computed = walker.descend(0, within.size);
    return walker.ok && idx == 0 && computed == within.root;
}

// ---------------------------------------------------------------------------
// MerkleLog

MerkleLog::NodeKey MerkleLog::key(unsigned level, uint64_t index) {
    return (static_cast<uint64_t>(level) << 58) | index;
}

MerkleLog::MerkleLog(const std::filesystem::path& dir) { load(dir); }

uint64_t MerkleLog::append(const Hash& leaf) {
    std::lock_guard lock(mu_);
    leaves_.push_back(leaf);
    uint64_t index = size_;
    ++size_;
    if (!dir_.empty()) {
        std::ofstream out(dir_ / "leaves.bin", std::ios::binary | std::ios::app);
        out.write(reinterpret_cast<const char*>(leaf.data()),
                  static_cast<std::streamsize>(leaf.size()));
        if (!out) throw Error("append to leaves.bin failed");
        persist_frontier();
    }
    return index;
}

uint64_t MerkleLog::size() const {
    std::lock_guard lock(mu_);
    return size_;
}

uint64_t MerkleLog::min_available() const {
    std::lock_guard lock(mu_);
    return base_;
}

Hash MerkleLog::leaf(uint64_t index) const {
    std::lock_guard lock(mu_);
    if (index >= size_) throw Error("leaf index beyond log");
    if (index < base_) throw UnavailableError("leaf pruned");
    return leaves_[index - base_];
}

Checkpoint MerkleLog::checkpoint() const {
    std::lock_guard lock(mu_);
    return {root_locked(size_), size_};
}

Checkpoint MerkleLog::checkpoint_at(uint64_t size) const {
    std::lock_guard lock(mu_);
    if (size > size_) throw Error("checkpoint size exceeds log");
    return {root_locked(size), size};
}

Hash MerkleLog::root_locked(uint64_t size) const {
    if (size == 0) return empty_tree_hash();
    return mth(0, size);
}

Hash MerkleLog::node(unsigned level, uint64_t index) const {
    std::lock_guard lock(mu_);
    return node_locked(level, index);
}

Hash MerkleLog::node_locked(unsigned level, uint64_t index) const {
    if (level >= 58) throw Error("node level out of range");
    if (index >= (size_ >> level)) throw Error("incomplete node");
    if (level == 0) {
        if (index >= base_) return leaves_[index - base_];
        if (auto it = retained_.find({0u, index}); it != retained_.end()) return it->second;
        throw UnavailableError("leaf pruned");
    }
    NodeKey k = key(level, index);
    if (auto it = cache_.find(k); it != cache_.end()) return it->second;
    if (auto it = retained_.find({level, index}); it != retained_.end()) {
        cache_.emplace(k, it->second);
        return it->second;
    }
    uint64_t start = index << level;
    uint64_t end = (index + 1) << level;
    if (end <= base_) throw UnavailableError("node pruned");
    (void)start;
    Hash h = node_hash(node_locked(level - 1, 2 * index), node_locked(level - 1, 2 * index + 1));
    cache_.emplace(k, h);
    return h;
}

Hash MerkleLog::mth(uint64_t lo, uint64_t hi) const {
    if (lo == hi) return empty_tree_hash();
    uint64_t width = hi - lo;
    if (std::has_single_bit(width) && lo % width == 0)
        return node_locked(log2_exact(width), lo / width);
    uint64_t k = split_point(width);
    return node_hash(mth(lo, lo + k), mth(lo + k, hi));
}

void MerkleLog::path(uint64_t index, uint64_t lo, uint64_t hi, std::vector<Hash>& out) const {
    if (hi - lo == 1) return;
    uint64_t k = split_point(hi - lo);
    if (index < lo + k) {
        path(index, lo, lo + k, out);
        out.push_back(mth(lo + k, hi));
    } else {
        path(index, lo + k, hi, out);
        out.push_back(mth(lo, lo + k));
    }
}

InclusionProof MerkleLog::inclusion_proof(uint64_t index, SubtreeRange range) const {
    std::lock_guard lock(mu_);
    if (!range.valid()) throw Error("empty range");
    if (!(range.aligned() || range.start == 0)) throw Error("range not aligned");
    if (range.end > size_) throw Error("range beyond log");
    if (!range.contains(index)) throw Error("index outside range");
    if (index < base_) throw UnavailableError("leaf pruned");
    InclusionProof proof;
    path(index, range.start, range.end, proof.hashes);
    return proof;
}

void MerkleLog::subproof(uint64_t m, uint64_t lo, uint64_t hi, bool complete,
                         std::vector<Hash>& out) const {
    uint64_t n = hi - lo;
    if (m == n) {
        if (!complete) out.push_back(mth(lo, hi));
        return;
    }
    uint64_t k = split_point(n);
    if (m <= k) {
        subproof(m, lo, lo + k, complete, out);
        out.push_back(mth(lo + k, hi));
    } else {
        subproof(m - k, lo + k, hi, false, out);
        out.push_back(mth(lo, lo + k));
    }
}

ConsistencyProof MerkleLog::consistency_proof(uint64_t old_size, uint64_t new_size) const {
    std::lock_guard lock(mu_);
    if (old_size > new_size) throw Error("old size exceeds new size");
    if (new_size > size_) throw Error("size beyond log");
    ConsistencyProof proof;
    if (old_size == new_size || old_size == 0) return proof;
    subproof(old_size, 0, new_size, true, proof.hashes);
    return proof;
}

void MerkleLog::containment_path(SubtreeRange target, uint64_t lo, uint64_t hi,
                                 std::vector<Hash>& out) const {
    if (lo == target.start && hi == target.end) return;
    uint64_t k = split_point(hi - lo);
    if (target.end <= lo + k) {
        containment_path(target, lo, lo + k, out);
        out.push_back(mth(lo + k, hi));
    } else {
        containment_path(target, lo + k, hi, out);
        out.push_back(mth(lo, lo + k));
    }
}

ConsistencyProof MerkleLog::containment_proof(SubtreeRange range, uint64_t tree_size) const {
    std::lock_guard lock(mu_);
    if (!range.aligned()) throw Error("range not aligned");
    if (range.end > tree_size) throw Error("range beyond tree size");
    if (tree_size > size_) throw Error("size beyond log");
    ConsistencyProof proof;
    if (range.start == 0 && range.end == tree_size) return proof;
    containment_path(range, 0, tree_size, proof.hashes);
    return proof;
}

Hash MerkleLog::subtree_root(SubtreeRange range) const {
    std::lock_guard lock(mu_);
    if (!range.aligned()) throw Error("range not aligned");
    if (range.end > size_) throw Error("range beyond log");
    unsigned level = log2_exact(range.width());
    return node_locked(level, range.start >> level);
}

void MerkleLog::prune_before(uint64_t index) {
    std::lock_guard lock(mu_);
    if (index < base_) throw Error("pruning is monotone");
    if (index > size_) throw Error("prune index beyond log");
    if (index == base_) return;

    std::map<std::pair<unsigned, uint64_t>, Hash> retained;
    for (const SubtreeRange& block : decompose_range({0, index})) {
        unsigned level = log2_exact(block.width());
        uint64_t idx = block.start >> level;
        retained[{level, idx}] = node_locked(level, idx);
    }
    leaves_.erase(leaves_.begin(), leaves_.begin() + static_cast<ptrdiff_t>(index - base_));
    base_ = index;
    retained_ = std::move(retained);
    // Drop cached nodes that now overlap the pruned region; proofs below the
    // prune point must fail, not be served from stale cache entries.
    for (auto it = cache_.begin(); it != cache_.end();) {
        unsigned level = static_cast<unsigned>(it->first >> 58);
        uint64_t idx = it->first & ((uint64_t{1} << 58) - 1);
        if ((idx << level) < base_)
            it = cache_.erase(it);
        else
            ++it;
    }
    if (!dir_.empty()) {
        std::string blob;
        if (!leaves_.empty())
            blob.assign(reinterpret_cast<const char*>(leaves_.front().data()),
                        leaves_.size() * sizeof(Hash));
        atomic_write(dir_ / "leaves.bin", blob);
        persist_frontier();
    }
}

void MerkleLog::persist_frontier() const {
    nlohmann::json doc;
    doc["size"] = size_;
    doc["min_available_index"] = base_;
    auto dump_blocks = [this](uint64_t lo, uint64_t hi) {
        nlohmann::json arr = nlohmann::json::array();
        if (lo < hi) {
            for (const SubtreeRange& block : decompose_range({lo, hi})) {
                unsigned level = log2_exact(block.width());
                uint64_t idx = block.start >> level;
                arr.push_back({{"level", level},
                               {"index", idx},
                               {"hash", to_hex(crypto::digest_view(node_locked(level, idx)))}});
            }
        }
        return arr;
    };
    doc["frontier"] = dump_blocks(0, size_);
    nlohmann::json retained = nlohmann::json::array();
    for (const auto& [pos, hash] : retained_)
        retained.push_back({{"level", pos.first},
                            {"index", pos.second},
                            {"hash", to_hex(crypto::digest_view(hash))}});
    doc["retained"] = retained;
    atomic_write(dir_ / "frontier.json", doc.dump(2) + "\n");
}

void MerkleLog::load(const std::filesystem::path& dir) {
    dir_ = dir;
    std::filesystem::create_directories(dir_);

    uint64_t stored_size = 0;
    if (std::filesystem::exists(dir_ / "frontier.json")) {
        std::ifstream in(dir_ / "frontier.json");
        nlohmann::json doc = nlohmann::json::parse(in);
        stored_size = doc.at("size").get<uint64_t>();
        base_ = doc.at("min_available_index").get<uint64_t>();
        for (const auto& item : doc.at("retained")) {
            Bytes h = from_hex(item.at("hash").get<std::string>());
            if (h.size() != 32) throw Error("bad retained hash length");
            Hash hash;
            std::copy(h.begin(), h.end(), hash.begin());
            retained_[{item.at("level").get<unsigned>(), item.at("index").get<uint64_t>()}] = hash;
        }
    }

    if (std::filesystem::exists(dir_ / "leaves.bin")) {
        std::ifstream in(dir_ / "leaves.bin", std::ios::binary);
        std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        if (blob.size() % sizeof(Hash) != 0) throw Error("leaves.bin size not a multiple of 32");
        size_t count = blob.size() / sizeof(Hash);
        leaves_.resize(count);
        std::memcpy(leaves_.data(), blob.data(), blob.size());
    }
    size_ = base_ + leaves_.size();
    // Tolerate leaves.bin being ahead of the frontier (crash between writes);
    // a frontier claiming more leaves than we have is data loss.
    if (stored_size > size_) throw Error("frontier claims more leaves than leaves.bin holds");
    persist_frontier();
}

}  // namespace mtc
