#pragma once

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbt/btree.hpp"

namespace sbt {

/// Static input text, 1-based. Suffix order is unsigned byte order; on prefix
/// equality the shorter suffix is smaller (no terminator sentinel).
class Text {
public:
    Text() = default;
    explicit Text(std::vector<uint8_t> bytes) : bytes_(std::move(bytes)) {}
    explicit Text(const std::string& s) : bytes_(s.begin(), s.end()) {}

    size_t size() const { return bytes_.size(); }
    uint8_t at(size_t i) const { return bytes_[i - 1]; }  // 1-based

    /// Character-by-character longest common prefix of T[i..] and T[j..].
    size_t lcp(size_t i, size_t j) const {
        size_t n = size();
        size_t l = 0;
        while (i + l <= n && j + l <= n && bytes_[i + l - 1] == bytes_[j + l - 1]) ++l;
        return l;
    }

    /// Suffix comparison with a known common-prefix lower bound.
    bool suffix_less(size_t i, size_t j, size_t skip = 0) const {
        size_t n = size();
        size_t l = skip;
        while (i + l <= n && j + l <= n) {
            uint8_t a = bytes_[i + l - 1];
            uint8_t b = bytes_[j + l - 1];
            if (a != b) return a < b;
            ++l;
        }
        return i + l > n && j + l <= n;  // shorter suffix first
    }

private:
    std::vector<uint8_t> bytes_;
};

inline size_t naive_lcp(const Text& t, size_t i, size_t j) { return t.lcp(i, j); }

/// Comparator ordering stored suffix start positions by the lexicographic
/// order of their suffixes. During a descent for one query position it
/// tracks the least common-prefix bound of the bracketing pivots, so each
/// comparison can skip the already-matched prefix; pivot-vs-pivot
/// comparisons fall back to plain character comparison.
struct SuffixCompare {
    const Text* text = nullptr;
    bool accelerate = true;
    mutable uint64_t query = 0;
    mutable bool query_active = false;
    mutable size_t lcp_left = 0;   // lcp(query, current left bracket)
    mutable size_t lcp_right = 0;  // lcp(query, current right bracket)

    void begin_query(uint64_t q) const {
        query = q;
        query_active = accelerate;
        lcp_left = lcp_right = 0;
    }

    bool operator()(uint64_t a, uint64_t b) const {
        if (a == b) return false;
        if (query_active && a == query) return query_vs(b, /*flip=*/false);
        if (query_active && b == query) return query_vs(a, /*flip=*/true);
        return text->suffix_less(a, b);
    }

private:
    bool query_vs(uint64_t pivot, bool flip) const {
        size_t skip = std::min(lcp_left, lcp_right);
        size_t l = skip + text->lcp(query + skip, pivot + skip);
        size_t n = text->size();
        l = std::min(l, std::min(n - query + 1, n - pivot + 1));
        bool less;
        if (query + l > n || pivot + l > n) less = (n - query) < (n - pivot);
        else less = text->at(query + l) < text->at(pivot + l);
        // the pivot becomes the new bracket on the side the query passes
        if (less) lcp_right = l;  // pivot is above the query
        else lcp_left = l;        // pivot is at or below the query
        return flip ? !less : less;
    }
};

/// The dynamic sparse suffix tree: positions of P as tree keys in suffix
/// order, the LCP with the rank-preceding suffix as satellite value, minima
/// as aggregates. Insertions and deletions maintain the SLCP entries of the
/// affected rank-neighbors; the LCP of any two stored positions is the
/// range minimum over the satellite values between their ranks.
class SparseSuffixIndex {
public:
    using Tree = BTree<PackedLeafStorage, SuffixCompare>;

    explicit SparseSuffixIndex(Text text, size_t capacity_hint = 0,
                               AggregateMode mode = AggregateMode::kMerge,
                               bool accelerate_compare = true)
        : text_(std::make_unique<Text>(std::move(text))) {
        size_t n = text_->size();
        unsigned k = std::max<unsigned>(1, static_cast<unsigned>(std::bit_width(n + 1)));
        TreeParams p = TreeParams::with_hint(std::max<size_t>(capacity_hint ? capacity_hint : n, 16), k);
        SuffixCompare cmp{text_.get(), accelerate_compare};
        tree_ = std::make_unique<Tree>(p, cmp, AggregateSpec::min(k), mode);
    }

    const Text& text() const { return *text_; }
    size_t size() const { return tree_->size(); }
    Tree& tree() { return *tree_; }

    bool contains(size_t p) const {
        tree_->comparator().begin_query(p);
        auto r = tree_->predecessor(p);
        return r && *r == p;
    }

    /// Adds suffix start position p. The new key's satellite value is its
    /// LCP with the rank-predecessor (0 at rank 1); the successor's value is
    /// rewritten to lcp(p, successor).
    void insert(size_t p) {
        check_pos(p);
        if (contains(p)) throw std::invalid_argument("position already stored");
        tree_->comparator().begin_query(p);
        auto pred = tree_->predecessor(p);
        tree_->comparator().begin_query(p);
        auto succ = tree_->successor(p);
        uint64_t own = pred ? text_->lcp(*pred, p) : 0;
        tree_->comparator().begin_query(p);
        tree_->insert(p, own);
        if (succ) {
            tree_->comparator().begin_query(*succ);
            tree_->set_value(*succ, text_->lcp(p, *succ));
        }
    }

    /// Removes position p; the successor's satellite value becomes
    /// min(slcp(p), slcp(successor)) by lcp transitivity.
    void erase(size_t p) {
        check_pos(p);
        tree_->comparator().begin_query(p);
        auto own = tree_->access_key(p);
        if (!own) throw std::invalid_argument("position not stored");
        tree_->comparator().begin_query(p);
        auto succ = tree_->successor(p);
        uint64_t succ_val = 0;
        if (succ) {
            tree_->comparator().begin_query(*succ);
            succ_val = *tree_->access_key(*succ);
        }
        tree_->comparator().begin_query(p);
        tree_->erase(p);
        if (succ) {
            bool has_pred = rank_of(*succ) > 0;
            tree_->comparator().begin_query(*succ);
            tree_->set_value(*succ, has_pred ? std::min<uint64_t>(*own, succ_val) : 0);
        }
    }

    /// LCP of the suffixes starting at stored positions p1, p2.
    size_t lcp_query(size_t p1, size_t p2) const {
        check_pos(p1);
        check_pos(p2);
        if (p1 == p2) {
            if (!contains(p1)) throw std::invalid_argument("position not stored");
            return text_->size() - p1 + 1;
        }
        size_t i = rank_of(p1);
        size_t j = rank_of(p2);
        if (!contains(p1) || !contains(p2)) throw std::invalid_argument("position not stored");
        if (i > j) std::swap(i, j);
        return tree_->range_aggregate_by_rank(i + 1, j + 1);
    }

    /// In-order dump of positions: the sparse suffix array.
    std::vector<size_t> ssa() const {
        std::vector<size_t> out;
        out.reserve(tree_->size());
        tree_->for_each_key([&](uint64_t k) { out.push_back(static_cast<size_t>(k)); });
        return out;
    }

    /// SLCP[i] = lcp of the rank-i suffix with its rank predecessor (0-based
    /// vector, SLCP[0] = 0).
    std::vector<size_t> slcp() const {
        std::vector<size_t> out;
        out.reserve(tree_->size());
        tree_->for_each_entry([&](uint64_t, uint64_t v) { out.push_back(static_cast<size_t>(v)); });
        return out;
    }

    /// 0-based rank of a stored position in suffix order.
    size_t rank_of(size_t p) const {
        tree_->comparator().begin_query(p);
        return tree_->rank_lower(p);
    }

private:
    void check_pos(size_t p) const {
        if (p < 1 || p > text_->size()) throw std::out_of_range("position outside the text");
    }

    std::unique_ptr<Text> text_;
    std::unique_ptr<Tree> tree_;
};

/// Brute-force SSA/SLCP construction for cross-checking.
inline std::pair<std::vector<size_t>, std::vector<size_t>> brute_force_ssa_slcp(
    const Text& t, std::vector<size_t> positions) {
    std::sort(positions.begin(), positions.end(),
              [&](size_t a, size_t b) { return t.suffix_less(a, b); });
    std::vector<size_t> slcp(positions.size(), 0);
    for (size_t i = 1; i < positions.size(); ++i)
        slcp[i] = t.lcp(positions[i - 1], positions[i]);
    return {positions, slcp};
}

} // namespace sbt
