#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbt/aggregate.hpp"
#include "sbt/leaf_storage.hpp"
#include "sbt/node_pool.hpp"

namespace sbt {

/// Fixed-capacity inline vector for internal-node arrays: keeps separators
/// and child pointers in the node's own cache lines.
template <class T, size_t N>
class InlineVec {
public:
    size_t size() const { return n_; }
    bool empty() const { return n_ == 0; }
    T& operator[](size_t i) { return a_[i]; }
    const T& operator[](size_t i) const { return a_[i]; }
    T& front() { return a_[0]; }
    T& back() { return a_[n_ - 1]; }
    const T& front() const { return a_[0]; }
    const T& back() const { return a_[n_ - 1]; }
    T* begin() { return a_; }
    T* end() { return a_ + n_; }
    const T* begin() const { return a_; }
    const T* end() const { return a_ + n_; }

    void push_back(const T& v) {
        assert(n_ < N);
        a_[n_++] = v;
    }
    void pop_back() {
        assert(n_ > 0);
        --n_;
    }
    T* insert(T* pos, const T& v) {
        assert(n_ < N);
        for (T* p = a_ + n_; p > pos; --p) *p = *(p - 1);
        *pos = v;
        ++n_;
        return pos;
    }
    template <class It>
    void insert(T* pos, It first, It last) {
        size_t count = static_cast<size_t>(last - first);
        assert(n_ + count <= N);
        for (T* p = a_ + n_ + count - 1; p >= pos + count; --p) *p = *(p - count);
        for (size_t i = 0; i < count; ++i) pos[i] = first[static_cast<std::ptrdiff_t>(i)];
        n_ += count;
    }
    T* erase(T* pos) {
        for (T* p = pos; p + 1 < a_ + n_; ++p) *p = *(p + 1);
        --n_;
        return pos;
    }
    template <class It>
    void assign(It first, It last) {
        n_ = 0;
        for (It it = first; it != last; ++it) push_back(*it);
    }
    void resize(size_t n) {
        assert(n <= N);
        n_ = n;
    }
    InlineVec& operator=(std::initializer_list<T> il) {
        assign(il.begin(), il.end());
        return *this;
    }

private:
    T a_[N];
    size_t n_ = 0;
};

/// Structural parameters, frozen at construction from the capacity hint n0.
/// Guarantees (occupancy, window accounting) are stated relative to n0; the
/// tree is not rebuilt when n drifts away from the hint.
struct TreeParams {
    unsigned t = 16;   // internal-node degree, >= 3
    unsigned q = 0;    // sibling-window width, >= 3
    size_t b = 0;      // leaf capacity in keys, >= 2
    unsigned k = 64;   // key width in bits
    size_t n0 = 1ull << 20;

    static TreeParams with_hint(size_t n0, unsigned k, unsigned t = 16) {
        TreeParams p;
        p.t = t;
        p.k = k;
        p.n0 = n0;
        double lg = std::log2(static_cast<double>(std::max<size_t>(n0, 2)));
        p.q = std::max<unsigned>(3, static_cast<unsigned>(std::ceil(lg)));
        p.b = std::max<size_t>(2, static_cast<size_t>(std::ceil(64.0 * lg / k)));
        return p;
    }

    void validate() const {
        if (t < 3) throw std::invalid_argument("TreeParams: t must be >= 3");
        if (t > 32) throw std::invalid_argument("TreeParams: t above the inline-node cap of 32");
        if (q < 3) throw std::invalid_argument("TreeParams: q must be >= 3");
        if (b < 2) throw std::invalid_argument("TreeParams: b must be >= 2");
        if (k < 1 || k > 64) throw std::invalid_argument("TreeParams: k must be in [1,64]");
    }
};

/// Model-bit space accounting. Leaves are charged their key array (plus the
/// satellite array when enabled) and 4w header bits for links and cursors;
/// internal nodes t*w child links, (t-1)*k separators and 2w bits.
struct TreeStats {
    size_t n_keys = 0;
    size_t n_leaves = 0;
    size_t n_internal = 0;
    size_t height = 0;
    uint64_t bits_leaves = 0;
    // Key storage only: the b*k capacity model for packed leaves, the exact
    // stream length for difference-coded leaves.
    uint64_t bits_keys = 0;
    uint64_t bits_internal = 0;
    uint64_t bits_total = 0;
    double occupancy_ratio = 0.0;
};

struct InvariantReport {
    bool ok = true;
    std::string violation;
};

/// Counters for the last completed operation.
struct OpCounters {
    uint64_t leaves_touched = 0;  // distinct leaves whose state changed
    uint64_t block_merges = 0;    // constant-time aggregate merges into blocks
    uint64_t block_evals = 0;     // full evaluations of block contents
};

struct FixStats {
    uint64_t visited = 0;  // distinct blocks examined by the last revalidation
    uint64_t swaps = 0;
    uint64_t merges = 0;
    // 1 = left cascade, 2 = right cascade, 3 = boundary rebalance, 4 = local reset
    int phase = 0;
};

struct TotalCounters {
    uint64_t inserts = 0;
    uint64_t erases = 0;
    uint64_t splits = 0;
    uint64_t rotations = 0;  // q-window key rotations (insert or delete path)
    uint64_t repairs = 0;    // window-property repair rotations
    uint64_t batch_rebalances = 0;
    uint64_t fix_invocations = 0;
    uint64_t max_leaves_touched = 0;
    uint64_t max_fix_visited = 0;
    uint64_t min_rebalance_gap = std::numeric_limits<uint64_t>::max();
};

/// The load-balancing B+ tree: all keys live in the leaves, internal nodes
/// route via per-child subtree maxima. A full leaf defers splitting by
/// rotating boundary keys across up to q sibling leaves; a leaf is deleted
/// only when empty. Optionally each key carries a satellite value and every
/// node an aggregate over a block of the conceptual global value array,
/// decoupled from the physical leaf arrays so rotations do not force
/// aggregate recomputation.
template <class Storage = PackedLeafStorage, class Compare = std::less<uint64_t>>
class BTree {
public:
    explicit BTree(TreeParams params, Compare cmp = Compare(),
                   std::optional<AggregateSpec> agg = std::nullopt,
                   AggregateMode mode = AggregateMode::kMerge)
        : params_(params), cmp_(std::move(cmp)), agg_(std::move(agg)), mode_(mode) {
        params_.validate();
        if constexpr (Storage::kCompressed) {
            if (agg_) throw std::invalid_argument("BTree: compressed leaves carry no satellite values");
        }
        root_ = make_leaf();
        first_leaf_ = static_cast<Leaf*>(root_);
    }

    ~BTree() { destroy(root_); }

    BTree(const BTree&) = delete;
    BTree& operator=(const BTree&) = delete;

    size_t size() const { return n_keys_; }
    bool empty() const { return n_keys_ == 0; }
    const TreeParams& params() const { return params_; }
    Compare& comparator() { return cmp_; }
    bool aggregates_enabled() const { return agg_.has_value(); }
    AggregateMode aggregate_mode() const { return mode_; }

    // ------------------------------------------------------------------
    // Queries

    /// Largest stored key <= key (the key itself when stored).
    std::optional<uint64_t> predecessor(uint64_t key) const {
        if (n_keys_ == 0) return std::nullopt;
        const Leaf* lf = descend_leaf(key);
        size_t r = lf->store.rank_of(key, cmp_);
        if (r > 0) return lf->store.key_at(r - 1);
        return lf->prev ? std::optional<uint64_t>(lf->prev->store.max_key()) : std::nullopt;
    }

    /// Smallest stored key > key.
    std::optional<uint64_t> successor(uint64_t key) const {
        if (n_keys_ == 0) return std::nullopt;
        const Leaf* lf = descend_upper(key);
        size_t r = lf->store.rank_of(key, cmp_);
        if (r < lf->store.size()) return lf->store.key_at(r);
        return lf->next ? std::optional<uint64_t>(lf->next->store.min_key()) : std::nullopt;
    }

    bool contains(uint64_t key) const {
        auto p = predecessor(key);
        return p && keys_equal(*p, key);
    }

    /// Count of stored keys < key.
    size_t rank_lower(uint64_t key) const {
        if (n_keys_ == 0) return 0;
        const Node* n = root_;
        size_t acc = 0;
        while (!n->is_leaf) {
            const Internal* v = static_cast<const Internal*>(n);
            size_t idx = route_index(v, key);
            for (size_t i = 0; i < idx; ++i) acc += count_of(v->children[i]);
            n = v->children[idx];
        }
        const Leaf* lf = static_cast<const Leaf*>(n);
        size_t lo = 0, hi = lf->store.size();
        while (lo < hi) {
            size_t mid = lo + (hi - lo) / 2;
            if (cmp_(lf->store.key_at(mid), key)) lo = mid + 1;
            else hi = mid;
        }
        return acc + lo;
    }

    /// Count of stored keys <= key.
    size_t rank_upper(uint64_t key) const {
        if (n_keys_ == 0) return 0;
        const Node* n = root_;
        size_t acc = 0;
        while (!n->is_leaf) {
            const Internal* v = static_cast<const Internal*>(n);
            size_t idx = route_index_upper(v, key);
            for (size_t i = 0; i < idx; ++i) acc += count_of(v->children[i]);
            n = v->children[idx];
        }
        const Leaf* lf = static_cast<const Leaf*>(n);
        return acc + lf->store.rank_of(key, cmp_);
    }

    /// Key at 0-based in-order rank.
    uint64_t select(size_t rank) const {
        if (rank >= n_keys_) throw std::out_of_range("BTree::select");
        auto [lf, start] = leaf_by_position(rank);
        return lf->store.key_at(rank - start);
    }

    template <class Fn>
    void for_each_key(Fn&& fn) const {
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next)
            for (size_t i = 0; i < lf->store.size(); ++i) fn(lf->store.key_at(i));
    }

    template <class Fn>
    void for_each_entry(Fn&& fn) const {
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next)
            for (size_t i = 0; i < lf->store.size(); ++i)
                fn(lf->store.key_at(i), lf->store.has_values() ? lf->store.value_at(i) : 0);
    }

    // ------------------------------------------------------------------
    // Updates

    /// Inserts key (with satellite value when aggregates are enabled).
    /// Returns false only in compressed mode when the key is already stored.
    bool insert(uint64_t key, uint64_t value = 0) {
        begin_op();
        Leaf* lf;
        size_t leaf_start = 0;
        if (agg_) {
            auto d = descend_mut(key);
            lf = d.leaf;
            leaf_start = d.start;
        } else {
            lf = const_cast<Leaf*>(descend_leaf(key));
        }
        size_t rank = lf->store.rank_of(key, cmp_);
        if constexpr (Storage::kCompressed) {
            if (rank > 0 && lf->store.key_at(rank - 1) == key) return false;
        }
        ++totals_.inserts;
        ++tick_;
        size_t r_global = leaf_start + rank;

        if (!lf->store.full()) {
            BlockCtx ctx = capture_region(lf, lf, leaf_start, r_global, /*for_insert=*/true);
            touch(lf);
            lf->store.insert_at(rank, key, value);
            add_count_up(lf, +1);
            ++n_keys_;
            refresh_separators_up(lf);
            apply_blocks_insert(ctx, value);
        } else {
            auto target = find_nonfull_in_window(lf);
            if (target.leaf) {
                ++totals_.rotations;
                rotate_insert(lf, leaf_start, rank, key, value, target, r_global);
            } else {
                ++totals_.splits;
                split_insert(lf, leaf_start, rank, key, value);
            }
        }
        post_op_block_maintenance();
        end_op();
        return true;
    }

    /// Removes one occurrence of key. Returns false when absent.
    bool erase(uint64_t key) {
        begin_op();
        if (n_keys_ == 0) return false;
        Leaf* lf;
        size_t leaf_start = 0;
        if (agg_) {
            auto d = descend_mut(key);
            lf = d.leaf;
            leaf_start = d.start;
        } else {
            lf = const_cast<Leaf*>(descend_leaf(key));
        }
        size_t r = lf->store.rank_of(key, cmp_);
        if (r == 0 || !keys_equal(lf->store.key_at(r - 1), key)) return false;
        ++totals_.erases;
        size_t pos = r - 1;
        size_t r_global = leaf_start + pos;
        bool was_full = lf->store.full();

        WindowHit donor{};
        if (was_full) donor = find_nonfull_in_window(lf);

        Leaf* region_a = lf;
        Leaf* region_b = lf;
        size_t region_a_start = leaf_start;
        if (donor.leaf) {
            if (donor.dir < 0) {
                region_a = donor.leaf;
                region_a_start = leaf_start - (span_len(donor.leaf, lf) - lf->store.size());
            } else {
                region_b = donor.leaf;
            }
        }
        BlockCtx ctx = capture_region(region_a, region_b, region_a_start, r_global,
                                      /*for_insert=*/false);

        touch(lf);
        uint64_t removed_value = lf->store.has_values() ? lf->store.value_at(pos) : 0;
        lf->store.remove_at(pos);
        --n_keys_;
        Leaf* emptied = nullptr;
        if (donor.leaf) {
            ++totals_.rotations;
            pull_one_key(lf, donor);
            add_count_up(donor.leaf, -1);
            if (donor.leaf->store.empty()) emptied = donor.leaf;
        } else {
            add_count_up(lf, -1);
            if (lf->store.empty() && lf != root_) emptied = lf;
        }
        if (!lf->store.empty()) refresh_separators_up(lf);

        apply_blocks_remove(ctx, removed_value);
        Leaf* repair_anchor = nullptr;
        if (emptied) {
            repair_anchor = emptied->prev ? emptied->prev : emptied->next;
            remove_leaf(emptied);
        }
        if (!donor.leaf && was_full && lf != emptied) repair_window_around(lf);
        if (repair_anchor) repair_window_around(repair_anchor);
        post_op_block_maintenance();
        end_op();
        return true;
    }

    // ------------------------------------------------------------------
    // Satellite values and aggregates

    /// Satellite value stored with key (last occurrence).
    std::optional<uint64_t> access_key(uint64_t key) const {
        require_aggregates();
        if (n_keys_ == 0) return std::nullopt;
        const Leaf* lf = descend_leaf(key);
        size_t r = lf->store.rank_of(key, cmp_);
        if (r == 0 || !keys_equal(lf->store.key_at(r - 1), key)) return std::nullopt;
        return lf->store.value_at(r - 1);
    }

    /// Rewrites the satellite value of a stored key.
    bool set_value(uint64_t key, uint64_t value) {
        require_aggregates();
        begin_op();
        if (n_keys_ == 0) return false;
        auto d = descend_mut(key);
        Leaf* lf = d.leaf;
        size_t r = lf->store.rank_of(key, cmp_);
        if (r == 0 || !keys_equal(lf->store.key_at(r - 1), key)) return false;
        touch(lf);
        uint64_t old_value = lf->store.value_at(r - 1);
        lf->store.set_value(r - 1, value);
        Leaf* owner = owner_of_position(lf, d.start, d.start + r - 1);
        if (auto hint = agg_->replace_hint(owner->block.aggregate, old_value, value))
            owner->block.aggregate = *hint;
        else
            reeval_block(owner);
        refresh_agg_up(owner);
        end_op();
        return true;
    }

    /// Aggregate over the whole tree (identity when empty).
    uint64_t root_aggregate() const {
        require_aggregates();
        return node_agg(root_);
    }

    /// Opaque node handles for top-down navigation over aggregate values.
    struct NodeHandle {
        const void* p = nullptr;
        bool leaf = false;
    };
    NodeHandle root_node() const { return {root_, root_->is_leaf}; }
    size_t child_count(NodeHandle h) const {
        return h.leaf ? 0 : static_cast<const Internal*>(h.p)->children.size();
    }
    NodeHandle child(NodeHandle h, size_t i) const {
        const Internal* v = static_cast<const Internal*>(h.p);
        if (i >= v->children.size()) throw std::out_of_range("BTree: child index");
        const Node* c = v->children[i];
        return {c, c->is_leaf};
    }
    /// Aggregate of the node's block span (leaf: its block; internal: merge
    /// over children). The span may differ from the physical subtree by
    /// fewer than b keys at each boundary.
    uint64_t access_node(NodeHandle h) const {
        require_aggregates();
        return node_agg(static_cast<const Node*>(h.p));
    }

    /// f over the satellite values of all keys in [lo, hi] (identity when empty).
    uint64_t range_aggregate(uint64_t lo, uint64_t hi) const {
        require_aggregates();
        return range_aggregate_by_rank(rank_lower(lo), rank_upper(hi));
    }

    /// f over the satellite values at in-order positions [i, j). Whole
    /// interior blocks come from cached aggregates (decomposed over maximal
    /// subtrees); only the two boundary blocks are eval-scanned.
    uint64_t range_aggregate_by_rank(size_t i, size_t j) const {
        require_aggregates();
        if (i >= j || i >= n_keys_) return agg_->identity;
        j = std::min(j, n_keys_);
        auto [lf0, ls0] = leaf_by_position(i);
        const Leaf* head = owner_of_position_const(lf0, ls0, i);
        int64_t hs = block_start_const(head);
        int64_t he = hs + static_cast<int64_t>(head->block.size);
        uint64_t acc;
        if (hs >= static_cast<int64_t>(i) && he <= static_cast<int64_t>(j))
            acc = head->block.aggregate;
        else
            acc = eval_positions(static_cast<int64_t>(i),
                                 std::min<size_t>(static_cast<size_t>(he), j) - i);
        size_t pos = std::min<size_t>(static_cast<size_t>(he), j);
        if (pos >= j) return acc;
        const Leaf* cur = head->next;
        const Leaf* run_first = nullptr;
        const Leaf* run_last = nullptr;
        while (cur && pos + cur->block.size <= j) {
            if (!run_first) run_first = cur;
            run_last = cur;
            pos += cur->block.size;
            cur = cur->next;
        }
        if (run_first) acc = agg_->merge(acc, aggregate_leaf_run(run_first, run_last));
        if (pos < j) acc = agg_->merge(acc, eval_positions(static_cast<int64_t>(pos), j - pos));
        return acc;
    }

    // ------------------------------------------------------------------
    // Introspection, checking, statistics

    TreeStats stats() const {
        TreeStats s;
        s.n_keys = n_keys_;
        s.n_leaves = n_leaves_;
        s.n_internal = n_internal_;
        s.height = height();
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next) {
            s.bits_leaves += lf->store.model_bits() + 4 * kWordBits;
            s.bits_keys += Storage::kCompressed ? lf->store.used_key_bits()
                                                : lf->store.capacity() * params_.k;
        }
        s.bits_internal = static_cast<uint64_t>(n_internal_) *
                          (params_.t * kWordBits + (params_.t - 1) * params_.k + 2 * kWordBits);
        s.bits_total = s.bits_leaves + s.bits_internal;
        s.occupancy_ratio = n_leaves_ ? static_cast<double>(n_keys_) /
                                            (static_cast<double>(n_leaves_) * static_cast<double>(params_.b))
                                      : 0.0;
        return s;
    }

    size_t height() const {
        size_t h = 1;
        for (const Node* n = root_; !n->is_leaf;
             n = static_cast<const Internal*>(n)->children.front())
            ++h;
        return h;
    }

    size_t leaf_count() const { return n_leaves_; }

    struct LeafView {
        size_t len;
        bool full;
        int64_t block_offset;
        size_t block_size;
        uint64_t block_aggregate;
    };
    template <class Fn>
    void for_each_leaf(Fn&& fn) const {
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next)
            fn(LeafView{lf->store.size(), lf->store.full(), lf->block.offset, lf->block.size,
                        lf->block.aggregate});
    }

    /// Fast check of the window property only: every q consecutive leaves
    /// contain at most two non-full leaves.
    bool window_property_ok() const {
        size_t window = params_.q;
        size_t nonfull = 0;
        std::vector<const Leaf*> ring(window, nullptr);
        size_t filled = 0, idx = 0;
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next) {
            if (filled == window) {
                if (!ring[idx]->store.full()) --nonfull;
            } else {
                ++filled;
            }
            ring[idx] = lf;
            if (!lf->store.full()) ++nonfull;
            idx = (idx + 1) % window;
            if (nonfull > 2) return false;
        }
        return true;
    }

    /// Full structural verification; returns the first violation found.
    InvariantReport check_invariants(bool deep_aggregates = true) const {
        InvariantReport rep;
        size_t depth = 0;
        size_t leaf_depth = 0;
        bool leaf_depth_set = false;
        size_t counted = 0;
        if (!check_node(root_, depth, leaf_depth, leaf_depth_set, counted, rep)) return rep;
        if (counted != n_keys_)
            return fail(rep, "key count mismatch: counted " + std::to_string(counted) +
                                 " stored " + std::to_string(n_keys_));
        size_t chain = 0;
        const Leaf* prev = nullptr;
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next) {
            ++chain;
            if (lf->prev != prev) return fail(rep, "leaf chain prev link broken");
            if (prev && prev->store.size() && lf->store.size() &&
                cmp_(lf->store.min_key(), prev->store.max_key()))
                return fail(rep, "leaf chain order violated");
            if (lf != root_ && lf->store.empty()) return fail(rep, "non-root empty leaf");
            prev = lf;
        }
        if (chain != n_leaves_) return fail(rep, "leaf count mismatch");
        if (!window_property_ok())
            return fail(rep, "window property: q consecutive leaves with >2 non-full");
        if (agg_ && !check_blocks(rep, deep_aggregates)) return rep;
        return rep;
    }

    const OpCounters& last_op() const { return last_op_; }
    const TotalCounters& totals() const { return totals_; }
    const FixStats& last_fix() const { return last_fix_; }
    void reset_counters() {
        totals_ = {};
        last_op_ = {};
        last_fix_ = {};
    }

    // ------------------------------------------------------------------
    // Test hooks

    /// Corrupts the first separator of the root (checker fault injection).
    bool debug_corrupt_separator() {
        if (root_->is_leaf) return false;
        static_cast<Internal*>(root_)->seps[0] ^= 1;
        return true;
    }

    /// Moves the boundary between leaf `index`'s block and its predecessor's
    /// by `delta` key slots, preserving tiling; both aggregates re-evaluated,
    /// then validity restored per the active mode.
    void debug_shift_block_boundary(size_t index, int64_t delta) {
        require_aggregates();
        begin_op();
        Leaf* lf = leaf_at(index);
        if (!lf || !lf->prev) return;
        Leaf* pr = lf->prev;
        if (delta > 0 && lf->block.size < static_cast<size_t>(delta)) return;
        if (delta < 0 && pr->block.size < static_cast<size_t>(-delta)) return;
        pr->block.size = static_cast<size_t>(static_cast<int64_t>(pr->block.size) + delta);
        lf->block.offset += delta;
        lf->block.size = static_cast<size_t>(static_cast<int64_t>(lf->block.size) - delta);
        reeval_block(pr);
        reeval_block(lf);
        refresh_agg_up(pr);
        refresh_agg_up(lf);
        touched_validity_check(pr);
        touched_validity_check(lf);
        post_op_block_maintenance();
        end_op();
    }

private:
    struct Internal;
    struct Node {
        Internal* parent = nullptr;
        bool is_leaf;
        explicit Node(bool leaf) : is_leaf(leaf) {}
    };
    struct Leaf final : Node {
        Storage store;
        Leaf* prev = nullptr;
        Leaf* next = nullptr;
        BlockDescriptor block;
        uint64_t epoch = 0;
        uint64_t center_tick = std::numeric_limits<uint64_t>::max();
        Leaf(size_t cap, unsigned kw, unsigned vw) : Node(true), store(cap, kw, vw) {}
    };
    // one above the degree cap: a node holds t+1 children transiently while
    // an overfull split propagates
    static constexpr size_t kMaxDegree = 32;
    struct Internal final : Node {
        InlineVec<Node*, kMaxDegree + 1> children;
        InlineVec<uint64_t, kMaxDegree + 1> seps;  // seps[i] = max key in children[i]'s subtree
        size_t count = 0;
        uint64_t agg = 0;
        Internal() : Node(false) {}
    };

    struct Descent {
        Leaf* leaf;
        size_t start;  // global rank of the leaf's first key
    };
    struct WindowHit {
        Leaf* leaf = nullptr;
        int dir = 0;      // -1 left, +1 right
        size_t dist = 0;  // chain length from origin to target
    };

    // --- construction/destruction

    Leaf* make_leaf() {
        unsigned vw = agg_ ? agg_->value_width : 0;
        Leaf* lf = new (leaf_pool_.allocate()) Leaf(params_.b, params_.k, vw);
        if (agg_) lf->block.aggregate = agg_->identity;
        ++n_leaves_;
        return lf;
    }

    Internal* make_internal() {
        ++n_internal_;
        return new (internal_pool_.allocate()) Internal();
    }

    void free_leaf(Leaf* lf) {
        lf->~Leaf();
        leaf_pool_.deallocate(lf);
    }

    void free_internal(Internal* v) {
        v->~Internal();
        internal_pool_.deallocate(v);
    }

    void destroy(Node* n) {
        if (!n->is_leaf) {
            Internal* v = static_cast<Internal*>(n);
            for (Node* c : v->children) destroy(c);
            v->~Internal();
        } else {
            static_cast<Leaf*>(n)->~Leaf();
        }
    }

    // --- basic navigation

    bool keys_equal(uint64_t a, uint64_t b) const { return !cmp_(a, b) && !cmp_(b, a); }

    size_t route_index(const Internal* v, uint64_t key) const {
        // first child whose subtree max is >= key, else the last child
        size_t lo = 0, hi = v->seps.size();
        while (lo < hi) {
            size_t mid = lo + (hi - lo) / 2;
            if (cmp_(v->seps[mid], key)) lo = mid + 1;
            else hi = mid;
        }
        return lo;
    }

    size_t route_index_upper(const Internal* v, uint64_t key) const {
        // first child whose subtree max is > key, else the last child
        size_t lo = 0, hi = v->seps.size();
        while (lo < hi) {
            size_t mid = lo + (hi - lo) / 2;
            if (cmp_(key, v->seps[mid])) hi = mid;
            else lo = mid + 1;
        }
        return lo;
    }

    struct ConstDescent {
        const Leaf* leaf;
        size_t start;
    };
    ConstDescent descend(uint64_t key) const {
        const Node* n = root_;
        size_t start = 0;
        while (!n->is_leaf) {
            const Internal* v = static_cast<const Internal*>(n);
            size_t idx = route_index(v, key);
            for (size_t i = 0; i < idx; ++i) start += count_of(v->children[i]);
            n = v->children[idx];
        }
        return {static_cast<const Leaf*>(n), start};
    }

    /// Routing descent without the rank accumulation (no sibling reads).
    const Leaf* descend_leaf(uint64_t key) const {
        const Node* n = root_;
        while (!n->is_leaf)
            n = static_cast<const Internal*>(n)
                    ->children[route_index(static_cast<const Internal*>(n), key)];
        return static_cast<const Leaf*>(n);
    }

    const Leaf* descend_upper(uint64_t key) const {
        const Node* n = root_;
        while (!n->is_leaf) n = static_cast<const Internal*>(n)->children[route_index_upper(
            static_cast<const Internal*>(n), key)];
        return static_cast<const Leaf*>(n);
    }

    Descent descend_mut(uint64_t key) {
        auto d = descend(key);
        return {const_cast<Leaf*>(d.leaf), d.start};
    }

    static size_t count_of(const Node* n) {
        return n->is_leaf ? static_cast<const Leaf*>(n)->store.size()
                          : static_cast<const Internal*>(n)->count;
    }

    std::pair<const Leaf*, size_t> leaf_by_position(size_t pos) const {
        const Node* n = root_;
        size_t start = 0;
        while (!n->is_leaf) {
            const Internal* v = static_cast<const Internal*>(n);
            size_t i = 0;
            for (; i + 1 < v->children.size(); ++i) {
                size_t c = count_of(v->children[i]);
                if (pos < start + c) break;
                start += c;
            }
            n = v->children[i];
        }
        return {static_cast<const Leaf*>(n), start};
    }

    size_t child_index(const Internal* p, const Node* c) const {
        for (size_t i = 0; i < p->children.size(); ++i)
            if (p->children[i] == c) return i;
        assert(false && "child not found in parent");
        return 0;
    }

    uint64_t subtree_max(const Node* n) const {
        while (!n->is_leaf) n = static_cast<const Internal*>(n)->children.back();
        return static_cast<const Leaf*>(n)->store.max_key();
    }

    /// Global rank of the leaf's first key, via parent-link walk.
    size_t leaf_start_of(const Leaf* lf) const {
        size_t start = 0;
        const Node* ch = lf;
        for (const Internal* p = ch->parent; p; p = ch->parent) {
            for (const Node* c : p->children) {
                if (c == ch) break;
                start += count_of(c);
            }
            ch = p;
        }
        return start;
    }

    /// Total keys in leaves from..to inclusive.
    size_t span_len(const Leaf* from, const Leaf* to) const {
        size_t s = 0;
        for (const Leaf* lf = from;; lf = lf->next) {
            s += lf->store.size();
            if (lf == to) break;
        }
        return s;
    }

    // --- bookkeeping walks

    void add_count_up(Node* n, int64_t delta) {
        for (Internal* p = n->parent; p; p = p->parent)
            p->count = static_cast<size_t>(static_cast<int64_t>(p->count) + delta);
    }

    void refresh_separators_up(Leaf* lf) {
        if (lf->store.empty()) return;
        uint64_t m = lf->store.max_key();
        Node* ch = lf;
        while (Internal* p = ch->parent) {
            size_t i = child_index(p, ch);
            if (i + 1 < p->children.size()) {
                p->seps[i] = m;
                return;
            }
            ch = p;
        }
    }

    uint64_t node_agg(const Node* n) const {
        return n->is_leaf ? static_cast<const Leaf*>(n)->block.aggregate
                          : static_cast<const Internal*>(n)->agg;
    }

    void recompute_agg(Internal* v) {
        uint64_t a = agg_->identity;
        for (Node* c : v->children) a = agg_->merge(a, node_agg(c));
        v->agg = a;
    }

    void refresh_agg_up(Node* n) {
        if (!agg_) return;
        for (Internal* p = n->parent; p; p = p->parent) recompute_agg(p);
    }

    // --- op instrumentation

    void begin_op() {
        ++epoch_;
        last_op_ = {};
        touched_.clear();
    }

    void end_op() {
        totals_.max_leaves_touched = std::max(totals_.max_leaves_touched, last_op_.leaves_touched);
    }

    void touch(Leaf* lf) {
        if (lf->epoch != epoch_) {
            lf->epoch = epoch_;
            ++last_op_.leaves_touched;
            touched_.push_back(lf);
        }
    }

    // --- sibling window

    WindowHit find_nonfull_in_window(Leaf* lf) const {
        Leaf* l = lf->prev;
        Leaf* r = lf->next;
        size_t dl = 1, dr = 1;
        size_t seen = 0;
        while (seen < params_.q && (l || r)) {
            if (l) {
                ++seen;
                if (!l->store.full()) return {l, -1, dl};
                l = l->prev;
                ++dl;
                if (seen == params_.q) break;
            }
            if (r) {
                ++seen;
                if (!r->store.full()) return {r, +1, dr};
                r = r->next;
                ++dr;
            }
        }
        return {};
    }

    // --- block (aggregate) bookkeeping
    //
    // Blocks are windows on the conceptual concatenation of all leaf
    // contents. Updates capture the old block start of every leaf in the
    // affected contiguous region, mutate the leaf arrays, then reassign
    // offsets so each block keeps its desired span: unchanged for spans
    // before the update position, shifted by one for spans after it.
    // Leaves outside the region shift automatically because their block
    // anchors (leaf start ranks) absorb the length change.

    struct BlockCtx {
        bool active = false;
        std::vector<Leaf*> leaves;          // contiguous region
        std::vector<int64_t> old_starts;    // block starts before mutation
        std::vector<int64_t> old_leaf_pos;  // leaf starts before mutation
        int64_t r = 0;                      // affected global position
        size_t owner_idx = 0;
        bool neutral = false;
    };

    int64_t block_start_of(const Leaf* lf, int64_t leaf_start) const {
        return leaf_start + lf->block.offset;
    }
    int64_t block_start_const(const Leaf* lf) const {
        return static_cast<int64_t>(leaf_start_of(lf)) + lf->block.offset;
    }

    /// Finds the block containing global position r (start <= r < end,
    /// skipping empty blocks), walking from a leaf with known start rank.
    Leaf* owner_of_position(Leaf* hint, size_t hint_start, size_t r) {
        Leaf* cur = hint;
        int64_t ls = static_cast<int64_t>(hint_start);
        int64_t pos = static_cast<int64_t>(r);
        while (pos < block_start_of(cur, ls)) {
            ls -= static_cast<int64_t>(cur->prev->store.size());
            cur = cur->prev;
        }
        while (pos >= block_start_of(cur, ls) + static_cast<int64_t>(cur->block.size)) {
            ls += static_cast<int64_t>(cur->store.size());
            cur = cur->next;
        }
        return cur;
    }
    const Leaf* owner_of_position_const(const Leaf* hint, size_t hint_start, size_t r) const {
        return const_cast<BTree*>(this)->owner_of_position(const_cast<Leaf*>(hint), hint_start, r);
    }

    /// Captures block state for the contiguous leaf range [a, b], extended so
    /// it covers the block owning position r. For insertion the owner is the
    /// leftmost block with start <= r <= end (a key may be appended at a
    /// block boundary); for removal the element at r lies strictly inside.
    BlockCtx capture_region(Leaf* a, Leaf* b, size_t a_start, size_t r, bool for_insert) {
        BlockCtx ctx;
        if (!agg_) return ctx;
        ctx.active = true;
        ctx.r = static_cast<int64_t>(r);
        int64_t ls = static_cast<int64_t>(a_start);
        while (block_start_of(a, ls) > ctx.r && a->prev) {
            ls -= static_cast<int64_t>(a->prev->store.size());
            a = a->prev;
        }
        {
            int64_t bs = ls;
            for (Leaf* x = a; x != b; x = x->next) bs += static_cast<int64_t>(x->store.size());
            while (b->next) {
                int64_t end = block_start_of(b, bs) + static_cast<int64_t>(b->block.size);
                if (for_insert ? end >= ctx.r : end > ctx.r) break;
                bs += static_cast<int64_t>(b->store.size());
                b = b->next;
            }
        }
        int64_t pos = ls;
        for (Leaf* x = a;; x = x->next) {
            ctx.leaves.push_back(x);
            ctx.old_leaf_pos.push_back(pos);
            ctx.old_starts.push_back(block_start_of(x, pos));
            pos += static_cast<int64_t>(x->store.size());
            if (x == b) break;
        }
        ctx.owner_idx = ctx.leaves.size() - 1;
        for (size_t i = 0; i < ctx.leaves.size(); ++i) {
            int64_t e = ctx.old_starts[i] + static_cast<int64_t>(ctx.leaves[i]->block.size);
            if (for_insert ? ctx.r <= e : ctx.r < e) {
                ctx.owner_idx = i;
                break;
            }
        }
        return ctx;
    }

    void apply_blocks_common(BlockCtx& ctx, int dir) {
        int64_t pos = ctx.old_leaf_pos.front();
        for (size_t i = 0; i < ctx.leaves.size(); ++i) {
            Leaf* x = ctx.leaves[i];
            int64_t desired = ctx.old_starts[i];
            if (dir > 0 && (desired > ctx.r || (desired == ctx.r && i > ctx.owner_idx))) desired += 1;
            if (dir < 0 && desired > ctx.r) desired -= 1;
            x->block.offset = desired - pos;
            pos += static_cast<int64_t>(x->store.size());
        }
        for (Leaf* x : ctx.leaves) touched_validity_check(x);
    }

    void apply_blocks_insert(BlockCtx& ctx, uint64_t value) {
        if (!ctx.active) return;
        Leaf* owner = ctx.leaves[ctx.owner_idx];
        owner->block.size += 1;
        owner->block.aggregate = agg_->merge(owner->block.aggregate, value);
        ++last_op_.block_merges;
        apply_blocks_common(ctx, +1);
        refresh_agg_up(owner);
    }

    void apply_blocks_remove(BlockCtx& ctx, uint64_t removed_value) {
        if (!ctx.active) return;
        Leaf* owner = ctx.leaves[ctx.owner_idx];
        assert(owner->block.size > 0);
        owner->block.size -= 1;
        apply_blocks_common(ctx, -1);
        if (auto hint = agg_->remove_hint(owner->block.aggregate, removed_value))
            owner->block.aggregate = owner->block.size ? *hint : agg_->identity;
        else
            reeval_block(owner);
        refresh_agg_up(owner);
    }

    void apply_blocks_neutral(BlockCtx& ctx) {
        if (!ctx.active) return;
        ctx.r = std::numeric_limits<int64_t>::max();
        apply_blocks_common(ctx, 0);
    }

    /// Recomputes a block's cached aggregate from its contents.
    void reeval_block(Leaf* lf) {
        lf->block.aggregate = eval_positions(block_start_const(lf), lf->block.size);
        ++last_op_.block_evals;
    }

    /// Evaluates f over global value positions [start, start+count).
    uint64_t eval_positions(int64_t start, size_t count) const {
        uint64_t acc = agg_->identity;
        if (count == 0) return acc;
        assert(start >= 0);
        auto [lf, ls] = leaf_by_position(static_cast<size_t>(start));
        size_t local = static_cast<size_t>(start) - ls;
        for (const Leaf* cur = lf; count > 0; cur = cur->next) {
            size_t take = std::min(count, cur->store.size() - local);
            acc = agg_->merge(acc, agg_->eval_slice(cur->store.values(), local, take));
            count -= take;
            local = 0;
        }
        return acc;
    }

    void touched_validity_check(Leaf* lf) {
        if (!agg_) return;
        if (std::find(dirty_blocks_.begin(), dirty_blocks_.end(), lf) == dirty_blocks_.end())
            dirty_blocks_.push_back(lf);
    }

    void post_op_block_maintenance() {
        if (!agg_) {
            dirty_blocks_.clear();
            return;
        }
        size_t guard = 0;
        while (!dirty_blocks_.empty()) {
            if (++guard > 64 + 4 * params_.q) {
                assert(false && "block maintenance did not settle");
                dirty_blocks_.clear();
                break;
            }
            Leaf* lf = dirty_blocks_.back();
            dirty_blocks_.pop_back();
            if (validate_block(lf->block, params_.b).valid) continue;
            if (mode_ == AggregateMode::kMerge) fix_invalid_block(lf);
            else batch_rebalance_around(lf);
        }
    }

    // --- rotation / split / repair

    std::vector<Leaf*> chain_between(Leaf* from, const WindowHit& hit) {
        std::vector<Leaf*> chain;
        chain.push_back(from);
        Leaf* cur = from;
        for (size_t i = 0; i < hit.dist; ++i) {
            cur = hit.dir > 0 ? cur->next : cur->prev;
            chain.push_back(cur);
        }
        assert(chain.back() == hit.leaf);
        return chain;
    }

    void rotate_insert(Leaf* lf, size_t leaf_start, size_t rank, uint64_t key, uint64_t value,
                       const WindowHit& hit, size_t r_global) {
        auto chain = chain_between(lf, hit);
        size_t d = hit.dist;
        Leaf* region_a = hit.dir < 0 ? chain.back() : lf;
        Leaf* region_b = hit.dir < 0 ? lf : chain.back();
        size_t region_a_start =
            hit.dir < 0 ? leaf_start - (span_len(chain.back(), lf) - lf->store.size()) : leaf_start;
        BlockCtx ctx = capture_region(region_a, region_b, region_a_start, r_global,
                                      /*for_insert=*/true);

        for (Leaf* c : chain) touch(c);
        if (hit.dir > 0) {
            for (size_t g = d - 1; g >= 1; --g) {
                auto kv = chain[g]->store.pop_back();
                chain[g + 1]->store.push_front(kv.first, kv.second);
            }
            if (rank == lf->store.size()) {
                chain[1]->store.push_front(key, value);
            } else {
                auto kv = lf->store.pop_back();
                chain[1]->store.push_front(kv.first, kv.second);
                lf->store.insert_at(rank, key, value);
            }
            for (size_t g = 1; g < d; ++g) refresh_separators_up(chain[g]);
            refresh_separators_up(lf);
        } else {
            for (size_t g = d - 1; g >= 1; --g) {
                auto kv = chain[g]->store.pop_front();
                chain[g + 1]->store.push_back(kv.first, kv.second);
            }
            if (rank == 0) {
                chain[1]->store.push_back(key, value);
            } else {
                auto kv = lf->store.pop_front();
                chain[1]->store.push_back(kv.first, kv.second);
                lf->store.insert_at(rank - 1, key, value);
            }
            for (size_t g = 1; g <= d; ++g) refresh_separators_up(chain[g]);
            refresh_separators_up(lf);
        }
        add_count_up(hit.leaf, +1);
        ++n_keys_;
        apply_blocks_insert(ctx, value);
    }

    /// Pulls one key along the chain from a non-full donor so the source
    /// leaf is full again after a deletion.
    void pull_one_key(Leaf* lf, const WindowHit& hit) {
        auto chain = chain_between(lf, hit);
        for (Leaf* c : chain) touch(c);
        if (hit.dir > 0) {
            for (size_t g = 1; g <= hit.dist; ++g) {
                auto kv = chain[g]->store.pop_front();
                chain[g - 1]->store.push_back(kv.first, kv.second);
            }
            for (size_t g = 0; g < hit.dist; ++g) refresh_separators_up(chain[g]);
        } else {
            for (size_t g = 1; g <= hit.dist; ++g) {
                auto kv = chain[g]->store.pop_back();
                chain[g - 1]->store.push_front(kv.first, kv.second);
            }
            for (size_t g = 1; g <= hit.dist; ++g)
                if (!chain[g]->store.empty()) refresh_separators_up(chain[g]);
        }
    }

    void split_insert(Leaf* lf, size_t leaf_start, size_t rank, uint64_t key, uint64_t value) {
        touch(lf);
        // pre-split block span, for the merge-mode pair reset
        int64_t old_start = static_cast<int64_t>(leaf_start) + lf->block.offset;
        int64_t old_end = old_start + static_cast<int64_t>(lf->block.size);
        int64_t r_pos = static_cast<int64_t>(leaf_start + rank);
        size_t b = params_.b;
        size_t left_target = (b + 1) / 2;  // ceil(b/2); right gets floor(b/2)+1 with the new key
        Leaf* right = make_leaf();
        touch(right);
        right->next = lf->next;
        if (right->next) right->next->prev = right;
        right->prev = lf;
        lf->next = right;

        Leaf* receiver;
        if (rank >= left_target) {
            bulk_move_tail(lf, right, b - left_target);
            right->store.insert_at(rank - left_target, key, value);
            receiver = right;
        } else {
            bulk_move_tail(lf, right, b - left_target + 1);
            lf->store.insert_at(rank, key, value);
            receiver = lf;
        }
        Internal* attach_parent = attach_right_sibling(lf, right);
        if (attach_parent) {
            // a pre-existing parent: its counts predate the new key
            add_count_up(receiver, +1);
            split_internal_up(attach_parent);
        }
        ++n_keys_;
        refresh_separators_up(lf);
        refresh_separators_up(right);

        if (agg_) {
            if (mode_ == AggregateMode::kBatch) {
                auto group = window_group(lf, right);
                reset_blocks_group(group.front(), group.back(), {lf, right}, /*growth=*/1);
            } else if (!split_block_pair(lf, right, old_start, old_end, r_pos, value)) {
                reset_blocks_group(lf, right, {lf, right}, /*growth=*/1);
            }
        }
        repair_window_around(lf);
    }

    /// Merge-mode split reset: the old block span splits between the two new
    /// leaves near their content boundary, so only these two blocks
    /// re-evaluate. When the new key's position falls outside the old span
    /// it belongs to a neighbor block, which absorbs it with one
    /// constant-time merge. Falls back (to a group reset) only when a
    /// resulting block would be invalid.
    bool split_block_pair(Leaf* lf, Leaf* right, int64_t old_start, int64_t old_end,
                          int64_t r_pos, uint64_t value) {
        int64_t gs = static_cast<int64_t>(leaf_start_of(lf));
        int64_t gm = gs + static_cast<int64_t>(lf->store.size());
        int64_t new_end = old_end + 1;
        Leaf* absorber = nullptr;
        int absorber_side = 0;
        if (r_pos < old_start) {
            // the key joined the preceding block; the pair's span shifts whole
            if (!lf->prev) return false;
            absorber = lf->prev;
            absorber_side = -1;
            old_start += 1;
        } else if (r_pos > old_end) {
            if (!right->next) return false;
            absorber = right->next;
            absorber_side = +1;
            new_end -= 1;
        }
        // feasible split points keeping both halves valid; prefer the
        // content boundary gm
        const int64_t b = static_cast<int64_t>(params_.b);
        int64_t lo = std::max<int64_t>({old_start, gm - b + 1, new_end - 2 * b});
        int64_t hi = std::min<int64_t>({new_end, gm + b - 1, old_start + 2 * b, gs + 2 * b});
        if (lo > hi) return false;
        int64_t mid = std::clamp(gm, lo, hi);
        BlockDescriptor b1{old_start - gs, static_cast<size_t>(mid - old_start), 0};
        BlockDescriptor b2{mid - gm, static_cast<size_t>(new_end - mid), 0};
        if (!validate_block(b1, params_.b).valid || !validate_block(b2, params_.b).valid)
            return false;
        if (absorber) {
            touch(absorber);
            absorber->block.size += 1;
            if (absorber_side > 0) absorber->block.offset -= 1;
            absorber->block.aggregate = absorber_side < 0
                                            ? agg_->merge(absorber->block.aggregate, value)
                                            : agg_->merge(value, absorber->block.aggregate);
            ++last_op_.block_merges;
            refresh_agg_up(absorber);
            touched_validity_check(absorber);
        }
        lf->block = b1;
        right->block = b2;
        lf->block.aggregate = eval_positions(old_start, lf->block.size);
        right->block.aggregate = eval_positions(mid, right->block.size);
        last_op_.block_evals += 2;
        refresh_agg_up(lf);
        refresh_agg_up(right);
        touched_validity_check(lf);
        touched_validity_check(right);
        return true;
    }

    void bulk_move_tail(Leaf* from, Leaf* to, size_t count) {
        for (size_t i = 0; i < count; ++i) {
            auto kv = from->store.pop_back();
            to->store.push_front(kv.first, kv.second);
        }
    }

    /// Contiguous run spanning the q-window around a freshly split pair.
    std::vector<Leaf*> window_group(Leaf* lf, Leaf* right) {
        Leaf* a = lf;
        Leaf* b = right;
        size_t half = params_.q / 2 + 1;
        for (size_t i = 0; i < half && a->prev; ++i) a = a->prev;
        for (size_t i = 0; i < half && b->next; ++i) b = b->next;
        std::vector<Leaf*> g;
        for (Leaf* x = a;; x = x->next) {
            g.push_back(x);
            if (x == b) break;
        }
        return g;
    }

    /// Inserts `right` after `lf` under its parent (creating a new root when
    /// lf was the root). Returns the pre-existing parent, or nullptr when a
    /// fresh root was created with counts already consistent.
    Internal* attach_right_sibling(Leaf* lf, Leaf* right) {
        if (lf == root_) {
            Internal* r = make_internal();
            r->children = {lf, right};
            r->seps = {lf->store.max_key()};
            r->count = lf->store.size() + right->store.size();
            lf->parent = r;
            right->parent = r;
            if (agg_) recompute_agg(r);
            root_ = r;
            return nullptr;
        }
        Internal* p = lf->parent;
        size_t i = child_index(p, lf);
        p->children.insert(p->children.begin() + static_cast<std::ptrdiff_t>(i) + 1, right);
        p->seps.insert(p->seps.begin() + static_cast<std::ptrdiff_t>(i), lf->store.max_key());
        right->parent = p;
        return p;
    }

    void split_internal_up(Internal* v) {
        while (v && v->children.size() > params_.t) {
            size_t c = v->children.size();
            size_t keep = (c + 1) / 2;
            Internal* right = make_internal();
            right->children.assign(v->children.begin() + static_cast<std::ptrdiff_t>(keep),
                                   v->children.end());
            v->children.resize(keep);
            uint64_t promoted = v->seps[keep - 1];
            right->seps.assign(v->seps.begin() + static_cast<std::ptrdiff_t>(keep), v->seps.end());
            v->seps.resize(keep - 1);
            for (Node* ch : right->children) ch->parent = right;
            size_t rc = 0;
            for (Node* ch : right->children) rc += count_of(ch);
            right->count = rc;
            v->count -= rc;
            if (agg_) {
                recompute_agg(v);
                recompute_agg(right);
            }
            if (v == root_) {
                Internal* nr = make_internal();
                nr->children = {v, right};
                nr->seps = {promoted};
                nr->count = v->count + right->count;
                v->parent = nr;
                right->parent = nr;
                if (agg_) recompute_agg(nr);
                root_ = nr;
                return;
            }
            Internal* p = v->parent;
            size_t i = child_index(p, v);
            p->children.insert(p->children.begin() + static_cast<std::ptrdiff_t>(i) + 1, right);
            p->seps.insert(p->seps.begin() + static_cast<std::ptrdiff_t>(i), promoted);
            right->parent = p;
            v = p;
        }
    }

    void remove_leaf(Leaf* lf) {
        assert(lf->store.empty() && lf != root_);
        if (agg_) {
            // hand the block over before unlinking; the dead leaf is empty so
            // no leaf start rank changes
            if (lf->prev) {
                lf->prev->block.size += lf->block.size;
                lf->prev->block.aggregate =
                    agg_->merge(lf->prev->block.aggregate, lf->block.aggregate);
                touched_validity_check(lf->prev);
                refresh_agg_up(lf->prev);
            } else if (lf->next) {
                lf->next->block.offset -= static_cast<int64_t>(lf->block.size);
                lf->next->block.size += lf->block.size;
                lf->next->block.aggregate =
                    agg_->merge(lf->block.aggregate, lf->next->block.aggregate);
                touched_validity_check(lf->next);
                refresh_agg_up(lf->next);
            }
        }
        if (lf->prev) lf->prev->next = lf->next;
        else first_leaf_ = lf->next;
        if (lf->next) lf->next->prev = lf->prev;
        --n_leaves_;

        Internal* p = lf->parent;
        size_t i = child_index(p, lf);
        p->children.erase(p->children.begin() + static_cast<std::ptrdiff_t>(i));
        if (i < p->seps.size()) p->seps.erase(p->seps.begin() + static_cast<std::ptrdiff_t>(i));
        else p->seps.pop_back();
        scrub_removed(lf);
        free_leaf(lf);
        if (agg_) for (Internal* a = p; a; a = a->parent) recompute_agg(a);
        refresh_separators_from(p);
        rebalance_internal_up(p);
    }

    void scrub_removed(Leaf* lf) {
        dirty_blocks_.erase(std::remove(dirty_blocks_.begin(), dirty_blocks_.end(), lf),
                            dirty_blocks_.end());
        touched_.erase(std::remove(touched_.begin(), touched_.end(), lf), touched_.end());
    }

    void refresh_separators_from(Internal* v) {
        if (v->children.empty()) return;
        Node* ch = v;
        uint64_t m = subtree_max(v);
        while (Internal* p = ch->parent) {
            size_t i = child_index(p, ch);
            if (i + 1 < p->children.size()) {
                p->seps[i] = m;
                return;
            }
            ch = p;
        }
    }

    void rebalance_internal_up(Internal* v) {
        while (v) {
            if (v == root_) {
                if (v->children.size() == 1) {
                    root_ = v->children.front();
                    root_->parent = nullptr;
                    --n_internal_;
                    free_internal(v);
                }
                return;
            }
            size_t min_deg = (params_.t + 1) / 2;
            if (v->children.size() >= min_deg) return;
            Internal* p = v->parent;
            size_t i = child_index(p, v);
            Internal* left = i > 0 ? static_cast<Internal*>(p->children[i - 1]) : nullptr;
            Internal* right =
                i + 1 < p->children.size() ? static_cast<Internal*>(p->children[i + 1]) : nullptr;
            if (left && left->children.size() > min_deg) {
                Node* moved = left->children.back();
                left->children.pop_back();
                uint64_t moved_max = p->seps[i - 1];
                left->seps.pop_back();
                v->children.insert(v->children.begin(), moved);
                v->seps.insert(v->seps.begin(), moved_max);
                moved->parent = v;
                size_t c = count_of(moved);
                left->count -= c;
                v->count += c;
                p->seps[i - 1] = subtree_max(left);
                if (agg_) {
                    recompute_agg(left);
                    recompute_agg(v);
                }
                return;
            }
            if (right && right->children.size() > min_deg) {
                Node* moved = right->children.front();
                right->children.erase(right->children.begin());
                uint64_t old_v_max = p->seps[i];
                right->seps.erase(right->seps.begin());
                v->children.push_back(moved);
                v->seps.push_back(old_v_max);
                moved->parent = v;
                size_t c = count_of(moved);
                right->count -= c;
                v->count += c;
                p->seps[i] = subtree_max(moved);
                if (agg_) {
                    recompute_agg(right);
                    recompute_agg(v);
                }
                return;
            }
            if (left) {
                left->seps.push_back(p->seps[i - 1]);
                for (Node* ch : v->children) ch->parent = left;
                left->children.insert(left->children.end(), v->children.begin(), v->children.end());
                left->seps.insert(left->seps.end(), v->seps.begin(), v->seps.end());
                left->count += v->count;
                p->children.erase(p->children.begin() + static_cast<std::ptrdiff_t>(i));
                p->seps.erase(p->seps.begin() + static_cast<std::ptrdiff_t>(i) - 1);
                if (agg_) recompute_agg(left);
                --n_internal_;
                free_internal(v);
            } else {
                assert(right);
                v->seps.push_back(p->seps[i]);
                for (Node* ch : right->children) ch->parent = v;
                v->children.insert(v->children.end(), right->children.begin(),
                                   right->children.end());
                v->seps.insert(v->seps.end(), right->seps.begin(), right->seps.end());
                v->count += right->count;
                p->children.erase(p->children.begin() + static_cast<std::ptrdiff_t>(i) + 1);
                p->seps.erase(p->seps.begin() + static_cast<std::ptrdiff_t>(i));
                if (agg_) recompute_agg(v);
                --n_internal_;
                free_internal(right);
            }
            v = p;
        }
    }

    // --- window-property repair
    //
    // A split (or a deletion turning a full leaf non-full, or a leaf removal
    // contracting the chain) can leave a q-consecutive window with three
    // non-full leaves even though the alternating search window was full.
    // Restore the property eagerly by rotating keys from the nearest other
    // non-full leaf into the fullest one.

    void repair_window_around(Leaf* center) {
        Leaf* anchor = center;
        size_t guard = 0;
        while (anchor) {
            auto v = find_violation_near(anchor);
            if (!v.first) break;
            anchor = rotate_repair(v.first, v.second);
            ++totals_.repairs;
            if (++guard > 8 * params_.b + 4 * params_.q) {
                assert(false && "window repair did not converge");
                break;
            }
        }
    }

    /// Scans the q-windows within 3q leaves of the anchor; on the first
    /// window holding three or more non-full leaves returns (source, target):
    /// the fullest non-full leaf to fill and its nearest non-full peer.
    std::pair<Leaf*, Leaf*> find_violation_near(Leaf* anchor) {
        std::vector<Leaf*> run;
        size_t radius = 3 * params_.q;
        Leaf* a = anchor;
        for (size_t i = 0; i < radius && a->prev; ++i) a = a->prev;
        Leaf* b = anchor;
        for (size_t i = 0; i < radius && b->next; ++i) b = b->next;
        for (Leaf* x = a;; x = x->next) {
            run.push_back(x);
            if (x == b) break;
        }
        size_t w = std::min<size_t>(params_.q, run.size());
        size_t nonfull = 0;
        size_t lo = 0;
        for (size_t hi = 0; hi < run.size(); ++hi) {
            if (!run[hi]->store.full()) ++nonfull;
            if (hi - lo + 1 > w) {
                if (!run[lo]->store.full()) --nonfull;
                ++lo;
            }
            if (hi - lo + 1 == w && nonfull > 2) {
                // repair the closest pair of non-full leaves so the whole
                // rotation stays inside this window; fill the fuller one
                std::vector<size_t> nf;
                for (size_t j = lo; j <= hi; ++j)
                    if (!run[j]->store.full()) nf.push_back(j);
                size_t best_a = nf[0], best_b = nf[1];
                for (size_t x = 0; x + 1 < nf.size(); ++x)
                    if (nf[x + 1] - nf[x] < best_b - best_a) {
                        best_a = nf[x];
                        best_b = nf[x + 1];
                    }
                size_t target = run[best_a]->store.size() >= run[best_b]->store.size() ? best_a
                                                                                       : best_b;
                size_t source = target == best_a ? best_b : best_a;
                return {run[source], run[target]};
            }
        }
        return {nullptr, nullptr};
    }

    /// Rotates one key from source into target through the leaves between
    /// them (end operations only; block spans preserved). Returns a
    /// surviving leaf near the action for re-anchoring.
    Leaf* rotate_repair(Leaf* source, Leaf* target) {
        std::vector<Leaf*> chain;
        bool rightward = false;
        for (Leaf* x = source; x; x = x->next) {
            chain.push_back(x);
            if (x == target) {
                rightward = true;
                break;
            }
            if (chain.size() > 4 * params_.q) break;
        }
        if (!rightward) {
            chain.clear();
            for (Leaf* x = source; x; x = x->prev) {
                chain.push_back(x);
                if (x == target) break;
            }
        }
        assert(chain.back() == target);
        Leaf* region_a = rightward ? source : target;
        Leaf* region_b = rightward ? target : source;
        BlockCtx ctx;
        if (agg_) {
            size_t a_start = leaf_start_of(region_a);
            ctx = capture_region(region_a, region_b, a_start, a_start, /*for_insert=*/true);
        }
        size_t d = chain.size() - 1;
        if (rightward) {
            // each leaf passes its max to the next
            for (size_t g = d; g >= 1; --g) {
                touch(chain[g - 1]);
                touch(chain[g]);
                auto kv = chain[g - 1]->store.pop_back();
                chain[g]->store.push_front(kv.first, kv.second);
            }
            for (size_t g = 0; g < d; ++g)
                if (!chain[g]->store.empty()) refresh_separators_up(chain[g]);
        } else {
            for (size_t g = d; g >= 1; --g) {
                touch(chain[g - 1]);
                touch(chain[g]);
                auto kv = chain[g - 1]->store.pop_front();
                chain[g]->store.push_back(kv.first, kv.second);
            }
            for (size_t g = 1; g <= d; ++g) refresh_separators_up(chain[g]);
        }
        add_count_up(source, -1);
        add_count_up(target, +1);
        apply_blocks_neutral(ctx);
        if (source->store.empty() && source != root_) remove_leaf(source);
        return target;
    }

    // --- aggregate maintenance: batch reset and merge-mode revalidation

    /// Resets every block in the contiguous group [first, last] to exactly
    /// its leaf's contents (offset 0, size = len, full re-evaluation) and
    /// adjusts the two blocks outside the group so the global tiling is
    /// preserved. `growth` is the number of keys the global array gained
    /// inside the group since the captured descriptors were last consistent
    /// (1 right after a split insert, else 0).
    void reset_blocks_group(Leaf* first, Leaf* last, std::vector<Leaf*> centers, int growth) {
        assert(agg_);
        ++totals_.batch_rebalances;
        for (Leaf* c : centers) {
            if (c->center_tick != std::numeric_limits<uint64_t>::max()) {
                uint64_t gap = tick_ - c->center_tick;
                totals_.min_rebalance_gap = std::min(totals_.min_rebalance_gap, gap);
            }
        }
        size_t guard = 0;
        while (true) {
            if (++guard > 8) {
                first = first_leaf_;
                last = first_leaf_;
                while (last->next) last = last->next;
            }
            int64_t gs = static_cast<int64_t>(leaf_start_of(first));
            int64_t e_left = gs + first->block.offset;
            int64_t sizes = 0;
            int64_t lens = 0;
            for (Leaf* x = first;; x = x->next) {
                sizes += static_cast<int64_t>(x->block.size);
                lens += static_cast<int64_t>(x->store.size());
                if (x == last) break;
            }
            int64_t e_right = e_left + sizes;
            int64_t ge = gs + lens;
            Leaf* prev = first->prev;
            Leaf* next = last->next;
            if (prev &&
                static_cast<int64_t>(prev->block.size) + (gs - e_left) < 0) {
                first = prev;
                continue;
            }
            if (next &&
                static_cast<int64_t>(next->block.size) + (e_right + growth - ge) < 0) {
                last = next;
                continue;
            }
            for (Leaf* x = first;; x = x->next) {
                touch(x);
                x->block.offset = 0;
                x->block.size = x->store.size();
                x->block.aggregate = agg_->eval_slice(x->store.values(), 0, x->store.size());
                ++last_op_.block_evals;
                refresh_agg_up(x);
                if (x == last) break;
            }
            if (prev) {
                prev->block.size =
                    static_cast<size_t>(static_cast<int64_t>(prev->block.size) + (gs - e_left));
                reeval_block(prev);
                refresh_agg_up(prev);
                touched_validity_check(prev);
            }
            if (next) {
                next->block.offset = 0;
                next->block.size = static_cast<size_t>(static_cast<int64_t>(next->block.size) +
                                                       (e_right + growth - ge));
                reeval_block(next);
                refresh_agg_up(next);
                touched_validity_check(next);
            }
            break;
        }
        for (Leaf* c : centers) c->center_tick = tick_;
    }

    /// Batch-mode reaction to an invalid block: rebalance its q-window group,
    /// widened until it covers the whole block span.
    void batch_rebalance_around(Leaf* lf) {
        auto group = window_group(lf, lf);
        Leaf* first = group.front();
        Leaf* last = group.back();
        int64_t start = block_start_const(lf);
        int64_t end = start + static_cast<int64_t>(lf->block.size);
        while (block_start_const(first) > start && first->prev) first = first->prev;
        while (block_start_const(last) + static_cast<int64_t>(last->block.size) < end &&
               last->next)
            last = last->next;
        reset_blocks_group(first, last, {lf}, /*growth=*/0);
    }

    struct SpanRef {
        int64_t start;
        size_t size;
        uint64_t agg;
    };

    bool span_valid_for(int64_t leaf_start, const SpanRef& s) const {
        BlockDescriptor d;
        d.offset = s.start - leaf_start;
        d.size = s.size;
        return validate_block(d, params_.b).valid;
    }

    /// Merge-mode revalidation: try the leftward merge/swap cascade, then the
    /// mirrored rightward one; if neither reaches an all-valid configuration
    /// within q blocks, locally reset the neighborhood. Visits count
    /// distinct blocks examined.
    void fix_invalid_block(Leaf* lf) {
        assert(agg_ && mode_ == AggregateMode::kMerge);
        ++totals_.fix_invocations;
        last_fix_ = {};
        std::vector<const Leaf*> visited;
        auto visit = [&](const Leaf* x) {
            if (std::find(visited.begin(), visited.end(), x) == visited.end()) visited.push_back(x);
        };
        visit(lf);
        int64_t lf_start = static_cast<int64_t>(leaf_start_of(lf));
        SpanRef own{lf_start + lf->block.offset, lf->block.size, lf->block.aggregate};

        bool done = try_cascade(lf, lf_start, own, /*leftward=*/true, visit);
        if (done) last_fix_.phase = 1;
        if (!done && (done = try_cascade(lf, lf_start, own, /*leftward=*/false, visit)))
            last_fix_.phase = 2;
        if (!done && (done = try_boundary_rebalance(lf, visit))) last_fix_.phase = 3;
        if (!done) {
            last_fix_.phase = 4;
            Leaf* first = lf;
            int64_t fs = lf_start;
            while (fs > own.start && first->prev) {
                fs -= static_cast<int64_t>(first->prev->store.size());
                first = first->prev;
            }
            Leaf* last = lf;
            int64_t le = lf_start + static_cast<int64_t>(lf->store.size());
            while (le < own.start + static_cast<int64_t>(own.size) && last->next) {
                last = last->next;
                le += static_cast<int64_t>(last->store.size());
            }
            if (first->prev) first = first->prev;
            if (last->next) last = last->next;
            for (const Leaf* x = first;; x = x->next) {
                visit(x);
                if (x == last) break;
            }
            reset_blocks_group(first, last, {lf}, /*growth=*/0);
        }
        last_fix_.visited = visited.size();
        totals_.max_fix_visited = std::max(totals_.max_fix_visited, last_fix_.visited);
    }

    /// Rebalances the invalid block with one neighbor by moving the block
    /// boundary: the donated span's aggregate merges into the receiver, the
    /// donor's remainder is re-evaluated (two full evaluations). The chosen
    /// shift keeps the neighbor valid.
    template <class Visit>
    bool try_boundary_rebalance(Leaf* lf, Visit&& visit) {
        const int64_t b = static_cast<int64_t>(params_.b);
        const int64_t off = lf->block.offset;
        const int64_t size = static_cast<int64_t>(lf->block.size);
        int64_t lf_start = static_cast<int64_t>(leaf_start_of(lf));
        int64_t s = lf_start + off;

        // donate a leading span to the predecessor: fixes offset <= -b and
        // oversize when offset + size is already within bounds
        if (lf->prev && off + size <= 2 * b) {
            Leaf* pr = lf->prev;
            visit(pr);
            int64_t lo = std::max<int64_t>({1, size - 2 * b, (-b + 1) - off});
            int64_t hi = std::min<int64_t>(
                {size, (b - 1) - off,
                 2 * b - static_cast<int64_t>(pr->block.size),
                 2 * b - pr->block.offset - static_cast<int64_t>(pr->block.size)});
            if (lo <= hi) {
                int64_t d = std::clamp<int64_t>(-off, lo, hi);
                pr->block.size += static_cast<size_t>(d);
                pr->block.aggregate =
                    agg_->merge(pr->block.aggregate, eval_positions(s, static_cast<size_t>(d)));
                ++last_op_.block_merges;
                lf->block.offset += d;
                lf->block.size -= static_cast<size_t>(d);
                reeval_block(lf);
                ++last_op_.block_evals;  // the donated-span evaluation above
                refresh_agg_up(pr);
                refresh_agg_up(lf);
                touch(pr);
                touch(lf);
                touched_validity_check(pr);
                return true;
            }
        }
        // donate a trailing span to the successor: fixes oversize and
        // offset + size > 2b
        if (lf->next && off > -b && off < b) {
            Leaf* nx = lf->next;
            visit(nx);
            int64_t lo = std::max<int64_t>({1, size - 2 * b, off + size - 2 * b});
            int64_t hi = std::min<int64_t>(
                {size, b + nx->block.offset - 1,
                 2 * b - static_cast<int64_t>(nx->block.size)});
            if (lo <= hi) {
                // leave slack: aim the block back at ~b keys so the next
                // overflow is at least b insertions away
                int64_t d = std::clamp<int64_t>(size - b, lo, hi);
                nx->block.offset -= d;
                nx->block.size += static_cast<size_t>(d);
                nx->block.aggregate = agg_->merge(
                    eval_positions(s + size - d, static_cast<size_t>(d)), nx->block.aggregate);
                ++last_op_.block_merges;
                lf->block.size -= static_cast<size_t>(d);
                reeval_block(lf);
                ++last_op_.block_evals;
                refresh_agg_up(nx);
                refresh_agg_up(lf);
                touch(nx);
                touch(lf);
                touched_validity_check(nx);
                return true;
            }
        }
        // take the predecessor's trailing span: fixes offset >= b
        if (lf->prev && off >= b && off + size <= 2 * b) {
            Leaf* pr = lf->prev;
            visit(pr);
            int64_t lo = std::max<int64_t>(1, off - (b - 1));
            int64_t hi = std::min<int64_t>({static_cast<int64_t>(pr->block.size),
                                            2 * b - size, off + b - 1});
            if (lo <= hi) {
                int64_t d = std::clamp<int64_t>(off, lo, hi);
                pr->block.size -= static_cast<size_t>(d);
                reeval_block(pr);
                lf->block.offset -= d;
                lf->block.size += static_cast<size_t>(d);
                lf->block.aggregate = agg_->merge(eval_positions(s - d, static_cast<size_t>(d)),
                                                  lf->block.aggregate);
                ++last_op_.block_merges;
                ++last_op_.block_evals;
                refresh_agg_up(pr);
                refresh_agg_up(lf);
                touch(pr);
                touch(lf);
                touched_validity_check(pr);
                return validate_block(lf->block, params_.b).valid;
            }
        }
        return false;
    }

    template <class Visit>
    bool try_cascade(Leaf* lf, int64_t lf_start, const SpanRef& own, bool leftward, Visit&& visit) {
        // The homeless contents start as lf's own block. Walking outward,
        // each block either absorbs them (merge, done) or swaps: it takes
        // the carried span and hands its own contents onward.
        SpanRef carry = own;
        int64_t empty_pos = leftward ? own.start + static_cast<int64_t>(own.size) : own.start;
        if (!span_valid_for(lf_start, SpanRef{empty_pos, 0, 0})) return false;
        struct Pending {
            Leaf* leaf;
            int64_t leaf_start;
            SpanRef span;
        };
        std::vector<Pending> pend;
        Leaf* cur;
        int64_t cur_start;
        if (leftward) {
            cur = lf->prev;
            cur_start = cur ? lf_start - static_cast<int64_t>(cur->store.size()) : 0;
        } else {
            cur = lf->next;
            cur_start = lf_start + static_cast<int64_t>(lf->store.size());
        }
        size_t steps = 0;
        uint64_t swaps = 0;
        while (cur && steps < params_.q) {
            visit(cur);
            SpanRef cs{cur_start + cur->block.offset, cur->block.size, cur->block.aggregate};
            SpanRef merged = leftward
                                 ? SpanRef{cs.start, cs.size + carry.size,
                                           agg_->merge(cs.agg, carry.agg)}
                                 : SpanRef{carry.start, cs.size + carry.size,
                                           agg_->merge(carry.agg, cs.agg)};
            if (span_valid_for(cur_start, merged)) {
                touch(cur);
                cur->block.offset = merged.start - cur_start;
                cur->block.size = merged.size;
                cur->block.aggregate = merged.agg;
                ++last_op_.block_merges;
                ++last_fix_.merges;
                refresh_agg_up(cur);
                for (auto& pn : pend) {
                    touch(pn.leaf);
                    pn.leaf->block.offset = pn.span.start - pn.leaf_start;
                    pn.leaf->block.size = pn.span.size;
                    pn.leaf->block.aggregate = pn.span.agg;
                    refresh_agg_up(pn.leaf);
                }
                touch(lf);
                lf->block.offset = empty_pos - lf_start;
                lf->block.size = 0;
                lf->block.aggregate = agg_->identity;
                refresh_agg_up(lf);
                last_fix_.swaps = swaps;
                return true;
            }
            if (!span_valid_for(cur_start, carry)) return false;
            pend.push_back({cur, cur_start, carry});
            carry = cs;
            ++swaps;
            ++steps;
            if (leftward) {
                cur = cur->prev;
                if (cur) cur_start -= static_cast<int64_t>(cur->store.size());
            } else {
                cur_start += static_cast<int64_t>(cur->store.size());
                cur = cur->next;
            }
        }
        return false;
    }

    /// Ordered merge of the cached block aggregates of the contiguous leaf
    /// run [from, to], decomposed over maximal subtrees.
    uint64_t aggregate_leaf_run(const Leaf* from, const Leaf* to) const {
        if (from == to) return from->block.aggregate;
        const Node* ln = from;
        const Node* rn = to;
        uint64_t la = from->block.aggregate;
        uint64_t ra = to->block.aggregate;
        while (ln->parent != rn->parent) {
            {
                const Internal* p = ln->parent;
                size_t i = child_index(p, ln);
                for (size_t j = i + 1; j < p->children.size(); ++j)
                    la = agg_->merge(la, node_agg(p->children[j]));
                ln = p;
            }
            {
                const Internal* p = rn->parent;
                size_t i = child_index(p, rn);
                uint64_t pre = agg_->identity;
                for (size_t j = 0; j < i; ++j) pre = agg_->merge(pre, node_agg(p->children[j]));
                ra = agg_->merge(pre, ra);
                rn = p;
            }
        }
        const Internal* p = ln->parent;
        assert(p);
        size_t li = child_index(p, ln);
        size_t ri = child_index(p, rn);
        uint64_t mid = agg_->identity;
        for (size_t j = li + 1; j < ri; ++j) mid = agg_->merge(mid, node_agg(p->children[j]));
        return agg_->merge(agg_->merge(la, mid), ra);
    }

    // --- invariant checking internals

    InvariantReport& fail(InvariantReport& rep, std::string msg) const {
        rep.ok = false;
        rep.violation = std::move(msg);
        return rep;
    }

    bool check_node(const Node* n, size_t depth, size_t& leaf_depth, bool& leaf_depth_set,
                    size_t& counted, InvariantReport& rep) const {
        if (n->is_leaf) {
            const Leaf* lf = static_cast<const Leaf*>(n);
            for (size_t i = 0; i + 1 < lf->store.size(); ++i)
                if (cmp_(lf->store.key_at(i + 1), lf->store.key_at(i))) {
                    fail(rep, "leaf keys not sorted");
                    return false;
                }
            if (!leaf_depth_set) {
                leaf_depth = depth;
                leaf_depth_set = true;
            } else if (leaf_depth != depth) {
                fail(rep, "leaves at unequal depth");
                return false;
            }
            counted += lf->store.size();
            return true;
        }
        const Internal* v = static_cast<const Internal*>(n);
        size_t min_deg = (params_.t + 1) / 2;
        if (n == root_) {
            if (v->children.size() < 2) {
                fail(rep, "internal root with fewer than 2 children");
                return false;
            }
        } else if (v->children.size() < min_deg) {
            fail(rep, "internal node below minimum degree");
            return false;
        }
        if (v->children.size() > params_.t) {
            fail(rep, "internal node above maximum degree");
            return false;
        }
        if (v->seps.size() + 1 != v->children.size()) {
            fail(rep, "separator array size mismatch");
            return false;
        }
        size_t sum = 0;
        for (size_t i = 0; i < v->children.size(); ++i) {
            const Node* c = v->children[i];
            if (c->parent != v) {
                fail(rep, "parent pointer mismatch");
                return false;
            }
            if (i + 1 < v->children.size()) {
                if (!keys_equal(v->seps[i], subtree_max(c))) {
                    fail(rep, "separator is not the child's subtree max");
                    return false;
                }
                if (i > 0 && cmp_(v->seps[i], v->seps[i - 1])) {
                    fail(rep, "separators not nondecreasing");
                    return false;
                }
            }
            sum += count_of(c);
            if (!check_node(c, depth + 1, leaf_depth, leaf_depth_set, counted, rep)) return false;
        }
        if (sum != v->count) {
            fail(rep, "subtree count mismatch");
            return false;
        }
        if (agg_) {
            uint64_t a = agg_->identity;
            for (const Node* c : v->children) a = agg_->merge(a, node_agg(c));
            if (a != v->agg) {
                fail(rep, "internal aggregate stale");
                return false;
            }
        }
        return true;
    }

    bool check_blocks(InvariantReport& rep, bool deep) const {
        int64_t pos = 0;
        int64_t next_start = 0;
        for (const Leaf* lf = first_leaf_; lf; lf = lf->next) {
            int64_t start = pos + lf->block.offset;
            if (start != next_start) {
                fail(rep, "blocks do not tile the global array");
                return false;
            }
            next_start = start + static_cast<int64_t>(lf->block.size);
            if (mode_ == AggregateMode::kMerge) {
                auto v = validate_block(lf->block, params_.b);
                if (!v.valid) {
                    fail(rep, "invalid block: " + v.reason);
                    return false;
                }
            }
            if (deep) {
                uint64_t a = eval_positions(start, lf->block.size);
                if (a != lf->block.aggregate) {
                    fail(rep, "cached block aggregate stale");
                    return false;
                }
            }
            pos += static_cast<int64_t>(lf->store.size());
        }
        if (next_start != static_cast<int64_t>(n_keys_)) {
            fail(rep, "blocks do not cover all keys");
            return false;
        }
        return true;
    }

    Leaf* leaf_at(size_t index) {
        Leaf* lf = first_leaf_;
        for (size_t i = 0; i < index && lf; ++i) lf = lf->next;
        return lf;
    }

    void require_aggregates() const {
        if (!agg_) throw std::logic_error("BTree: aggregate values are not enabled");
    }

    // --- members

    TreeParams params_;
    mutable Compare cmp_;
    std::optional<AggregateSpec> agg_;
    AggregateMode mode_;

    NodePool leaf_pool_{sizeof(Leaf)};
    NodePool internal_pool_{sizeof(Internal), 1u << 18};

    Node* root_ = nullptr;
    Leaf* first_leaf_ = nullptr;
    size_t n_keys_ = 0;
    size_t n_leaves_ = 0;
    size_t n_internal_ = 0;

    uint64_t epoch_ = 0;
    uint64_t tick_ = 0;
    OpCounters last_op_;
    TotalCounters totals_;
    FixStats last_fix_;
    std::vector<Leaf*> touched_;
    std::vector<Leaf*> dirty_blocks_;
};

} // namespace sbt
