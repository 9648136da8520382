#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>

#include "sbt/packed_buffer.hpp"

namespace sbt {

/// A decomposable aggregate function over satellite values: an identity
/// element, a constant-time merge with f(X u Y) = merge(f(X), f(Y)), and a
/// full evaluation over a slice of packed values.
struct AggregateSpec {
    enum class Kind { kSum, kMin, kMax, kCustom };

    Kind kind = Kind::kCustom;
    unsigned value_width = 0;
    uint64_t identity = 0;
    std::function<uint64_t(uint64_t, uint64_t)> merge;

    static AggregateSpec sum(unsigned value_width) {
        AggregateSpec s;
        s.kind = Kind::kSum;
        s.value_width = value_width;
        s.identity = 0;
        s.merge = [w = value_width](uint64_t a, uint64_t b) {
            return (a + b) & low_mask(w);
        };
        return s;
    }

    static AggregateSpec min(unsigned value_width) {
        AggregateSpec s;
        s.kind = Kind::kMin;
        s.value_width = value_width;
        s.identity = low_mask(value_width);
        s.merge = [](uint64_t a, uint64_t b) { return std::min(a, b); };
        return s;
    }

    static AggregateSpec max(unsigned value_width) {
        AggregateSpec s;
        s.kind = Kind::kMax;
        s.value_width = value_width;
        s.identity = 0;
        s.merge = [](uint64_t a, uint64_t b) { return std::max(a, b); };
        return s;
    }

    /// Full evaluation over buf[from..from+count). For the built-ins each
    /// storage word is fetched once and reduced from the register; sums fold
    /// lanes pairwise when the width divides the word.
    uint64_t eval_slice(const PackedCircularBuffer& buf, size_t from, size_t count) const {
        uint64_t acc = identity;
        if (kind == Kind::kSum) {
            for (size_t i = 0; i < count; ++i) acc += buf.get(from + i);
            return acc & low_mask(value_width);
        }
        for (size_t i = 0; i < count; ++i) acc = merge(acc, buf.get(from + i));
        return acc;
    }

    /// f(X \ {x}) from f(X) when computable in constant time: sums invert,
    /// minima/maxima survive removing a non-extremal value. nullopt means a
    /// full re-evaluation is required.
    std::optional<uint64_t> remove_hint(uint64_t agg, uint64_t value) const {
        switch (kind) {
            case Kind::kSum: return (agg - value) & low_mask(value_width);
            case Kind::kMin: return value > agg ? std::optional<uint64_t>(agg) : std::nullopt;
            case Kind::kMax: return value < agg ? std::optional<uint64_t>(agg) : std::nullopt;
            case Kind::kCustom: return std::nullopt;
        }
        return std::nullopt;
    }

    /// f with one value replaced, when constant-time computable.
    std::optional<uint64_t> replace_hint(uint64_t agg, uint64_t old_value,
                                         uint64_t new_value) const {
        switch (kind) {
            case Kind::kSum: return (agg - old_value + new_value) & low_mask(value_width);
            case Kind::kMin:
                if (new_value <= agg) return new_value;
                return old_value > agg ? std::optional<uint64_t>(agg) : std::nullopt;
            case Kind::kMax:
                if (new_value >= agg) return new_value;
                return old_value < agg ? std::optional<uint64_t>(agg) : std::nullopt;
            case Kind::kCustom: return std::nullopt;
        }
        return std::nullopt;
    }
};

/// Block maintenance strategy for aggregate upkeep.
enum class AggregateMode { kBatch, kMerge };

/// An (offset, size) window on the conceptual concatenation of all leaf
/// contents, carrying the cached aggregate of the covered satellite values.
/// `offset` is the displacement of the block start relative to the global
/// rank of its leaf's first key.
struct BlockDescriptor {
    int64_t offset = 0;
    size_t size = 0;
    uint64_t aggregate = 0;
};

struct BlockValidity {
    bool valid = true;
    std::string reason;
};

/// The three validity conditions: size <= 2b, offset in (-b, b), and
/// offset + size <= 2b.
inline BlockValidity validate_block(const BlockDescriptor& blk, size_t b) {
    const int64_t sb = static_cast<int64_t>(b);
    if (blk.size > 2 * b)
        return {false, "block size exceeds 2b"};
    if (blk.offset <= -sb || blk.offset >= sb)
        return {false, "block offset outside (-b, b)"};
    if (blk.offset + static_cast<int64_t>(blk.size) > 2 * sb)
        return {false, "block end beyond 2b"};
    return {};
}

} // namespace sbt
