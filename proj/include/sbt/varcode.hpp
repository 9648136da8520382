#pragma once

#include <array>
#include <bit>
#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "sbt/packed_buffer.hpp"

namespace sbt {

/// MSB-first bit stream over 64-bit words: stream bit i lives in word i/64
/// at bit position 63 - i%64. Values are emitted most-significant-bit first.
class BitStream {
public:
    size_t bit_size() const { return len_; }

    uint64_t read(size_t pos, unsigned n) const {
        assert(pos + n <= len_ && n <= 64);
        if (n == 0) return 0;
        size_t w = pos / 64;
        unsigned off = pos % 64;
        uint64_t v;
        if (off + n <= 64) {
            v = words_[w] >> (64 - off - n);
        } else {
            unsigned hi = 64 - off;
            v = (words_[w] << (n - hi)) | (words_[w + 1] >> (128 - off - n));
        }
        return v & low_mask(n);
    }

    void write(size_t pos, unsigned n, uint64_t v) {
        assert(pos + n <= len_ && n <= 64);
        if (n == 0) return;
        v &= low_mask(n);
        size_t w = pos / 64;
        unsigned off = pos % 64;
        if (off + n <= 64) {
            unsigned sh = 64 - off - n;
            words_[w] = (words_[w] & ~(low_mask(n) << sh)) | (v << sh);
        } else {
            unsigned hi = 64 - off;       // bits landing in words_[w]
            unsigned lo = n - hi;         // bits landing in words_[w+1]
            words_[w] = (words_[w] & ~low_mask(hi)) | (v >> lo);
            words_[w + 1] = (words_[w + 1] & (low_mask(64 - lo))) | (v << (64 - lo));
        }
    }

    void append(unsigned n, uint64_t v) {
        reserve_bits(len_ + n);
        size_t pos = len_;
        len_ += n;
        write(pos, n, v);
    }

    /// Opens (shift_right) or closes (negative impossible; use remove) a gap
    /// of `n` bits at `pos`, moving the tail [pos, len) by n bits.
    void insert_gap(size_t pos, size_t n) {
        assert(pos <= len_);
        reserve_bits(len_ + n);
        size_t tail = len_ - pos;
        len_ += n;
        move_bits(pos, pos + n, tail);
    }

    void remove_range(size_t pos, size_t n) {
        assert(pos + n <= len_);
        size_t tail = len_ - pos - n;
        move_bits(pos + n, pos, tail);
        len_ -= n;
        shrink_to_fit_bits();
    }

    void clear() {
        words_.clear();
        len_ = 0;
    }

    /// Allocated storage in bits (capacity grows and shrinks by doubling
    /// and halving with hysteresis).
    size_t capacity_bits() const { return words_.capacity() * 64; }

private:
    void reserve_bits(size_t bits) {
        size_t need = (bits + 63) / 64;
        if (need > words_.size()) {
            if (need > words_.capacity()) words_.reserve(std::max(need, words_.capacity() * 2));
            words_.resize(need, 0);
        }
    }

    void shrink_to_fit_bits() {
        size_t need = (len_ + 63) / 64;
        if (need < words_.size()) words_.resize(need);
        if (words_.capacity() > 4 * std::max<size_t>(need, 1)) words_.shrink_to_fit();
        // clear bits past len_ in the last word so equality checks stay clean
        if (!words_.empty()) {
            unsigned used = len_ % 64;
            if (used) words_.back() &= ~low_mask(64 - used);
        }
    }

    /// Overlap-safe bit-range move in chunks of 64 bits.
    void move_bits(size_t src, size_t dst, size_t n) {
        if (n == 0 || src == dst) return;
        if (dst < src) {
            size_t off = 0;
            while (off < n) {
                unsigned c = static_cast<unsigned>(std::min<size_t>(64, n - off));
                write(dst + off, c, read(src + off, c));
                off += c;
            }
        } else {
            size_t off = n;
            while (off > 0) {
                unsigned c = static_cast<unsigned>(std::min<size_t>(64, off));
                off -= c;
                write(dst + off, c, read(src + off, c));
            }
        }
    }

    std::vector<uint64_t> words_;
    size_t len_ = 0;
};

// ---------------------------------------------------------------------
// Elias gamma / delta codes. gamma(x) = floor(lg x) zeros, then x's
// floor(lg x)+1-bit binary; delta(x) = gamma(floor(lg x)+1), then x's low
// floor(lg x) bits.

enum class GapCode { kGamma, kDelta };

inline unsigned gamma_length(uint64_t x) {
    assert(x >= 1);
    unsigned l = 63 - static_cast<unsigned>(std::countl_zero(x));
    return 2 * l + 1;
}

inline unsigned delta_length(uint64_t x) {
    assert(x >= 1);
    unsigned l = 63 - static_cast<unsigned>(std::countl_zero(x));
    return gamma_length(l + 1) + l;
}

inline unsigned code_length(GapCode c, uint64_t x) {
    return c == GapCode::kGamma ? gamma_length(x) : delta_length(x);
}

inline void gamma_append(BitStream& s, uint64_t x) {
    assert(x >= 1);
    unsigned l = 63 - static_cast<unsigned>(std::countl_zero(x));
    s.append(l, 0);
    s.append(l + 1, x);
}

inline void delta_append(BitStream& s, uint64_t x) {
    assert(x >= 1);
    unsigned l = 63 - static_cast<unsigned>(std::countl_zero(x));
    gamma_append(s, l + 1);
    if (l) s.append(l, x & low_mask(l));
}

struct DecodeResult {
    uint64_t value;
    size_t next;  // bit position after the code
};

inline DecodeResult gamma_decode(const BitStream& s, size_t pos) {
    size_t end = s.bit_size();
    unsigned zeros = 0;
    while (pos + zeros < end && s.read(pos + zeros, 1) == 0) {
        if (++zeros > 64) throw std::runtime_error("gamma: code too long");
    }
    if (pos + zeros >= end || pos + 2 * zeros + 1 > end)
        throw std::runtime_error("gamma: truncated stream");
    uint64_t v = s.read(pos + zeros, zeros + 1);
    return {v, pos + 2 * zeros + 1};
}

inline DecodeResult delta_decode(const BitStream& s, size_t pos) {
    auto g = gamma_decode(s, pos);
    unsigned l = static_cast<unsigned>(g.value - 1);
    if (g.next + l > s.bit_size()) throw std::runtime_error("delta: truncated stream");
    uint64_t v = (uint64_t{1} << l) | (l ? s.read(g.next, l) : 0);
    return {v, g.next + l};
}

inline DecodeResult code_decode(GapCode c, const BitStream& s, size_t pos) {
    return c == GapCode::kGamma ? gamma_decode(s, pos) : delta_decode(s, pos);
}

// ---------------------------------------------------------------------
// Chunk decoder: a 16-bit window of the stream maps to all codes fully
// contained in it. Codes straddling the chunk end are deferred to the
// direct decoder; `bits` reports how many bits the table consumed.

inline constexpr unsigned kChunkBits = 16;

struct ChunkEntry {
    uint8_t count = 0;   // decoded values fully inside the chunk
    uint8_t bits = 0;    // bits consumed by those values
    uint16_t values[16] = {};
};

class ChunkTable {
public:
    static const ChunkTable& instance(GapCode code) {
        static const ChunkTable gamma_table(GapCode::kGamma);
        static const ChunkTable delta_table(GapCode::kDelta);
        return code == GapCode::kGamma ? gamma_table : delta_table;
    }

    const ChunkEntry& entry(uint16_t chunk) const { return entries_[chunk]; }

private:
    explicit ChunkTable(GapCode code) : entries_(1u << kChunkBits) {
        for (uint32_t c = 0; c < (1u << kChunkBits); ++c) {
            ChunkEntry& e = entries_[c];
            unsigned pos = 0;
            while (pos < kChunkBits && e.count < 16) {
                auto d = decode_in_chunk(code, static_cast<uint16_t>(c), pos);
                if (!d.first) break;
                e.values[e.count++] = static_cast<uint16_t>(d.second.value);
                pos = static_cast<unsigned>(d.second.next);
            }
            e.bits = static_cast<uint8_t>(pos);
        }
    }

    static std::pair<bool, DecodeResult> decode_in_chunk(GapCode code, uint16_t chunk,
                                                         unsigned pos) {
        auto bit = [&](unsigned i) { return (chunk >> (kChunkBits - 1 - i)) & 1u; };
        auto bits_at = [&](unsigned i, unsigned n) -> uint64_t {
            uint64_t v = 0;
            for (unsigned j = 0; j < n; ++j) v = (v << 1) | bit(i + j);
            return v;
        };
        unsigned zeros = 0;
        while (pos + zeros < kChunkBits && bit(pos + zeros) == 0) ++zeros;
        if (pos + zeros >= kChunkBits) return {false, {}};
        if (code == GapCode::kGamma) {
            if (pos + 2 * zeros + 1 > kChunkBits) return {false, {}};
            return {true, {bits_at(pos + zeros, zeros + 1), pos + 2 * zeros + 1}};
        }
        // delta: gamma-coded length first
        if (pos + 2 * zeros + 1 > kChunkBits) return {false, {}};
        uint64_t lv = bits_at(pos + zeros, zeros + 1);
        unsigned l = static_cast<unsigned>(lv - 1);
        unsigned next = pos + 2 * zeros + 1;
        if (next + l > kChunkBits) return {false, {}};
        uint64_t v = (uint64_t{1} << l) | (l ? bits_at(next, l) : 0);
        return {true, {v, next + l}};
    }

    std::vector<ChunkEntry> entries_;
};

// ---------------------------------------------------------------------
// Difference-coded leaf: the first key plain in k bits, each subsequent key
// as the encoded gap to its predecessor. Keys are strictly increasing.

class DiffLeaf {
public:
    DiffLeaf() = default;
    DiffLeaf(size_t capacity, unsigned key_width, GapCode code = GapCode::kGamma)
        : capacity_(capacity), k_(key_width), code_(code) {}

    size_t size() const { return count_; }
    size_t capacity() const { return capacity_; }
    bool empty() const { return count_ == 0; }
    bool full() const { return count_ == capacity_; }
    unsigned key_width() const { return k_; }

    /// Exact stored bit length: k bits for the first key plus the code
    /// lengths of all gaps.
    size_t bits() const { return stream_.bit_size(); }
    size_t capacity_bits() const { return stream_.capacity_bits(); }

    uint64_t key_at(size_t i) const {
        assert(i < count_);
        Cursor c = seek(i);
        return c.key;
    }

    uint64_t min_key() const { return key_at(0); }
    uint64_t max_key() const { return last_key_; }

    /// Count of stored keys <= key, by sequential chunk-table decode.
    size_t rank_of(uint64_t key) const {
        if (count_ == 0 || key < first_key_) return 0;
        if (key >= last_key_) return count_;
        const ChunkTable& table = ChunkTable::instance(code_);
        uint64_t cur = first_key_;
        size_t rank = 1;
        size_t pos = k_;
        size_t end = stream_.bit_size();
        while (rank < count_) {
            if (end - pos >= kChunkBits) {
                const ChunkEntry& e =
                    table.entry(static_cast<uint16_t>(stream_.read(pos, kChunkBits)));
                if (e.count > 0) {
                    bool overshoot = false;
                    for (unsigned i = 0; i < e.count && rank < count_; ++i) {
                        uint64_t nxt = cur + e.values[i];
                        if (nxt > key) {
                            overshoot = true;
                            break;
                        }
                        cur = nxt;
                        ++rank;
                    }
                    if (overshoot) break;
                    pos += e.bits;  // a straddling code is handled next round
                    continue;
                }
            }
            auto d = code_decode(code_, stream_, pos);
            if (cur + d.value > key) break;
            cur += d.value;
            ++rank;
            pos = d.next;
        }
        return rank;
    }

    /// Splices `key` into the stream; the successor gap is rewritten and the
    /// tail moved without re-encoding. Duplicate keys are rejected.
    void insert(uint64_t key) {
        if (full()) throw std::length_error("DiffLeaf: full");
        if (count_ == 0) {
            stream_.append(k_, key);
            first_key_ = last_key_ = key;
            count_ = 1;
            return;
        }
        if (key == first_key_ || key == last_key_) throw std::logic_error("DiffLeaf: duplicate");
        if (key > last_key_) {
            append_gap(key - last_key_);
            last_key_ = key;
            ++count_;
            return;
        }
        if (key < first_key_) {
            // new first key: old first becomes a gap
            uint64_t gap = first_key_ - key;
            unsigned glen = code_length(code_, gap);
            stream_.insert_gap(k_, glen);
            stream_.write(0, k_, key);
            write_code(k_, gap);
            first_key_ = key;
            ++count_;
            return;
        }
        // find predecessor by decode
        Cursor c = seek_key_floor(key);
        if (c.key == key) throw std::logic_error("DiffLeaf: duplicate");
        // successor gap splits: (succ - pred) becomes (key - pred), (succ - key)
        auto old_gap = code_decode(code_, stream_, c.next_pos);
        uint64_t g1 = key - c.key;
        uint64_t g2 = (c.key + old_gap.value) - key;
        unsigned l1 = code_length(code_, g1);
        unsigned l2 = code_length(code_, g2);
        unsigned old_len = static_cast<unsigned>(old_gap.next - c.next_pos);
        if (l1 + l2 >= old_len) stream_.insert_gap(old_gap.next, l1 + l2 - old_len);
        else stream_.remove_range(c.next_pos, old_len - (l1 + l2));
        write_code(c.next_pos, g1);
        write_code(c.next_pos + l1, g2);
        ++count_;
    }

    /// Removes `key`; the surrounding gaps fuse.
    void remove(uint64_t key) {
        if (count_ == 0) throw std::logic_error("DiffLeaf: remove from empty leaf");
        if (key < first_key_ || key > last_key_) throw std::logic_error("DiffLeaf: absent key");
        if (count_ == 1) {
            if (key != first_key_) throw std::logic_error("DiffLeaf: absent key");
            stream_.clear();
            count_ = 0;
            first_key_ = last_key_ = 0;
            return;
        }
        if (key == first_key_) {
            auto g = code_decode(code_, stream_, k_);
            uint64_t nf = first_key_ + g.value;
            stream_.remove_range(k_, g.next - k_);
            stream_.write(0, k_, nf);
            first_key_ = nf;
            --count_;
            return;
        }
        Cursor c = seek_key_floor(key);
        if (c.key != key) throw std::logic_error("DiffLeaf: absent key");
        if (key == last_key_) {
            stream_.remove_range(c.code_pos, stream_.bit_size() - c.code_pos);
            last_key_ = c.prev_key;
            --count_;
            return;
        }
        // fuse: gaps (key - prev), (succ - key) become (succ - prev)
        auto succ_gap = code_decode(code_, stream_, c.next_pos);
        uint64_t fused = (key - c.prev_key) + succ_gap.value;
        unsigned lf = code_length(code_, fused);
        unsigned old_len = static_cast<unsigned>(succ_gap.next - c.code_pos);
        if (lf <= old_len) stream_.remove_range(c.code_pos, old_len - lf);
        else stream_.insert_gap(c.code_pos, lf - old_len);
        write_code(c.code_pos, fused);
        --count_;
    }

    std::vector<uint64_t> decode_all() const {
        std::vector<uint64_t> out;
        out.reserve(count_);
        if (count_ == 0) return out;
        uint64_t cur = first_key_;
        out.push_back(cur);
        size_t pos = k_;
        for (size_t i = 1; i < count_; ++i) {
            auto d = code_decode(code_, stream_, pos);
            cur += d.value;
            out.push_back(cur);
            pos = d.next;
        }
        return out;
    }

private:
    struct Cursor {
        uint64_t key;       // key at the sought index / floor key
        uint64_t prev_key;  // key before it (valid when index > 0)
        size_t code_pos;    // bit position of the gap producing `key` (k_ for index 0)
        size_t next_pos;    // bit position after `key`'s code
    };

    Cursor seek(size_t index) const {
        Cursor c{first_key_, 0, 0, k_};
        for (size_t i = 0; i < index; ++i) {
            auto d = code_decode(code_, stream_, c.next_pos);
            c.prev_key = c.key;
            c.key += d.value;
            c.code_pos = c.next_pos;
            c.next_pos = d.next;
        }
        return c;
    }

    /// Largest stored key <= `key` (requires first_key_ <= key).
    Cursor seek_key_floor(uint64_t key) const {
        Cursor c{first_key_, 0, 0, k_};
        while (c.next_pos < stream_.bit_size()) {
            auto d = code_decode(code_, stream_, c.next_pos);
            if (c.key + d.value > key) break;
            c.prev_key = c.key;
            c.key += d.value;
            c.code_pos = c.next_pos;
            c.next_pos = d.next;
        }
        return c;
    }

    void append_gap(uint64_t gap) {
        if (code_ == GapCode::kGamma) gamma_append(stream_, gap);
        else delta_append(stream_, gap);
    }

    void write_code(size_t pos, uint64_t gap) {
        // encode into pre-sized space
        unsigned len = code_length(code_, gap);
        unsigned l = 63 - static_cast<unsigned>(std::countl_zero(gap));
        if (code_ == GapCode::kGamma) {
            stream_.write(pos, l, 0);
            stream_.write(pos + l, l + 1, gap);
        } else {
            unsigned ll = 63 - static_cast<unsigned>(std::countl_zero(uint64_t{l} + 1));
            stream_.write(pos, ll, 0);
            stream_.write(pos + ll, ll + 1, l + 1);
            if (l) stream_.write(pos + 2 * ll + 1, l, gap & low_mask(l));
        }
        (void)len;
    }

    size_t capacity_ = 0;
    unsigned k_ = 0;
    GapCode code_ = GapCode::kGamma;
    BitStream stream_;
    size_t count_ = 0;
    uint64_t first_key_ = 0;
    uint64_t last_key_ = 0;
};

// ---------------------------------------------------------------------
// Leaf-storage adapter so the B tree can run on difference-coded leaves.
// Compressed leaves store a strictly increasing integer set and carry no
// satellite values.

template <GapCode Code>
class DiffLeafStorageT {
public:
    static constexpr bool kCompressed = true;

    DiffLeafStorageT() = default;
    DiffLeafStorageT(size_t capacity, unsigned key_width, unsigned value_width)
        : leaf_(capacity, key_width, Code) {
        if (value_width != 0)
            throw std::invalid_argument("DiffLeafStorage: satellite values unsupported");
    }

    size_t size() const { return leaf_.size(); }
    size_t capacity() const { return leaf_.capacity(); }
    bool empty() const { return leaf_.empty(); }
    bool full() const { return leaf_.full(); }
    bool has_values() const { return false; }

    uint64_t key_at(size_t i) const { return leaf_.key_at(i); }
    uint64_t value_at(size_t) const { throw std::logic_error("compressed leaf: no values"); }
    void set_value(size_t, uint64_t) { throw std::logic_error("compressed leaf: no values"); }

    uint64_t max_key() const { return leaf_.max_key(); }
    uint64_t min_key() const { return leaf_.min_key(); }

    template <class Less>
    size_t rank_of(uint64_t key, Less&&) const {
        return leaf_.rank_of(key);
    }

    void insert_at(size_t rank, uint64_t key, uint64_t = 0) {
        (void)rank;
        leaf_.insert(key);
    }

    std::pair<uint64_t, uint64_t> remove_at(size_t rank) {
        uint64_t k = leaf_.key_at(rank);
        leaf_.remove(k);
        return {k, 0};
    }

    void push_front(uint64_t key, uint64_t = 0) { leaf_.insert(key); }
    void push_back(uint64_t key, uint64_t = 0) { leaf_.insert(key); }

    std::pair<uint64_t, uint64_t> pop_front() {
        uint64_t k = leaf_.min_key();
        leaf_.remove(k);
        return {k, 0};
    }

    std::pair<uint64_t, uint64_t> pop_back() {
        uint64_t k = leaf_.max_key();
        leaf_.remove(k);
        return {k, 0};
    }

    size_t model_bits() const { return leaf_.capacity_bits(); }
    size_t used_key_bits() const { return leaf_.bits(); }

    const PackedCircularBuffer& values() const {
        throw std::logic_error("compressed leaf: no values");
    }

    const DiffLeaf& leaf() const { return leaf_; }

private:
    DiffLeaf leaf_{0, 1, Code};
};

using GammaLeafStorage = DiffLeafStorageT<GapCode::kGamma>;
using DeltaLeafStorage = DiffLeafStorageT<GapCode::kDelta>;

} // namespace sbt
