#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <utility>

namespace sbt {

inline constexpr unsigned kWordBits = 64;

/// All-ones mask of the low `n` bits, n <= 64.
inline constexpr uint64_t low_mask(unsigned n) {
    return n >= 64 ? ~uint64_t{0} : (uint64_t{1} << n) - 1;
}

/// Fixed-capacity circular buffer of `width`-bit integers, bit-packed
/// little-endian into 64-bit words. A slot may straddle a word boundary.
/// End operations touch a constant number of words; interior insert/remove
/// shifts the shorter side with word-granularity bulk moves, i.e. about
/// width/64 of a word op per shifted slot.
///
/// The buffer itself is order-agnostic; rank_of assumes the caller keeps
/// the contents sorted under its comparator.
class PackedCircularBuffer {
public:
    PackedCircularBuffer() = default;

    PackedCircularBuffer(size_t capacity, unsigned width)
        : capacity_(static_cast<uint32_t>(capacity)),
          width_(width),
          cap_bits_(static_cast<uint32_t>(capacity * width)) {
        if (width == 0 || width > kWordBits)
            throw std::invalid_argument("PackedCircularBuffer: width must be in [1,64]");
        if (capacity * width > 0xffffffffull)
            throw std::invalid_argument("PackedCircularBuffer: capacity too large");
        size_t nwords = (cap_bits_ + kWordBits - 1) / kWordBits;
        if (nwords > kInlineWords) {
            heap_ = std::make_unique<uint64_t[]>(nwords);
            words_ = heap_.get();
        }
        std::fill_n(words_, nwords, 0);
    }

    PackedCircularBuffer(const PackedCircularBuffer&) = delete;
    PackedCircularBuffer& operator=(const PackedCircularBuffer&) = delete;

    size_t size() const { return len_; }
    size_t capacity() const { return capacity_; }
    unsigned width() const { return width_; }
    bool empty() const { return len_ == 0; }
    bool full() const { return len_ == capacity_; }

    uint64_t get(size_t i) const {
        assert(i < len_);
        return read_bits(slot_bit(i), width_);
    }

    void set(size_t i, uint64_t v) {
        assert(i < len_);
        write_bits(slot_bit(i), width_, v);
    }

    uint64_t front() const { return get(0); }
    uint64_t back() const { return get(len_ - 1); }

    void push_front(uint64_t v) {
        if (full()) throw std::length_error("PackedCircularBuffer: full");
        head_ = (head_ + capacity_ - 1) % capacity_;
        ++len_;
        write_bits(slot_bit(0), width_, v);
    }

    void push_back(uint64_t v) {
        if (full()) throw std::length_error("PackedCircularBuffer: full");
        ++len_;
        write_bits(slot_bit(len_ - 1), width_, v);
    }

    uint64_t pop_front() {
        if (empty()) throw std::out_of_range("PackedCircularBuffer: empty");
        uint64_t v = get(0);
        head_ = (head_ + 1) % capacity_;
        --len_;
        return v;
    }

    uint64_t pop_back() {
        if (empty()) throw std::out_of_range("PackedCircularBuffer: empty");
        uint64_t v = get(len_ - 1);
        --len_;
        return v;
    }

    /// Inserts `v` at logical position `rank`, shifting the shorter of the
    /// prefix [0,rank) and the suffix [rank,len) by one slot.
    void insert_at(size_t rank, uint64_t v) {
        if (full()) throw std::length_error("PackedCircularBuffer: full");
        if (rank > len_) throw std::out_of_range("PackedCircularBuffer: insert rank");
        size_t suffix = len_ - rank;
        if (rank <= suffix) {
            // shift prefix one slot toward the front
            if (rank > 0)
                copy_slots(slot_bit(0), minus_one_slot(slot_bit(0)), rank, /*ascending=*/true);
            head_ = (head_ + capacity_ - 1) % capacity_;
            moved_ += rank;
        } else {
            // shift suffix one slot toward the back
            copy_slots(slot_bit(rank), plus_one_slot(slot_bit(rank)), suffix, /*ascending=*/false);
            moved_ += suffix;
        }
        ++len_;
        write_bits(slot_bit(rank), width_, v);
    }

    /// Removes and returns the value at logical position `rank`.
    uint64_t remove_at(size_t rank) {
        if (rank >= len_) throw std::out_of_range("PackedCircularBuffer: remove rank");
        uint64_t v = get(rank);
        size_t suffix = len_ - 1 - rank;
        if (rank <= suffix) {
            if (rank > 0)
                copy_slots(slot_bit(0), plus_one_slot(slot_bit(0)), rank, /*ascending=*/false);
            head_ = (head_ + 1) % capacity_;
            moved_ += rank;
        } else {
            copy_slots(slot_bit(rank + 1), slot_bit(rank), suffix, /*ascending=*/true);
            moved_ += suffix;
        }
        --len_;
        return v;
    }

    /// Count of stored values <= key: the index of the first value greater
    /// than key. The binary search's probes depend on each other, so all
    /// storage lines are prefetched up front.
    template <class Less>
    size_t rank_of(uint64_t key, Less&& less) const {
        const char* base = reinterpret_cast<const char*>(words_);
        size_t used_bytes = (len_ * width_ + 7) / 8;
        for (size_t off = 0; off < used_bytes; off += 64) __builtin_prefetch(base + off);
        size_t lo = 0, hi = len_;
        while (lo < hi) {
            size_t mid = lo + (hi - lo) / 2;
            if (less(key, get(mid)))
                hi = mid;
            else
                lo = mid + 1;
        }
        return lo;
    }

    /// Cumulative count of slots shifted by interior insert_at/remove_at.
    uint64_t keys_moved() const { return moved_; }
    void reset_keys_moved() { moved_ = 0; }

    /// Test hook: place the head at an arbitrary physical slot (empty buffer only).
    void debug_set_head(size_t h) {
        assert(len_ == 0 && h < capacity_);
        head_ = static_cast<uint32_t>(h);
    }

private:
    size_t slot_bit(size_t logical) const {
        size_t phys = head_ + logical;
        if (phys >= capacity_) phys -= capacity_;
        return phys * width_;
    }

    size_t plus_one_slot(size_t bitpos) const {
        bitpos += width_;
        return bitpos >= cap_bits_ ? bitpos - cap_bits_ : bitpos;
    }

    size_t minus_one_slot(size_t bitpos) const {
        return bitpos >= width_ ? bitpos - width_ : bitpos + cap_bits_ - width_;
    }

    uint64_t read_linear(size_t pos, unsigned n) const {
        size_t w = pos / kWordBits;
        unsigned off = pos % kWordBits;
        uint64_t v = words_[w] >> off;
        if (off + n > kWordBits) v |= words_[w + 1] << (kWordBits - off);
        return v & low_mask(n);
    }

    void write_linear(size_t pos, unsigned n, uint64_t v) {
        size_t w = pos / kWordBits;
        unsigned off = pos % kWordBits;
        uint64_t m = low_mask(n);
        v &= m;
        words_[w] = (words_[w] & ~(m << off)) | (v << off);
        if (off + n > kWordBits) {
            unsigned spill = off + n - kWordBits;
            uint64_t hm = low_mask(spill);
            words_[w + 1] = (words_[w + 1] & ~hm) | (v >> (kWordBits - off));
        }
    }

    // Circular bit read/write: the bit address space wraps at cap_bits_.
    uint64_t read_bits(size_t pos, unsigned n) const {
        if (pos + n <= cap_bits_) return read_linear(pos, n);
        unsigned n1 = static_cast<unsigned>(cap_bits_ - pos);
        return read_linear(pos, n1) | (read_linear(0, n - n1) << n1);
    }

    void write_bits(size_t pos, unsigned n, uint64_t v) {
        if (pos + n <= cap_bits_) {
            write_linear(pos, n, v);
        } else {
            unsigned n1 = static_cast<unsigned>(cap_bits_ - pos);
            write_linear(pos, n1, v & low_mask(n1));
            write_linear(0, n - n1, v >> n1);
        }
    }

    /// Copies `count` slots starting at circular bit `src` to `dst`
    /// (dst = src +- width). Chunked 64 bits at a time; `ascending` selects
    /// the overlap-safe direction (true when dst < src in stream order).
    void copy_slots(size_t src, size_t dst, size_t count, bool ascending) {
        size_t nbits = count * width_;
        if (nbits == 0) return;
        if (ascending) {
            size_t off = 0;
            while (off < nbits) {
                unsigned c = static_cast<unsigned>(std::min<size_t>(kWordBits, nbits - off));
                write_bits(add_bits(dst, off), c, read_bits(add_bits(src, off), c));
                off += c;
            }
        } else {
            size_t off = nbits;
            while (off > 0) {
                unsigned c = static_cast<unsigned>(std::min<size_t>(kWordBits, off));
                off -= c;
                write_bits(add_bits(dst, off), c, read_bits(add_bits(src, off), c));
            }
        }
    }

    size_t add_bits(size_t pos, size_t delta) const {
        pos += delta;
        return pos >= cap_bits_ ? pos - cap_bits_ : pos;
    }

    // keys up to 20 words live inline with the owning object; larger
    // configurations fall back to a heap block
    static constexpr size_t kInlineWords = 20;

    uint64_t* words_ = inline_words_;
    std::unique_ptr<uint64_t[]> heap_;
    uint32_t capacity_ = 0;
    uint32_t width_ = 0;
    uint32_t cap_bits_ = 0;
    uint32_t head_ = 0;
    uint32_t len_ = 0;
    uint32_t pad_ = 0;
    uint64_t moved_ = 0;
    uint64_t inline_words_[kInlineWords];
};

} // namespace sbt
