#pragma once

#include <memory>
#include <utility>

#include "sbt/packed_buffer.hpp"

namespace sbt {

/// A key buffer paired with an optional satellite-value buffer sharing the
/// same circular geometry. Every structural mutation goes through this
/// facade so the two buffers cannot desynchronize.
class PackedLeafStorage {
public:
    static constexpr bool kCompressed = false;

    PackedLeafStorage() = default;

    PackedLeafStorage(size_t capacity, unsigned key_width, unsigned value_width)
        : keys_(capacity, key_width) {
        if (value_width > 0)
            values_ = std::make_unique<PackedCircularBuffer>(capacity, value_width);
    }

    size_t size() const { return keys_.size(); }
    size_t capacity() const { return keys_.capacity(); }
    bool empty() const { return keys_.empty(); }
    bool full() const { return keys_.full(); }
    bool has_values() const { return values_ != nullptr; }

    uint64_t key_at(size_t i) const { return keys_.get(i); }
    uint64_t value_at(size_t i) const { return values_->get(i); }
    void set_value(size_t i, uint64_t v) { values_->set(i, v); }

    uint64_t max_key() const { return keys_.back(); }
    uint64_t min_key() const { return keys_.front(); }

    template <class Less>
    size_t rank_of(uint64_t key, Less&& less) const {
        return keys_.rank_of(key, std::forward<Less>(less));
    }

    void insert_at(size_t rank, uint64_t key, uint64_t value = 0) {
        keys_.insert_at(rank, key);
        if (values_) values_->insert_at(rank, value);
    }

    std::pair<uint64_t, uint64_t> remove_at(size_t rank) {
        uint64_t k = keys_.remove_at(rank);
        uint64_t v = values_ ? values_->remove_at(rank) : 0;
        return {k, v};
    }

    void push_front(uint64_t key, uint64_t value = 0) {
        keys_.push_front(key);
        if (values_) values_->push_front(value);
    }

    void push_back(uint64_t key, uint64_t value = 0) {
        keys_.push_back(key);
        if (values_) values_->push_back(value);
    }

    std::pair<uint64_t, uint64_t> pop_front() {
        uint64_t k = keys_.pop_front();
        uint64_t v = values_ ? values_->pop_front() : 0;
        return {k, v};
    }

    std::pair<uint64_t, uint64_t> pop_back() {
        uint64_t k = keys_.pop_back();
        uint64_t v = values_ ? values_->pop_back() : 0;
        return {k, v};
    }

    /// Model bits for the stats accounting: the full key array plus the
    /// satellite array when present.
    size_t model_bits() const {
        size_t bits = keys_.capacity() * keys_.width();
        if (values_) bits += values_->capacity() * values_->width();
        return bits;
    }

    size_t used_key_bits() const { return keys_.size() * keys_.width(); }

    const PackedCircularBuffer& keys() const { return keys_; }
    const PackedCircularBuffer& values() const { return *values_; }

private:
    PackedCircularBuffer keys_;
    std::unique_ptr<PackedCircularBuffer> values_;
};

} // namespace sbt
