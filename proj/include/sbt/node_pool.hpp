#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <memory>
#include <new>
#include <vector>

#if defined(__linux__)
#include <sys/mman.h>
#endif

namespace sbt {

/// Bump allocator with a free list, for fixed-size tree nodes. Nodes of one
/// tree pack into contiguous page-aligned chunks, independent of global heap
/// history; chunks are released wholesale when the pool dies.
class NodePool {
public:
    explicit NodePool(size_t object_size, size_t chunk_bytes = 1u << 20)
        : object_size_((object_size + 15) & ~size_t{15}), chunk_bytes_(chunk_bytes) {}

    NodePool(const NodePool&) = delete;
    NodePool& operator=(const NodePool&) = delete;

    void* allocate() {
        if (free_list_) {
            void* p = free_list_;
            free_list_ = *reinterpret_cast<void**>(free_list_);
            return p;
        }
        if (used_ + object_size_ > cap_) grow();
        void* p = cur_ + used_;
        used_ += object_size_;
        return p;
    }

    void deallocate(void* p) {
        *reinterpret_cast<void**>(p) = free_list_;
        free_list_ = p;
    }

private:
    struct ChunkDelete {
        void operator()(char* p) const { std::free(p); }
    };

    void grow() {
        size_t bytes = std::max(chunk_bytes_, object_size_);
        bytes = (bytes + 4095) & ~size_t{4095};
        char* mem = static_cast<char*>(std::aligned_alloc(4096, bytes));
        if (!mem) throw std::bad_alloc();
#if defined(__linux__) && defined(MADV_HUGEPAGE)
        madvise(mem, bytes, MADV_HUGEPAGE);
#endif
        chunks_.emplace_back(mem);
        cur_ = mem;
        used_ = 0;
        cap_ = bytes;
    }

    size_t object_size_;
    size_t chunk_bytes_;
    std::vector<std::unique_ptr<char[], ChunkDelete>> chunks_;
    char* cur_ = nullptr;
    size_t used_ = 0;
    size_t cap_ = 0;
    void* free_list_ = nullptr;
};

} // namespace sbt
