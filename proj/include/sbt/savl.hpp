#pragma once

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbt/suffix.hpp"

namespace sbt {

enum class AncestorDir : uint8_t { kNone, kLeft, kRight };

/// Given L = lcp(cla(v), cra(v)), m = m_v and d = d_v, returns
/// (lcp(v, cla(v)), lcp(v, cra(v))). Absent-ancestor lcp values are 0.
inline std::pair<size_t, size_t> lemma_resolve(size_t L, size_t m, AncestorDir d) {
    switch (d) {
        case AncestorDir::kLeft: return {m, L};
        case AncestorDir::kRight: return {L, m};
        case AncestorDir::kNone: return {0, 0};
    }
    return {0, 0};
}

/// Rule/scenario classification for each emitted SLCP entry, mirroring the
/// labels of the worked example:
///   E - node with no left child and no closest right ancestor (rank 1);
///   R - node with no left child, d = right, closest left ancestor present;
///   A - node with no left child, value taken from the closest right
///       ancestor via the lemma;
///   L - emitted for the successor by a direct left child with d = left and
///       empty right subtree;
///   D - emitted for the successor by a deeper rightmost descendant (or one
///       whose d does not point at the successor).
enum class SlcpRule : char { kE = 'E', kR = 'R', kA = 'A', kL = 'L', kD = 'D' };

struct SlcpResult {
    std::vector<size_t> slcp;
    std::vector<char> rules;     // per rank, as E/R/A/L/D
    uint64_t node_visits = 0;    // tour steps; at most 3 per node
};

/// Binary search tree over suffixes of a static text, each node annotated
/// with (d, m): the direction and length of the longer LCP with its closest
/// left/right ancestor. Built without rebalancing; the SLCP extraction
/// works on arbitrarily unbalanced shapes.
class SavlTree {
public:
    explicit SavlTree(const Text* text) : text_(text) {}

    ~SavlTree() {
        // iterative teardown: paths can be as long as the node count
        std::vector<Node*> stack;
        if (root_) stack.push_back(root_);
        while (!stack.empty()) {
            Node* n = stack.back();
            stack.pop_back();
            if (n->left) stack.push_back(n->left);
            if (n->right) stack.push_back(n->right);
            delete n;
        }
    }

    SavlTree(const SavlTree&) = delete;
    SavlTree& operator=(const SavlTree&) = delete;

    size_t size() const { return size_; }

    /// Inserts suffix start position p by plain BST descent; the running
    /// lcps with the closest left/right ancestor candidates determine the
    /// new node's (d, m).
    void insert(size_t p) {
        if (p < 1 || p > text_->size()) throw std::out_of_range("position outside the text");
        Node** link = &root_;
        size_t lcp_cla = 0;  // lcp(p, closest left ancestor so far)
        size_t lcp_cra = 0;
        bool has_cla = false, has_cra = false;
        while (*link) {
            Node* v = *link;
            if (v->pos == p) throw std::invalid_argument("duplicate position");
            size_t skip = std::min(has_cla ? lcp_cla : 0, has_cra ? lcp_cra : 0);
            size_t l = skip + text_->lcp(p + skip, v->pos + skip);
            if (text_->suffix_less(p, v->pos, l)) {
                lcp_cla = l;
                has_cla = true;
                link = &v->left;
            } else {
                lcp_cra = l;
                has_cra = true;
                link = &v->right;
            }
        }
        Node* node = new Node{p};
        if ((has_cla ? lcp_cla : 0) == 0 && (has_cra ? lcp_cra : 0) == 0) {
            node->d = AncestorDir::kNone;
            node->m = 0;
        } else if (lcp_cla >= lcp_cra) {
            node->d = AncestorDir::kLeft;
            node->m = lcp_cla;
        } else {
            node->d = AncestorDir::kRight;
            node->m = lcp_cra;
        }
        *link = node;
        ++size_;
    }

    /// In-order position dump: the sparse suffix array.
    std::vector<size_t> ssa() const {
        std::vector<size_t> out;
        out.reserve(size_);
        std::vector<const Node*> stack;
        const Node* cur = root_;
        while (cur || !stack.empty()) {
            while (cur) {
                stack.push_back(cur);
                cur = cur->left;
            }
            cur = stack.back();
            stack.pop_back();
            out.push_back(cur->pos);
            cur = cur->right;
        }
        return out;
    }

    /// Computes SLCP in one Euler tour, keeping lcp(cla(u), cra(u)) for the
    /// ancestors u of the current node on an explicit stack. Every node u
    /// resolves (lcp(u, cla), lcp(u, cra)) from (L, m, d); a node without a
    /// left child emits its own rank's entry from the cra side, a node
    /// without a right child emits its successor's entry from the cla side.
    SlcpResult slcp() const {
        SlcpResult res;
        res.slcp.assign(size_, 0);
        res.rules.assign(size_, '?');
        if (!root_) return res;
        std::vector<uint8_t> written(size_, 0);

        struct Frame {
            const Node* node;
            size_t L;  // lcp(cla(node), cra(node)), 0 when an ancestor is absent
            bool has_cla, has_cra;
            bool is_left_child;
            bool expanded;
        };
        std::vector<Frame> stack;
        stack.push_back({root_, 0, false, false, false, false});
        size_t rank = 0;
        while (!stack.empty()) {
            Frame f = stack.back();
            stack.pop_back();
            const Node* u = f.node;
            ++res.node_visits;
            auto [l_cla, l_cra] = lemma_resolve(f.L, u->m, u->d);
            if (!f.expanded) {
                // descent propagation: the left child's ancestors bracket is
                // (u, cra(u)), the right child's is (cla(u), u)
                if (u->right)
                    stack.push_back({u->right, l_cla, f.has_cla, true, false, false});
                stack.push_back({u, f.L, f.has_cla, f.has_cra, f.is_left_child, true});
                if (u->left)
                    stack.push_back({u->left, l_cra, true, f.has_cra, true, false});
                continue;
            }
            // in-order visit of u
            size_t r = rank++;
            if (!u->left) {
                assert(!written[r]);
                res.slcp[r] = l_cra;
                written[r] = 1;
                if (!f.has_cra) res.rules[r] = char(SlcpRule::kE);
                else if (u->d == AncestorDir::kRight && f.has_cla)
                    res.rules[r] = char(SlcpRule::kR);
                else res.rules[r] = char(SlcpRule::kA);
            }
            if (!u->right && f.has_cla) {
                assert(r + 1 < size_ && !written[r + 1]);
                res.slcp[r + 1] = l_cla;
                written[r + 1] = 1;
                bool direct_left = f.is_left_child && u->d == AncestorDir::kLeft;
                res.rules[r + 1] = char(direct_left ? SlcpRule::kL : SlcpRule::kD);
            }
        }
        for (size_t i = 0; i < size_; ++i)
            if (!written[i])
                throw std::logic_error("slcp rank " + std::to_string(i) + " never written");
        return res;
    }

private:
    struct Node {
        size_t pos;
        Node* left = nullptr;
        Node* right = nullptr;
        AncestorDir d = AncestorDir::kNone;
        size_t m = 0;
    };

    const Text* text_;
    Node* root_ = nullptr;
    size_t size_ = 0;
};

} // namespace sbt
