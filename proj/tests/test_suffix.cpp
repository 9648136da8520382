#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "sbt/savl.hpp"
#include "sbt/suffix.hpp"

using namespace sbt;

namespace {

const std::string kExample = "caatcacggtcggac";
const std::vector<size_t> kSsa = {2, 14, 6, 3, 15, 1, 5, 11, 7, 13, 12, 8, 9, 4, 10};
const std::vector<size_t> kSlcp = {0, 1, 2, 1, 0, 1, 2, 1, 3, 0, 1, 2, 1, 0, 2};
const std::string kRules = "EALLADRALALLRDA";

Text random_text(std::mt19937_64& rng, size_t n, unsigned sigma) {
    std::vector<uint8_t> bytes(n);
    for (auto& b : bytes) b = static_cast<uint8_t>('a' + rng() % sigma);
    return Text(std::move(bytes));
}

} // namespace

TEST_CASE("naive_lcp fixtures from the worked example") {
    Text t(kExample);
    CHECK(naive_lcp(t, 2, 14) == 1);
    CHECK(naive_lcp(t, 7, 11) == 3);
    CHECK(naive_lcp(t, 5, 5) == t.size() - 5 + 1);
    CHECK(naive_lcp(t, 1, 15) == 1);
}

TEST_CASE("suffix order: shorter suffix wins on prefix equality") {
    Text t("abab");
    CHECK(t.suffix_less(3, 1));   // "ab" < "abab"
    CHECK(!t.suffix_less(1, 3));
    CHECK(t.suffix_less(2, 4) == false);  // "bab" vs "b": "b" < "bab"
    CHECK(t.suffix_less(4, 2));
}

TEST_CASE("sparse suffix index reproduces the example SSA and SLCP") {
    SparseSuffixIndex idx{Text(kExample)};
    for (size_t p = 1; p <= 15; ++p) idx.insert(p);
    CHECK(idx.ssa() == kSsa);
    CHECK(idx.slcp() == kSlcp);
    REQUIRE(idx.tree().check_invariants().ok);
}

TEST_CASE("lcp queries answer via range minima over the SLCP entries") {
    SparseSuffixIndex idx{Text(kExample)};
    for (size_t p = 1; p <= 15; ++p) idx.insert(p);
    Text t(kExample);
    for (size_t i = 1; i < kSsa.size(); ++i)
        CHECK(idx.lcp_query(kSsa[i - 1], kSsa[i]) == kSlcp[i]);
    CHECK(idx.lcp_query(7, 7) == t.size() - 7 + 1);
    // all pairs against the naive oracle
    for (size_t a = 1; a <= 15; ++a)
        for (size_t b = 1; b <= 15; ++b) REQUIRE(idx.lcp_query(a, b) == naive_lcp(t, a, b));
}

TEST_CASE("deletion rewrites the successor SLCP entry by the min rule") {
    SparseSuffixIndex idx{Text(kExample)};
    for (size_t p = 1; p <= 15; ++p) idx.insert(p);
    // SSA[9] = 7 at 1-based rank 9; removing it leaves min(SLCP[9], SLCP[10]) = 0
    idx.erase(7);
    auto slcp = idx.slcp();
    auto ssa = idx.ssa();
    REQUIRE(ssa.size() == 14);
    CHECK(ssa[8] == 13);  // old rank 10 moved up
    CHECK(slcp[8] == 0);
    // cross-check the whole state against brute force
    std::vector<size_t> pos(ssa.begin(), ssa.end());
    auto [bssa, bslcp] = brute_force_ssa_slcp(Text(kExample), pos);
    CHECK(ssa == bssa);
    CHECK(slcp == bslcp);
}

TEST_CASE("random position sets match brute force through insert/erase churn") {
    std::mt19937_64 rng(41);
    for (int round = 0; round < 20; ++round) {
        size_t n = 50 + rng() % 400;
        Text t = random_text(rng, n, 2 + rng() % 3);
        SparseSuffixIndex idx(Text(t), n);
        std::vector<size_t> stored;
        std::vector<size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 1);
        std::shuffle(pool.begin(), pool.end(), rng);
        size_t m = std::min<size_t>(n, 30 + rng() % 100);
        for (size_t i = 0; i < m; ++i) {
            idx.insert(pool[i]);
            stored.push_back(pool[i]);
        }
        for (int churn = 0; churn < 60; ++churn) {
            if (!stored.empty() && (rng() & 1)) {
                size_t i = rng() % stored.size();
                idx.erase(stored[i]);
                stored.erase(stored.begin() + static_cast<std::ptrdiff_t>(i));
            } else if (m + 1 <= pool.size()) {
                idx.insert(pool[m]);
                stored.push_back(pool[m]);
                ++m;
            }
        }
        auto [bssa, bslcp] = brute_force_ssa_slcp(t, stored);
        REQUIRE(idx.ssa() == bssa);
        REQUIRE(idx.slcp() == bslcp);
        // sampled pairwise lcp queries
        for (int probe = 0; probe < 50 && stored.size() >= 2; ++probe) {
            size_t a = stored[rng() % stored.size()];
            size_t b = stored[rng() % stored.size()];
            REQUIRE(idx.lcp_query(a, b) == naive_lcp(t, a, b));
        }
        REQUIRE(idx.tree().check_invariants().ok);
    }
}

TEST_CASE("accelerated comparator builds the same structure as the naive one") {
    std::mt19937_64 rng(43);
    for (int round = 0; round < 10; ++round) {
        size_t n = 100 + rng() % 300;
        Text t = random_text(rng, n, 2);  // small alphabet -> long shared prefixes
        SparseSuffixIndex fast(Text(t), n, AggregateMode::kMerge, true);
        SparseSuffixIndex naive(Text(t), n, AggregateMode::kMerge, false);
        std::vector<size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 1);
        std::shuffle(pool.begin(), pool.end(), rng);
        size_t m = 20 + rng() % 120;
        for (size_t i = 0; i < std::min(m, n); ++i) {
            fast.insert(pool[i]);
            naive.insert(pool[i]);
        }
        REQUIRE(fast.ssa() == naive.ssa());
        REQUIRE(fast.slcp() == naive.slcp());
    }
}

TEST_CASE("savl: increasing-order build reproduces the figure annotations") {
    Text t(kExample);
    SavlTree savl(&t);
    for (size_t p = 1; p <= 15; ++p) savl.insert(p);
    CHECK(savl.ssa() == kSsa);
    auto res = savl.slcp();
    CHECK(res.slcp == kSlcp);
    CHECK(std::string(res.rules.begin(), res.rules.end()) == kRules);
    CHECK(res.node_visits <= 3 * 15);
}

TEST_CASE("savl: single node emits rank one by rule E") {
    Text t("abc");
    SavlTree savl(&t);
    savl.insert(2);
    auto res = savl.slcp();
    CHECK(res.slcp == std::vector<size_t>{0});
    CHECK(res.rules == std::vector<char>{'E'});
}

TEST_CASE("lemma_resolve cases") {
    // node 11 of the example: L = lcp(7, 5) = 1, m = 3, d = left
    Text t(kExample);
    CHECK(naive_lcp(t, 7, 5) == 1);
    CHECK(naive_lcp(t, 11, 7) == 3);
    auto [cla, cra] = lemma_resolve(1, 3, AncestorDir::kLeft);
    CHECK(cla == 3);
    CHECK(cra == 1);
    CHECK(naive_lcp(t, 11, 5) == 1);  // the lemma's cra output
    auto none = lemma_resolve(7, 0, AncestorDir::kNone);
    CHECK(none.first == 0);
    CHECK(none.second == 0);
    auto right = lemma_resolve(2, 5, AncestorDir::kRight);
    CHECK(right.first == 2);
    CHECK(right.second == 5);
}

TEST_CASE("savl slcp equals brute force on random shapes, visits within 3m") {
    std::mt19937_64 rng(47);
    for (int round = 0; round < 120; ++round) {
        size_t n = 30 + rng() % 300;
        Text t = random_text(rng, n, 2 + rng() % 4);
        std::vector<size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 1);
        std::shuffle(pool.begin(), pool.end(), rng);
        size_t m = std::min<size_t>(n, 5 + rng() % 150);
        std::vector<size_t> pos(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
        // alternate insertion orders: shuffled, increasing (degenerate path),
        // decreasing
        if (round % 3 == 1) std::sort(pos.begin(), pos.end());
        if (round % 3 == 2) std::sort(pos.begin(), pos.end(), std::greater<>());
        SavlTree savl(&t);
        for (size_t p : pos) savl.insert(p);
        auto [bssa, bslcp] = brute_force_ssa_slcp(t, pos);
        REQUIRE(savl.ssa() == bssa);
        auto res = savl.slcp();
        REQUIRE(res.slcp == bslcp);
        REQUIRE(res.node_visits <= 3 * m);
    }
}

TEST_CASE("cross-structure agreement: index and savl on the same positions") {
    std::mt19937_64 rng(53);
    for (int round = 0; round < 15; ++round) {
        size_t n = 80 + rng() % 200;
        Text t = random_text(rng, n, 3);
        std::vector<size_t> pool(n);
        std::iota(pool.begin(), pool.end(), 1);
        std::shuffle(pool.begin(), pool.end(), rng);
        size_t m = 10 + rng() % 60;
        SparseSuffixIndex idx(Text(t), n);
        SavlTree savl(&t);
        for (size_t i = 0; i < m; ++i) {
            idx.insert(pool[i]);
            savl.insert(pool[i]);
        }
        auto res = savl.slcp();
        REQUIRE(idx.ssa() == savl.ssa());
        std::vector<size_t> tree_slcp = idx.slcp();
        REQUIRE(tree_slcp == res.slcp);
    }
}

TEST_CASE("duplicate and out-of-range positions are rejected") {
    Text t(kExample);
    SparseSuffixIndex idx{Text(t)};
    idx.insert(3);
    CHECK_THROWS_AS(idx.insert(3), std::invalid_argument);
    CHECK_THROWS_AS(idx.insert(0), std::out_of_range);
    CHECK_THROWS_AS(idx.insert(16), std::out_of_range);
    CHECK_THROWS_AS(idx.erase(4), std::invalid_argument);
    SavlTree savl(&t);
    savl.insert(5);
    CHECK_THROWS_AS(savl.insert(5), std::invalid_argument);
}
