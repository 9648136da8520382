#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "sbt/btree.hpp"
#include "sbt/io.hpp"
#include "sbt/savl.hpp"
#include "sbt/suffix.hpp"
#include "sbt/varcode.hpp"

using json = nlohmann::ordered_json;
using namespace sbt;

namespace {

struct RunConfig {
    std::string command;
    unsigned t = 16;
    unsigned q = 0;  // 0 = derive from n0
    size_t b = 0;    // 0 = derive from n0
    unsigned k = 32;
    size_t n0 = 1ull << 20;
    std::string mode = "merge";      // batch | merge
    std::string aggregates = "off";  // off | sum | min | max
    bool compressed = false;
    std::string code = "gamma";  // gamma | delta (compressed leaves)
    uint64_t seed = 42;
    std::string in_path;
    std::string format = "text";  // text | bin
    std::string positions_path;
    std::string out_path;
    size_t random_n = 0;  // generate keys instead of reading
    size_t ops = 100000;  // verify workload size
    bool inject_fault = false;
    unsigned threads = 1;
    std::vector<unsigned> bench_sizes = {16, 18, 20};  // log2 n
    unsigned bench_reps = 3;
    std::string fixtures;
};

json config_to_json(const RunConfig& c) {
    json j;
    j["command"] = c.command;
    j["t"] = c.t;
    j["q"] = c.q;
    j["b"] = c.b;
    j["k"] = c.k;
    j["n0"] = c.n0;
    j["mode"] = c.mode;
    j["aggregates"] = c.aggregates;
    j["compressed"] = c.compressed;
    j["code"] = c.code;
    j["seed"] = c.seed;
    j["in"] = c.in_path;
    j["format"] = c.format;
    j["positions"] = c.positions_path;
    j["random_n"] = c.random_n;
    j["ops"] = c.ops;
    return j;
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.command = j.at("command");
    c.t = j.at("t");
    c.q = j.at("q");
    c.b = j.at("b");
    c.k = j.at("k");
    c.n0 = j.at("n0");
    c.mode = j.at("mode");
    c.aggregates = j.at("aggregates");
    c.compressed = j.at("compressed");
    c.code = j.at("code");
    c.seed = j.at("seed");
    c.in_path = j.at("in");
    c.format = j.at("format");
    c.positions_path = j.at("positions");
    c.random_n = j.at("random_n");
    c.ops = j.at("ops");
    return c;
}

TreeParams make_params(const RunConfig& c) {
    TreeParams p = TreeParams::with_hint(c.n0, c.k, c.t);
    if (c.q) p.q = c.q;
    if (c.b) p.b = c.b;
    return p;
}

std::optional<AggregateSpec> make_agg(const RunConfig& c) {
    if (c.aggregates == "off") return std::nullopt;
    if (c.aggregates == "sum") return AggregateSpec::sum(c.k);
    if (c.aggregates == "min") return AggregateSpec::min(c.k);
    if (c.aggregates == "max") return AggregateSpec::max(c.k);
    throw std::runtime_error("--aggregates must be off|sum|min|max");
}

AggregateMode make_mode(const RunConfig& c) {
    if (c.mode == "batch") return AggregateMode::kBatch;
    if (c.mode == "merge") return AggregateMode::kMerge;
    throw std::runtime_error("--mode must be batch|merge");
}

std::vector<uint64_t> load_keys(const RunConfig& c) {
    if (c.random_n) {
        std::mt19937_64 rng(c.seed);
        std::vector<uint64_t> keys(c.random_n);
        for (auto& k : keys) k = rng() & low_mask(c.k);
        return keys;
    }
    if (c.in_path.empty()) throw std::runtime_error("no input: pass --in or --random");
    return c.format == "bin" ? io::read_keys_binary(c.in_path, c.k)
                             : io::read_keys_text(c.in_path);
}

json stats_to_json(const TreeStats& s) {
    json j;
    j["n_keys"] = s.n_keys;
    j["n_leaves"] = s.n_leaves;
    j["n_internal"] = s.n_internal;
    j["height"] = s.height;
    j["bits_leaves"] = s.bits_leaves;
    j["bits_keys"] = s.bits_keys;
    j["bits_internal"] = s.bits_internal;
    j["bits_total"] = s.bits_total;
    j["occupancy_ratio"] = s.occupancy_ratio;
    return j;
}

json counters_to_json(const TotalCounters& t) {
    json j;
    j["inserts"] = t.inserts;
    j["erases"] = t.erases;
    j["splits"] = t.splits;
    j["rotations"] = t.rotations;
    j["repairs"] = t.repairs;
    j["batch_rebalances"] = t.batch_rebalances;
    j["fix_invocations"] = t.fix_invocations;
    j["max_leaves_touched"] = t.max_leaves_touched;
    j["max_fix_visited"] = t.max_fix_visited;
    if (t.min_rebalance_gap != std::numeric_limits<uint64_t>::max())
        j["min_rebalance_gap"] = t.min_rebalance_gap;
    return j;
}

void emit(const RunConfig& c, const json& j) {
    if (j.contains("config")) {
        // the parsed config must round-trip through its serialized form
        RunConfig back = config_from_json(j.at("config"));
        if (config_to_json(back) != j.at("config"))
            throw std::logic_error("config does not round-trip");
    }
    std::string text = j.dump(2) + "\n";
    if (c.out_path.empty()) std::cout << text;
    else io::write_text(c.out_path, text);
}

std::string fixture_dir(const RunConfig& c) {
    if (!c.fixtures.empty()) return c.fixtures;
    if (const char* env = std::getenv("SBT_FIXTURES")) return env;
    return "fixtures/v1";
}

// ------------------------------------------------------------------
// build / stats / dump

std::unique_ptr<SparseSuffixIndex> build_suffix(const RunConfig& c) {
    Text text(io::read_bytes(c.in_path));
    auto positions = io::read_positions(c.positions_path);
    auto index = std::make_unique<SparseSuffixIndex>(Text(text), positions.size(), make_mode(c));
    for (size_t p : positions) index->insert(p);
    return index;
}

std::string suffix_csv(const SparseSuffixIndex& idx) {
    auto ssa = idx.ssa();
    auto slcp = idx.slcp();
    std::string csv = "rank,pos,slcp\n";
    for (size_t i = 0; i < ssa.size(); ++i)
        csv += std::to_string(i + 1) + "," + std::to_string(ssa[i]) + "," +
               std::to_string(slcp[i]) + "\n";
    return csv;
}

template <class Storage>
int run_keyed(const RunConfig& c, bool dump_keys) {
    TreeParams p = make_params(c);
    BTree<Storage> tree(p, {}, make_agg(c), make_mode(c));
    auto keys = load_keys(c);
    for (uint64_t k : keys) {
        if (tree.aggregates_enabled()) tree.insert(k, k);
        else tree.insert(k);
    }
    if (dump_keys) {
        std::string out;
        tree.for_each_key([&](uint64_t k) { out += std::to_string(k) + "\n"; });
        if (c.out_path.empty()) std::cout << out;
        else io::write_text(c.out_path, out);
        return 0;
    }
    json j;
    j["config"] = config_to_json(c);
    j["stats"] = stats_to_json(tree.stats());
    j["counters"] = counters_to_json(tree.totals());
    auto rep = tree.check_invariants();
    j["invariants_ok"] = rep.ok;
    if (!rep.ok) j["violation"] = rep.violation;
    emit(c, j);
    return rep.ok ? 0 : 1;
}

int cmd_build(const RunConfig& c, bool dump_mode) {
    if (!c.positions_path.empty()) {
        auto index = build_suffix(c);
        if (dump_mode) {
            std::string csv = suffix_csv(*index);
            if (c.out_path.empty()) std::cout << csv;
            else io::write_text(c.out_path, csv);
            return 0;
        }
        json j;
        j["config"] = config_to_json(c);
        j["stats"] = stats_to_json(index->tree().stats());
        j["counters"] = counters_to_json(index->tree().totals());
        j["invariants_ok"] = index->tree().check_invariants().ok;
        emit(c, j);
        return 0;
    }
    if (c.compressed) {
        if (c.code == "delta") return run_keyed<DeltaLeafStorage>(c, dump_mode);
        return run_keyed<GammaLeafStorage>(c, dump_mode);
    }
    return run_keyed<PackedLeafStorage>(c, dump_mode);
}

// ------------------------------------------------------------------
// verify

struct Op {
    char kind;  // 'i' insert, 'e' erase, 'p' predecessor
    uint64_t key;
};

json op_to_json(const Op& o) {
    return json{{"op", std::string(1, o.kind)}, {"key", o.key}};
}

/// Replays ops against the tree and a multiset oracle; returns a violation
/// description or empty.
std::string replay_ops(const RunConfig& c, const std::vector<Op>& ops, size_t check_every) {
    TreeParams p = make_params(c);
    BTree<> tree(p, {}, make_agg(c), make_mode(c));
    std::multiset<uint64_t> oracle;
    size_t i = 0;
    for (const Op& o : ops) {
        ++i;
        if (o.kind == 'i') {
            if (tree.aggregates_enabled()) tree.insert(o.key, o.key);
            else tree.insert(o.key);
            oracle.insert(o.key);
        } else if (o.kind == 'e') {
            bool a = tree.erase(o.key);
            auto it = oracle.find(o.key);
            bool b = it != oracle.end();
            if (a != b) return "erase result mismatch at op " + std::to_string(i);
            if (b) oracle.erase(it);
        } else {
            auto got = tree.predecessor(o.key);
            auto it = oracle.upper_bound(o.key);
            std::optional<uint64_t> expect;
            if (it != oracle.begin()) expect = *std::prev(it);
            if (got != expect) return "predecessor mismatch at op " + std::to_string(i);
        }
        if (tree.size() != oracle.size()) return "size mismatch at op " + std::to_string(i);
        if (!tree.window_property_ok())
            return "window property violated at op " + std::to_string(i);
        if (i % check_every == 0) {
            auto rep = tree.check_invariants();
            if (!rep.ok) return rep.violation + " at op " + std::to_string(i);
        }
    }
    auto rep = tree.check_invariants();
    if (!rep.ok) return rep.violation + " at end";
    std::vector<uint64_t> a, b(oracle.begin(), oracle.end());
    tree.for_each_key([&](uint64_t k) { a.push_back(k); });
    if (a != b) return "in-order dump differs from oracle";
    return "";
}

/// Greedy repro minimization: drop ops that keep the violation alive.
std::vector<Op> minimize_ops(const RunConfig& c, std::vector<Op> ops) {
    bool changed = true;
    int rounds = 0;
    while (changed && rounds++ < 12) {
        changed = false;
        for (size_t i = ops.size(); i-- > 0;) {
            std::vector<Op> cand = ops;
            cand.erase(cand.begin() + static_cast<std::ptrdiff_t>(i));
            if (!replay_ops(c, cand, 1).empty()) {
                ops = std::move(cand);
                changed = true;
            }
        }
    }
    return ops;
}

int cmd_verify(const RunConfig& c) {
    json report;
    report["config"] = config_to_json(c);
    json checks = json::array();
    bool all_ok = true;
    auto add = [&](const std::string& name, const std::string& violation) {
        checks.push_back({{"name", name}, {"ok", violation.empty()}, {"violation", violation}});
        if (!violation.empty()) all_ok = false;
        std::cerr << (violation.empty() ? "[ ok ] " : "[FAIL] ") << name
                  << (violation.empty() ? "" : ": " + violation) << "\n";
    };

    if (c.inject_fault) {
        TreeParams p = make_params(c);
        BTree<> tree(p);
        std::mt19937_64 rng(c.seed);
        for (int i = 0; i < 2000; ++i) tree.insert(rng() & low_mask(c.k));
        tree.debug_corrupt_separator();
        auto rep = tree.check_invariants();
        add("fault-injection (expected violation)", rep.ok ? "corruption not detected" : "");
        if (!rep.ok) std::cerr << "detected: " << rep.violation << "\n";
        report["checks"] = checks;
        emit(c, report);
        return rep.ok ? 1 : 0;
    }

    // 1. oracle equivalence with invariant checks
    {
        std::mt19937_64 rng(c.seed);
        std::vector<Op> ops;
        ops.reserve(c.ops);
        for (size_t i = 0; i < c.ops; ++i) {
            unsigned a = rng() % 100;
            uint64_t key = rng() % (c.ops / 4 + 16);
            ops.push_back({a < 55 ? 'i' : (a < 85 ? 'e' : 'p'), key});
        }
        std::string v = replay_ops(c, ops, 997);
        if (!v.empty()) {
            auto mini = minimize_ops(c, ops);
            json repro = json::array();
            for (const Op& o : mini) repro.push_back(op_to_json(o));
            std::string path = c.out_path.empty() ? "repro.json" : c.out_path + ".repro.json";
            io::write_text(path, repro.dump(2) + "\n");
            std::cerr << "minimized repro (" << mini.size() << " ops) written to " << path
                      << "\n";
        }
        add("oracle equivalence + invariants", v);
    }

    // 2. aggregate modes vs brute force
    for (const char* mode : {"batch", "merge"}) {
        RunConfig ac = c;
        ac.mode = mode;
        ac.aggregates = "min";
        TreeParams p = make_params(ac);
        BTree<> tree(p, {}, make_agg(ac), make_mode(ac));
        std::multimap<uint64_t, uint64_t> mirror;
        std::mt19937_64 rng(c.seed + 1);
        std::string violation;
        for (size_t i = 0; i < c.ops / 10 && violation.empty(); ++i) {
            uint64_t k = rng() % 4096;
            if (mirror.empty() || rng() % 100 < 60) {
                uint64_t v = rng() & low_mask(c.k);
                tree.insert(k, v);
                mirror.emplace(k, v);
            } else {
                auto val = tree.access_key(k);
                if (tree.erase(k)) {
                    auto [lo, hi] = mirror.equal_range(k);
                    for (auto it = lo; it != hi; ++it)
                        if (it->second == *val) {
                            mirror.erase(it);
                            break;
                        }
                }
            }
            if (i % 5 == 0) {
                uint64_t lo = rng() % 4096, hi = lo + rng() % 512;
                uint64_t expect = low_mask(c.k);
                for (auto it = mirror.lower_bound(lo); it != mirror.end() && it->first <= hi;
                     ++it)
                    expect = std::min(expect, it->second);
                if (tree.range_aggregate(lo, hi) != expect)
                    violation = "range minimum mismatch at op " + std::to_string(i);
            }
            if (i % 512 == 0) {
                auto rep = tree.check_invariants();
                if (!rep.ok) violation = rep.violation;
            }
        }
        if (violation.empty()) {
            auto rep = tree.check_invariants();
            if (!rep.ok) violation = rep.violation;
        }
        add(std::string("aggregates vs brute force (") + mode + ")", violation);
    }

    // 3. compressed differential
    {
        TreeParams p = make_params(c);
        BTree<PackedLeafStorage> plain(p);
        BTree<GammaLeafStorage> comp(p);
        std::mt19937_64 rng(c.seed + 2);
        std::set<uint64_t> keys;
        std::string violation;
        for (size_t i = 0; i < c.ops / 10 && violation.empty(); ++i) {
            uint64_t k = 1 + rng() % 100000;
            if (keys.empty() || rng() % 100 < 60) {
                if (!keys.count(k)) {
                    plain.insert(k);
                    comp.insert(k);
                    keys.insert(k);
                }
            } else {
                bool a = plain.erase(k);
                bool b = comp.erase(k);
                if (a != b) violation = "erase mismatch";
                keys.erase(k);
            }
            if (i % 7 == 0 && plain.predecessor(k) != comp.predecessor(k))
                violation = "predecessor mismatch";
        }
        add("compressed vs plain differential", violation);
    }

    // 4. sparse suffix + SAVL cross-check on the worked example fixture
    {
        std::string violation;
        std::string dir = fixture_dir(c);
        std::string text_path = dir + "/example_text.txt";
        if (std::filesystem::exists(text_path)) {
            Text t(io::read_bytes(text_path));
            auto positions = io::read_positions(dir + "/example_positions.txt");
            SparseSuffixIndex idx{Text(t), positions.size()};
            SavlTree savl(&t);
            for (size_t p : positions) {
                idx.insert(p);
                savl.insert(p);
            }
            std::string expected = io::read_text(dir + "/example_expected.csv");
            if (suffix_csv(idx) != expected) violation = "fixture CSV mismatch";
            auto res = savl.slcp();
            std::vector<size_t> tree_slcp = idx.slcp();
            if (res.slcp != tree_slcp) violation = "savl/index slcp disagreement";
            if (savl.ssa() != idx.ssa()) violation = "savl/index ssa disagreement";
            add("sparse suffix fixture + savl cross-check", violation);
        } else {
            add("sparse suffix fixture (skipped: no fixtures at " + dir + ")", "");
        }
    }

    // 5. random savl cross-checks
    {
        std::mt19937_64 rng(c.seed + 3);
        std::string violation;
        for (int round = 0; round < 30 && violation.empty(); ++round) {
            size_t n = 50 + rng() % 300;
            std::vector<uint8_t> bytes(n);
            for (auto& by : bytes) by = static_cast<uint8_t>('a' + rng() % 3);
            Text t(std::move(bytes));
            std::vector<size_t> pool(n);
            std::iota(pool.begin(), pool.end(), 1);
            std::shuffle(pool.begin(), pool.end(), rng);
            size_t m = std::min<size_t>(n, 10 + rng() % 120);
            std::vector<size_t> pos(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
            SavlTree savl(&t);
            for (size_t p : pos) savl.insert(p);
            auto [bssa, bslcp] = brute_force_ssa_slcp(t, pos);
            auto res = savl.slcp();
            if (savl.ssa() != bssa) violation = "savl ssa mismatch";
            else if (res.slcp != bslcp) violation = "savl slcp mismatch";
            else if (res.node_visits > 3 * m) violation = "savl tour exceeded 3m visits";
        }
        add("savl vs brute force (random)", violation);
    }

    report["checks"] = checks;
    report["ok"] = all_ok;
    emit(c, report);
    return all_ok ? 0 : 1;
}

// ------------------------------------------------------------------
// bench

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

int cmd_bench(const RunConfig& c) {
    json report;
    report["config"] = config_to_json(c);
    json sizes = json::array();
    std::map<unsigned, double> pred_ns;
    for (unsigned lg : c.bench_sizes) {
        size_t n = 1ull << lg;
        RunConfig bc = c;
        bc.n0 = n;
        TreeParams p = make_params(bc);
        std::vector<double> ins_ns, pred_reps, del_ns;
        uint64_t max_touched = 0;
        uint64_t sink = 0;
        for (unsigned rep = 0; rep < c.bench_reps; ++rep) {
            std::mt19937_64 rng(c.seed + rep);
            std::vector<uint64_t> keys(n);
            for (auto& k : keys) k = rng() & low_mask(c.k);
            BTree<> tree(p);
            auto t0 = std::chrono::steady_clock::now();
            for (uint64_t k : keys) tree.insert(k);
            auto t1 = std::chrono::steady_clock::now();
            ins_ns.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() /
                             double(n));

            const size_t queries = 100000;
            std::vector<uint64_t> probes(queries);
            for (auto& k : probes) k = rng() & low_mask(c.k);
            auto t2 = std::chrono::steady_clock::now();
            if (c.threads > 1) {
                // read-only sharding: no writer is active during the batch
                std::vector<std::thread> workers;
                std::vector<uint64_t> sinks(c.threads, 0);
                size_t shard = queries / c.threads;
                for (unsigned w = 0; w < c.threads; ++w) {
                    workers.emplace_back([&, w] {
                        size_t lo = w * shard;
                        size_t hi = w + 1 == c.threads ? queries : lo + shard;
                        uint64_t s = 0;
                        for (size_t i = lo; i < hi; ++i)
                            s += tree.predecessor(probes[i]).value_or(0);
                        sinks[w] = s;
                    });
                }
                for (auto& w : workers) w.join();
                for (uint64_t s : sinks) sink += s;
            } else {
                for (uint64_t k : probes) sink += tree.predecessor(k).value_or(0);
            }
            auto t3 = std::chrono::steady_clock::now();
            pred_reps.push_back(std::chrono::duration<double, std::nano>(t3 - t2).count() /
                                double(queries));

            size_t dels = std::min<size_t>(n, 100000);
            auto t4 = std::chrono::steady_clock::now();
            for (size_t i = 0; i < dels; ++i) tree.erase(keys[i]);
            auto t5 = std::chrono::steady_clock::now();
            del_ns.push_back(std::chrono::duration<double, std::nano>(t5 - t4).count() /
                             double(dels));
            max_touched = std::max(max_touched, tree.totals().max_leaves_touched);
        }
        json entry;
        entry["log2_n"] = lg;
        entry["n"] = n;
        entry["params"] = {{"t", p.t}, {"q", p.q}, {"b", p.b}, {"k", c.k}};
        entry["insert_ns_per_op"] = median(ins_ns);
        entry["predecessor_ns_per_op"] = median(pred_reps);
        entry["erase_ns_per_op"] = median(del_ns);
        entry["max_leaves_touched"] = max_touched;
        entry["leaves_touched_bound"] = p.q + 2;
        entry["checksum"] = sink;
        sizes.push_back(entry);
        pred_ns[lg] = median(pred_reps);
    }
    report["sizes"] = sizes;
    if (pred_ns.count(18) && pred_ns.count(20))
        report["pred_growth_18_to_20"] = pred_ns[20] / pred_ns[18];

    // merge-mode aggregate workload: full block evaluations stay bounded
    {
        RunConfig ac = c;
        ac.aggregates = "min";
        ac.mode = "merge";
        ac.n0 = 1 << 16;
        TreeParams p = make_params(ac);
        BTree<> tree(p, {}, make_agg(ac), AggregateMode::kMerge);
        std::mt19937_64 rng(c.seed + 9);
        std::vector<uint64_t> alive;
        std::vector<uint64_t> evals;
        evals.reserve(20000);
        for (size_t i = 0; i < 20000; ++i) {
            if (alive.empty() || rng() % 100 < 60) {
                uint64_t k = rng() & low_mask(c.k);
                tree.insert(k, rng() & low_mask(c.k));
                alive.push_back(k);
            } else {
                size_t j = rng() % alive.size();
                tree.erase(alive[j]);
                alive[j] = alive.back();
                alive.pop_back();
            }
            evals.push_back(tree.last_op().block_evals);
        }
        std::sort(evals.begin(), evals.end());
        report["merge_mode"] = {{"block_evals_per_op_p999", evals[evals.size() * 999 / 1000]},
                                {"max_block_evals_per_op", evals.back()},
                                {"max_fix_visited", tree.totals().max_fix_visited},
                                {"fix_visit_bound", 2 * p.q + 2}};
    }
    emit(c, report);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"space-efficient B+ tree with aggregate blocks and sparse suffix indexing"};
    app.require_subcommand(1);
    RunConfig c;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--t", c.t, "internal node degree");
        sub->add_option("--q", c.q, "sibling window width (0 = from n0)");
        sub->add_option("--b", c.b, "leaf capacity in keys (0 = from n0)");
        sub->add_option("--k", c.k, "key width in bits");
        sub->add_option("--n0", c.n0, "capacity hint fixing q and b");
        sub->add_option("--mode", c.mode, "aggregate maintenance: batch|merge");
        sub->add_option("--aggregates", c.aggregates, "aggregate function: off|sum|min|max");
        sub->add_flag("--compressed", c.compressed, "difference-coded leaves");
        sub->add_option("--code", c.code, "gap code for compressed leaves: gamma|delta");
        sub->add_option("--seed", c.seed, "rng seed");
        sub->add_option("--in", c.in_path, "input file (keys, or text with --positions)");
        sub->add_option("--format", c.format, "key file format: text|bin");
        sub->add_option("--positions", c.positions_path, "suffix position file (1-based)");
        sub->add_option("--out", c.out_path, "output path (default stdout)");
        sub->add_option("--random", c.random_n, "generate this many random keys instead of --in");
        sub->add_option("--fixtures", c.fixtures, "fixture directory (or env SBT_FIXTURES)");
    };

    CLI::App* build = app.add_subcommand("build", "build a tree or suffix index, report stats");
    add_common(build);
    CLI::App* stats = app.add_subcommand("stats", "alias of build: print the stats report");
    add_common(stats);
    CLI::App* dump = app.add_subcommand("dump", "dump sorted keys, or rank,pos,slcp CSV");
    add_common(dump);
    CLI::App* verify = app.add_subcommand("verify", "run the oracle and invariant suites");
    add_common(verify);
    verify->add_option("--ops", c.ops, "workload size for the oracle suite");
    verify->add_flag("--inject-fault", c.inject_fault, "corrupt a separator, expect detection");
    CLI::App* bench = app.add_subcommand("bench", "timed batches with counters, JSON report");
    add_common(bench);
    bench->add_option("--sizes", c.bench_sizes, "log2 sizes to benchmark");
    bench->add_option("--reps", c.bench_reps, "repetitions per size (median)");
    bench->add_option("--threads", c.threads, "reader threads for predecessor batches");

    CLI11_PARSE(app, argc, argv);

    try {
        if (build->parsed()) {
            c.command = "build";
            return cmd_build(c, false);
        }
        if (stats->parsed()) {
            c.command = "stats";
            return cmd_build(c, false);
        }
        if (dump->parsed()) {
            c.command = "dump";
            return cmd_build(c, true);
        }
        if (verify->parsed()) {
            c.command = "verify";
            return cmd_verify(c);
        }
        if (bench->parsed()) {
            c.command = "bench";
            return cmd_bench(c);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
