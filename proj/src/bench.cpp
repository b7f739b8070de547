#include "rbsr/bench.hpp"

#include <stdlib.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <iomanip>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rbsr/agg_btree.hpp"
#include "rbsr/error.hpp"
#include "rbsr/paged_store.hpp"
#include "rbsr/random.hpp"
#include "rbsr/sorted_list_store.hpp"

namespace rbsr::bench {

namespace {

constexpr std::array<std::string_view, 6> kFamilyNames{"base_dense",   "base_sparse", "scale_dense",
                                                       "scale_sparse", "stress",      "stress_dyn"};
constexpr std::array<std::string_view, 5> kBackendNames{"ref", "btree", "paged", "btree+window", "paged+window"};

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Removes its directory tree on destruction.
class ScratchDir {
public:
    explicit ScratchDir(const std::filesystem::path& given) {
        if (!given.empty()) {
            std::filesystem::create_directories(given);
            path_ = given;
            return;
        }
        std::string tmpl = (std::filesystem::temp_directory_path() / "rbsr-bench-XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw StorageError("cannot create a scratch directory");
        path_ = tmpl;
        owned_ = true;
    }
    ~ScratchDir() {
        std::error_code ec;
        if (owned_) std::filesystem::remove_all(path_, ec);
    }
    ScratchDir(const ScratchDir&) = delete;
    ScratchDir& operator=(const ScratchDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    bool owned_ = false;
};

std::string unique_stem(const ScenarioSpec& spec, Backend b) {
    static std::atomic<std::uint64_t> counter{0};
    std::string name(backend_name(b));
    std::replace(name.begin(), name.end(), '+', '-');
    return spec.label() + "-" + name + "-" + std::to_string(spec.seed) + "-" + std::to_string(::getpid()) + "-" +
           std::to_string(counter++);
}

struct Pair {
    std::unique_ptr<Store> x;
    std::unique_ptr<Store> y;
    std::uint64_t disk_bytes = 0;
};

Pair build(Backend backend, const Scenario& sc, const RunOptions& opt, const ScratchDir& dir,
           const ScenarioSpec& spec) {
    Pair p;
    switch (backend) {
    case Backend::Ref:
        p.x = std::make_unique<SortedListStore>(SortedListStore::from_items(sc.x));
        p.y = std::make_unique<SortedListStore>(SortedListStore::from_items(sc.y));
        break;
    case Backend::BTree:
    case Backend::BTreeWindow: {
        auto x = std::make_unique<AggBTree>(SummaryConfig{}, opt.btree_fanout);
        auto y = std::make_unique<AggBTree>(SummaryConfig{}, opt.btree_fanout);
        for (const auto& k : sc.x) x->insert(k);
        for (const auto& k : sc.y) y->insert(k);
        p.x = std::move(x);
        p.y = std::move(y);
        break;
    }
    case Backend::Paged:
    case Backend::PagedWindow: {
        std::string stem = unique_stem(spec, backend);
        PagedOptions po{opt.page_size, opt.sync};
        auto x = PagedStore::create((dir.path() / (stem + "-x.db")).string(), {}, po);
        auto y = PagedStore::create((dir.path() / (stem + "-y.db")).string(), {}, po);
        for (const auto& k : sc.x) x->insert(k);
        for (const auto& k : sc.y) y->insert(k);
        x->commit();
        y->commit();
        p.disk_bytes = x->disk_bytes() + y->disk_bytes();
        p.x = std::move(x);
        p.y = std::move(y);
        break;
    }
    }
    return p;
}

bool windowed(Backend b) { return b == Backend::BTreeWindow || b == Backend::PagedWindow; }

void append_items(std::vector<ItemKey>& out, std::set<ItemKey>& seen, SplitMix64& rng, std::uint64_t n,
                  bool in_slice, std::vector<ItemKey>* also) {
    for (std::uint64_t k = 0; k < n; ++k) {
        ItemKey key;
        do {
            if (in_slice) {
                key.timestamp = kSliceLo + rng.below(kSliceHi - kSliceLo);
            } else if (k % 2 == 0) {
                key.timestamp = rng.below(kSliceLo);
            } else {
                key.timestamp = kSliceHi + rng.below(kUniverseHi - kSliceHi);
            }
            key.id = rng.next_id();
        } while (!seen.insert(key).second);
        out.push_back(key);
        if (also) also->push_back(key);
    }
}

std::string hex_of(const Sha256Digest& d) { return to_hex(d); }

} // namespace

std::string_view family_name(Family f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

std::optional<Family> parse_family(std::string_view name) {
    for (std::size_t k = 0; k < kFamilyNames.size(); ++k) {
        if (kFamilyNames[k] == name) return static_cast<Family>(k);
    }
    return std::nullopt;
}

std::string_view backend_name(Backend b) { return kBackendNames[static_cast<std::size_t>(b)]; }

std::optional<Backend> parse_backend(std::string_view name) {
    for (std::size_t k = 0; k < kBackendNames.size(); ++k) {
        if (kBackendNames[k] == name) return static_cast<Backend>(k);
    }
    return std::nullopt;
}

ScenarioCounts table_counts(Family f, unsigned i) {
    if (i < 1 || i > kMaxIndex) throw ConfigError("scenario index must be in 1..8");
    const std::uint64_t n = i, n2 = n * n;
    switch (f) {
    case Family::BaseDense:
        return {64 * n, 4 * n, 4 * n, 1000 * n, 200 * n, 200 * n};
    case Family::BaseSparse:
        return {128 * n, 6 * n, 6 * n, 2000 * n, 400 * n, 400 * n};
    case Family::ScaleDense:
        return {256 * n2, 8 * n, 8 * n, 4000 * n, 800 * n, 800 * n};
    case Family::ScaleSparse:
        return {512 * n, 16 * n, 16 * n, 6000 * n, 1200 * n, 1200 * n};
    case Family::Stress:
        return {1024 * n2, 64 * n, 64 * n, 8000 * n, 1600 * n, 1600 * n};
    case Family::StressDyn:
        return {4096 * n2, 1024 * n2, 1024 * n2, 4000 * n2, 800 * n2, 800 * n2};
    }
    throw ConfigError("unknown family");
}

ScenarioSpec ScenarioSpec::make(Family f, unsigned i, std::uint64_t seed) {
    ScenarioSpec s;
    s.family = f;
    s.index = i;
    s.seed = seed;
    s.counts = table_counts(f, i);
    return s;
}

std::string ScenarioSpec::label() const { return std::string(family_name(family)) + "_" + std::to_string(index); }

Scenario generate_scenario(const ScenarioSpec& spec) {
    const auto& c = spec.counts;
    SplitMix64 rng(spec.seed);
    std::set<ItemKey> seen;
    std::vector<ItemKey> common, xo, yo;
    Scenario sc;
    append_items(common, seen, rng, c.in_common, true, nullptr);
    append_items(xo, seen, rng, c.in_x_only, true, &sc.planted_have);
    append_items(yo, seen, rng, c.in_y_only, true, &sc.planted_need);
    append_items(common, seen, rng, c.out_common, false, nullptr);
    append_items(xo, seen, rng, c.out_x_only, false, nullptr);
    append_items(yo, seen, rng, c.out_y_only, false, nullptr);

    sc.x = common;
    sc.x.insert(sc.x.end(), xo.begin(), xo.end());
    sc.y = std::move(common);
    sc.y.insert(sc.y.end(), yo.begin(), yo.end());
    std::sort(sc.x.begin(), sc.x.end());
    std::sort(sc.y.begin(), sc.y.end());
    std::sort(sc.planted_have.begin(), sc.planted_have.end());
    std::sort(sc.planted_need.begin(), sc.planted_need.end());
    sc.outer = spec.slice;
    return sc;
}

RunMetrics run(Backend backend, const ScenarioSpec& spec, const RunOptions& opt) {
    return run(backend, spec, generate_scenario(spec), opt);
}

RunMetrics run(Backend backend, const ScenarioSpec& spec, const Scenario& sc, const RunOptions& opt) {
    if (opt.repeats == 0) throw ConfigError("repeats must be at least 1");
    RunMetrics m;
    m.family = std::string(family_name(spec.family));
    m.i = spec.index;
    m.backend = std::string(backend_name(backend));
    m.seed = spec.seed;

    ScratchDir dir(opt.work_dir);
    auto t0 = Clock::now();
    Pair stores = build(backend, sc, opt, dir, spec);
    m.t_prep_ms = ms_since(t0);
    m.disk_bytes = stores.disk_bytes;
    m.height = std::max(stores.x->height(), stores.y->height());

    ReconcileOptions ro;
    ro.initiator_windows = ro.responder_windows = windowed(backend);
    double total_ms = 0;
    m.ground_truth_ok = true;
    for (unsigned r = 0; r < opt.repeats; ++r) {
        auto t1 = Clock::now();
        ReconcileOutcome out = reconcile(*stores.x, *stores.y, sc.outer, opt.params, ro);
        total_ms += ms_since(t1);

        std::string hash = hex_of(out.transcript_hash);
        if (r == 0) {
            auto c = out.totals();
            m.rounds = out.rounds;
            m.messages = out.messages;
            m.bytes = out.bytes_sent;
            m.Q = c.Q;
            m.I = c.I;
            m.K = c.K;
            m.L_skip = c.L_skip;
            m.L_id = c.L_id;
            m.node_visits = c.node_visits;
            m.respond_node_visits = c.respond_node_visits;
            m.transcript_hash = hash;
            m.have = out.have;
            m.need = out.need;
        } else if (hash != m.transcript_hash) {
            m.ground_truth_ok = false;
            m.failure = "transcript changed on repeat " + std::to_string(r);
        }
        if (out.have != sc.planted_have || out.need != sc.planted_need) {
            m.ground_truth_ok = false;
            m.failure = "repeat " + std::to_string(r) + ": have " + std::to_string(out.have.size()) + "/" +
                        std::to_string(sc.planted_have.size()) + ", need " + std::to_string(out.need.size()) + "/" +
                        std::to_string(sc.planted_need.size()) + " against the planted difference";
        }
    }
    m.t_rec_ms = total_ms / opt.repeats;
    return m;
}

bool same_non_timing(const RunMetrics& a, const RunMetrics& b) {
    auto strip = [](RunMetrics m) {
        m.t_prep_ms = 0;
        m.t_rec_ms = 0;
        return m;
    };
    return strip(a) == strip(b);
}

void write_csv(std::ostream& out, const std::vector<RunMetrics>& runs) {
    out << kCsvHeader << '\n';
    for (const auto& m : runs) {
        std::ostringstream row;
        row << m.family << ',' << m.i << ',' << m.backend << ',' << m.seed << ',' << std::fixed
            << std::setprecision(3) << m.t_prep_ms << ',' << m.t_rec_ms << ',' << m.rounds << ',' << m.messages << ','
            << m.bytes << ',' << m.Q << ',' << m.I << ',' << m.K << ',' << m.node_visits << ',' << m.disk_bytes << ','
            << m.transcript_hash;
        out << row.str() << '\n';
    }
}

void write_json(std::ostream& out, const std::vector<RunMetrics>& runs) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& m : runs) {
        arr.push_back({{"family", m.family},
                       {"i", m.i},
                       {"backend", m.backend},
                       {"seed", m.seed},
                       {"t_prep_ms", m.t_prep_ms},
                       {"t_rec_ms", m.t_rec_ms},
                       {"rounds", m.rounds},
                       {"messages", m.messages},
                       {"bytes", m.bytes},
                       {"Q", m.Q},
                       {"I", m.I},
                       {"K", m.K},
                       {"node_visits", m.node_visits},
                       {"disk_bytes", m.disk_bytes},
                       {"transcript_hash", m.transcript_hash}});
    }
    out << arr.dump(2) << '\n';
}

std::vector<RunMetrics> read_json(std::istream& in) {
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(std::string("report is not JSON: ") + e.what());
    }
    if (!doc.is_array()) throw DecodeError("report must be a JSON array");
    std::vector<RunMetrics> runs;
    for (const auto& o : doc) {
        if (!o.is_object()) throw DecodeError("report entries must be objects");
        auto need = [&](const char* key, auto check) {
            if (!o.contains(key) || !check(o.at(key))) throw DecodeError(std::string("field '") + key + "' missing or mistyped");
            return o.at(key);
        };
        auto is_str = [](const nlohmann::json& v) { return v.is_string(); };
        auto is_uint = [](const nlohmann::json& v) { return v.is_number_unsigned(); };
        auto is_num = [](const nlohmann::json& v) { return v.is_number(); };
        RunMetrics m;
        m.family = need("family", is_str).get<std::string>();
        m.i = need("i", is_uint).get<unsigned>();
        m.backend = need("backend", is_str).get<std::string>();
        m.seed = need("seed", is_uint).get<std::uint64_t>();
        m.t_prep_ms = need("t_prep_ms", is_num).get<double>();
        m.t_rec_ms = need("t_rec_ms", is_num).get<double>();
        m.rounds = need("rounds", is_uint).get<std::uint64_t>();
        m.messages = need("messages", is_uint).get<std::uint64_t>();
        m.bytes = need("bytes", is_uint).get<std::uint64_t>();
        m.Q = need("Q", is_uint).get<std::uint64_t>();
        m.I = need("I", is_uint).get<std::uint64_t>();
        m.K = need("K", is_uint).get<std::uint64_t>();
        m.node_visits = need("node_visits", is_uint).get<std::uint64_t>();
        m.disk_bytes = need("disk_bytes", is_uint).get<std::uint64_t>();
        m.transcript_hash = need("transcript_hash", is_str).get<std::string>();
        runs.push_back(std::move(m));
    }
    return runs;
}

} // namespace rbsr::bench
