#include "rbsr/window.hpp"

#include "rbsr/error.hpp"

namespace rbsr {

namespace {

void charge(const StoreView& store, OpStats* work) {
    if (work) *work += store.last_op_stats();
}

void check_fresh(const StoreView& store, const WindowHandle& h) {
    if (store.version() != h.store_version) {
        throw StaleWindowError("window opened on store version " + std::to_string(h.store_version) +
                               ", store is now at " + std::to_string(store.version()));
    }
}

void check_rel(const WindowHandle& h, std::uint64_t rel_lo, std::uint64_t rel_hi) {
    if (rel_lo > rel_hi || rel_hi > h.count()) {
        throw OutOfRangeError("relative ranks [" + std::to_string(rel_lo) + ", " + std::to_string(rel_hi) +
                              ") outside a window of " + std::to_string(h.count()));
    }
}

} // namespace

WindowHandle window_open(const StoreView& store, const Bound& lo, const Bound& hi, OpStats* work) {
    auto s = store.summarize(lo, hi);
    charge(store, work);
    return {{lo, hi}, s.rank_lo, s.rank_hi, store.version(), s.aggregate};
}

std::uint64_t window_count(const StoreView& store, const WindowHandle& h) {
    check_fresh(store, h);
    return h.count();
}

ItemKey window_select(const StoreView& store, const WindowHandle& h, std::uint64_t rel, OpStats* work) {
    check_fresh(store, h);
    if (rel >= h.count()) {
        throw OutOfRangeError("window_select(" + std::to_string(rel) + ") on a window of " + std::to_string(h.count()));
    }
    auto k = store.select(h.rank_lo + rel);
    charge(store, work);
    return k;
}

Aggregate window_aggregate(const StoreView& store, const WindowHandle& h, std::uint64_t rel_lo, std::uint64_t rel_hi,
                           OpStats* work) {
    check_fresh(store, h);
    check_rel(h, rel_lo, rel_hi);
    if (rel_lo == 0 && rel_hi == h.count()) return h.total;
    if (rel_lo == rel_hi) return Aggregate::identity(store.config());
    auto a = store.aggregate_by_rank(h.rank_lo + rel_lo, h.rank_lo + rel_hi);
    charge(store, work);
    return a;
}

std::vector<ItemKey> window_enumerate(const StoreView& store, const WindowHandle& h, std::uint64_t rel_lo,
                                      std::uint64_t rel_hi, OpStats* work) {
    check_fresh(store, h);
    check_rel(h, rel_lo, rel_hi);
    if (rel_lo == rel_hi) return {};
    auto v = store.enumerate_by_rank(h.rank_lo + rel_lo, h.rank_lo + rel_hi);
    charge(store, work);
    return v;
}

Bound window_cut(const StoreView& store, const WindowHandle& h, std::uint64_t rel, OpStats* work) {
    check_fresh(store, h);
    if (rel == 0) return h.outer.lo;
    if (rel == h.count()) return h.outer.hi;
    return window_select(store, h, rel, work);
}

std::vector<WindowHandle> window_split(const StoreView& store, const WindowHandle& h, std::size_t b, OpStats* work) {
    check_fresh(store, h);
    if (b < 2) throw ConfigError("split fanout must be at least 2");
    const std::uint64_t m = h.count();
    if (m == 0) return {h};

    struct Cut {
        Bound bound;
        std::uint64_t rank;
    };
    std::vector<Cut> cuts{{h.outer.lo, h.rank_lo}};
    for (std::size_t j = 1; j < b; ++j) {
        std::uint64_t q = static_cast<std::uint64_t>((static_cast<unsigned __int128>(j) * m) / b);
        Bound c = store.select(h.rank_lo + q);
        charge(store, work);
        if (c != cuts.back().bound) cuts.push_back({c, h.rank_lo + q});
    }
    if (h.outer.hi != cuts.back().bound) cuts.push_back({h.outer.hi, h.rank_hi});

    std::vector<WindowHandle> out;
    out.reserve(cuts.size() - 1);
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        WindowHandle c{{cuts[k].bound, cuts[k + 1].bound}, cuts[k].rank, cuts[k + 1].rank, h.store_version, {}};
        if (c.rank_lo == c.rank_hi) {
            c.total = Aggregate::identity(store.config());
        } else {
            c.total = store.aggregate_by_rank(c.rank_lo, c.rank_hi);
            charge(store, work);
        }
        out.push_back(std::move(c));
    }
    return out;
}

} // namespace rbsr
