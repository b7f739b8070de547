#pragma once

// Window subranges: an outer range pinned to its absolute rank interval on
// one store state, so nested queries become rank arithmetic.

#include <cstdint>
#include <vector>

#include "rbsr/store.hpp"

namespace rbsr {

struct WindowHandle {
    HalfOpenRange outer;
    std::uint64_t rank_lo = 0;
    std::uint64_t rank_hi = 0;
    std::uint64_t store_version = 0;
    Aggregate total; // aggregate of the whole window

    std::uint64_t count() const { return rank_hi - rank_lo; }

    friend bool operator==(const WindowHandle&, const WindowHandle&) = default;
};

/// One boundary walk yields both ranks and the window aggregate.
WindowHandle window_open(const StoreView& store, const Bound& lo, const Bound& hi, OpStats* work = nullptr);

// Every call below throws StaleWindowError when the store's version differs
// from the handle's. When `work` is given, the node visits and entry scans
// of the underlying store calls are added to it.

std::uint64_t window_count(const StoreView& store, const WindowHandle& h);

/// select(rank_lo + rel); OutOfRangeError unless rel < count.
ItemKey window_select(const StoreView& store, const WindowHandle& h, std::uint64_t rel, OpStats* work = nullptr);

/// Aggregate of the items at window-relative ranks [rel_lo, rel_hi).
Aggregate window_aggregate(const StoreView& store, const WindowHandle& h, std::uint64_t rel_lo, std::uint64_t rel_hi,
                           OpStats* work = nullptr);

std::vector<ItemKey> window_enumerate(const StoreView& store, const WindowHandle& h, std::uint64_t rel_lo,
                                      std::uint64_t rel_hi, OpStats* work = nullptr);

/// Key bound at relative rank `rel`: outer.lo at 0, outer.hi at count,
/// otherwise the item at that rank.
Bound window_cut(const StoreView& store, const WindowHandle& h, std::uint64_t rel, OpStats* work = nullptr);

/// Balanced split into at most b child windows: cuts at relative ranks
/// floor(j*m/b), with consecutive equal cuts merged. Children cover the
/// window exactly and carry their own ranks and aggregates.
std::vector<WindowHandle> window_split(const StoreView& store, const WindowHandle& h, std::size_t b,
                                       OpStats* work = nullptr);

} // namespace rbsr
