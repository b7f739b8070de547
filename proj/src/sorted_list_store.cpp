#include "rbsr/sorted_list_store.hpp"

#include <algorithm>

#include "rbsr/error.hpp"

namespace rbsr {

SortedListStore::SortedListStore(SummaryConfig cfg) : cfg_(cfg), version_(next_store_version()) {
    cfg_.validate();
}

SortedListStore SortedListStore::from_items(std::vector<ItemKey> items, SummaryConfig cfg) {
    SortedListStore store(cfg);
    std::sort(items.begin(), items.end());
    items.erase(std::unique(items.begin(), items.end()), items.end());
    store.items_ = std::move(items);
    return store;
}

std::size_t SortedListStore::position(const Bound& z) const {
    if (z.is_minus_infinity()) return 0;
    if (z.is_plus_infinity()) return items_.size();
    return static_cast<std::size_t>(std::lower_bound(items_.begin(), items_.end(), z.key()) - items_.begin());
}

Aggregate SortedListStore::fold(std::size_t first, std::size_t last) const {
    Aggregate acc = Aggregate::identity(cfg_);
    for (std::size_t i = first; i < last; ++i) acc.combine(Aggregate::of_item(items_[i], cfg_));
    stats_.entries_scanned += last - first;
    return acc;
}

Aggregate SortedListStore::totals() const {
    stats_ = {};
    return fold(0, items_.size());
}

Aggregate SortedListStore::aggregate(const Bound& lo, const Bound& hi) const {
    return summarize(lo, hi).aggregate;
}

RangeSummary SortedListStore::summarize(const Bound& lo, const Bound& hi) const {
    if (hi < lo) throw PreconditionError("inverted range bounds");
    stats_ = {};
    RangeSummary out;
    out.rank_lo = position(lo);
    out.rank_hi = position(hi);
    out.aggregate = fold(out.rank_lo, out.rank_hi);
    return out;
}

std::uint64_t SortedListStore::rank(const Bound& z) const {
    stats_ = {};
    return position(z);
}

ItemKey SortedListStore::select(std::uint64_t r) const {
    stats_ = {};
    if (r >= items_.size()) {
        throw OutOfRangeError("select(" + std::to_string(r) + ") on store of size " + std::to_string(items_.size()));
    }
    return items_[r];
}

std::vector<ItemKey> SortedListStore::enumerate(const Bound& lo, const Bound& hi) const {
    if (hi < lo) throw PreconditionError("inverted range bounds");
    stats_ = {};
    auto first = position(lo);
    auto last = position(hi);
    stats_.entries_scanned = last - first;
    return {items_.begin() + static_cast<std::ptrdiff_t>(first), items_.begin() + static_cast<std::ptrdiff_t>(last)};
}

Aggregate SortedListStore::aggregate_by_rank(std::uint64_t lo, std::uint64_t hi) const {
    if (lo > hi || hi > items_.size()) throw OutOfRangeError("rank interval outside the store");
    stats_ = {};
    return fold(lo, hi);
}

std::vector<ItemKey> SortedListStore::enumerate_by_rank(std::uint64_t lo, std::uint64_t hi) const {
    if (lo > hi || hi > items_.size()) throw OutOfRangeError("rank interval outside the store");
    stats_ = {};
    stats_.entries_scanned = hi - lo;
    return {items_.begin() + static_cast<std::ptrdiff_t>(lo), items_.begin() + static_cast<std::ptrdiff_t>(hi)};
}

bool SortedListStore::insert(const ItemKey& key) {
    stats_ = {};
    auto it = std::lower_bound(items_.begin(), items_.end(), key);
    if (it != items_.end() && *it == key) return false;
    items_.insert(it, key);
    version_ = next_store_version();
    return true;
}

bool SortedListStore::erase(const ItemKey& key) {
    stats_ = {};
    auto it = std::lower_bound(items_.begin(), items_.end(), key);
    if (it == items_.end() || *it != key) return false;
    items_.erase(it);
    version_ = next_store_version();
    return true;
}

} // namespace rbsr
