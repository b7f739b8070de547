#pragma once

#include <vector>

#include "rbsr/store.hpp"

namespace rbsr {

/// Reference store over a sorted vector. Linear-time by design; every
/// other backend is tested against it.
class SortedListStore final : public Store {
public:
    explicit SortedListStore(SummaryConfig cfg = {});
    /// Bulk build; input order and duplicates do not matter.
    static SortedListStore from_items(std::vector<ItemKey> items, SummaryConfig cfg = {});

    const SummaryConfig& config() const override { return cfg_; }
    std::uint64_t size() const override { return items_.size(); }
    Aggregate totals() const override;
    Aggregate aggregate(const Bound& lo, const Bound& hi) const override;
    std::uint64_t rank(const Bound& z) const override;
    ItemKey select(std::uint64_t r) const override;
    std::vector<ItemKey> enumerate(const Bound& lo, const Bound& hi) const override;

    RangeSummary summarize(const Bound& lo, const Bound& hi) const override;
    Aggregate aggregate_by_rank(std::uint64_t lo, std::uint64_t hi) const override;
    std::vector<ItemKey> enumerate_by_rank(std::uint64_t lo, std::uint64_t hi) const override;

    std::uint64_t version() const override { return version_; }
    std::size_t height() const override { return items_.empty() ? 0 : 1; }
    OpStats last_op_stats() const override { return stats_; }

    bool insert(const ItemKey& key) override;
    bool erase(const ItemKey& key) override;

    const std::vector<ItemKey>& items() const { return items_; }

private:
    std::size_t position(const Bound& z) const;
    Aggregate fold(std::size_t first, std::size_t last) const;

    SummaryConfig cfg_;
    std::vector<ItemKey> items_;
    std::uint64_t version_;
    mutable OpStats stats_;
};

} // namespace rbsr
