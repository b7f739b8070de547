#pragma once

#include <cstdint>
#include <vector>

#include "rbsr/core.hpp"

namespace rbsr {

/// Work counters for the most recent store operation.
struct OpStats {
    std::uint64_t nodes_visited = 0;
    std::uint64_t entries_scanned = 0;

    OpStats& operator+=(const OpStats& o) {
        nodes_visited += o.nodes_visited;
        entries_scanned += o.entries_scanned;
        return *this;
    }
};

/// Result of one two-boundary walk over [lo, hi).
struct RangeSummary {
    std::uint64_t rank_lo = 0; // items < lo
    std::uint64_t rank_hi = 0; // items < hi
    Aggregate aggregate;
};

/// Read side of a range-summarizable order-statistics store. Queries
/// with inverted bounds throw PreconditionError; select past the end
/// throws OutOfRangeError.
class StoreView {
public:
    virtual ~StoreView() = default;

    virtual const SummaryConfig& config() const = 0;

    virtual std::uint64_t size() const = 0;
    /// Aggregate of the whole set.
    virtual Aggregate totals() const = 0;
    virtual Aggregate aggregate(const Bound& lo, const Bound& hi) const = 0;
    virtual std::uint64_t rank(const Bound& z) const = 0;
    virtual ItemKey select(std::uint64_t r) const = 0;
    virtual std::vector<ItemKey> enumerate(const Bound& lo, const Bound& hi) const = 0;

    // Rank-addressed queries used by the window layer.

    /// rank(lo), rank(hi) and aggregate(lo, hi) in one walk.
    virtual RangeSummary summarize(const Bound& lo, const Bound& hi) const = 0;
    /// Aggregate of the items with absolute ranks in [lo, hi).
    virtual Aggregate aggregate_by_rank(std::uint64_t lo, std::uint64_t hi) const = 0;
    virtual std::vector<ItemKey> enumerate_by_rank(std::uint64_t lo, std::uint64_t hi) const = 0;

    /// Identifies the logical state being read. Changes on every effective
    /// mutation and is unique across all stores in the process.
    virtual std::uint64_t version() const = 0;
    /// Number of node levels touched by a root-to-leaf descent (0 if empty).
    virtual std::size_t height() const = 0;
    virtual OpStats last_op_stats() const = 0;
};

/// A store that can be updated. Set semantics: insert of a present key and
/// erase of an absent key are no-ops returning false.
class Store : public StoreView {
public:
    virtual bool insert(const ItemKey& key) = 0;
    virtual bool erase(const ItemKey& key) = 0;
};

/// Fresh value for StoreView::version().
std::uint64_t next_store_version();

} // namespace rbsr
