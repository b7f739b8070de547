#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "rbsr/detail/agg_tree.hpp"
#include "rbsr/store.hpp"

namespace rbsr {

namespace detail {

// Heap-allocated nodes addressed by slot index; updates happen in place.
class MemoryNodes {
public:
    static constexpr bool kLeafLinks = true;

    MemoryNodes() = default;
    MemoryNodes(const MemoryNodes& other);
    MemoryNodes& operator=(const MemoryNodes& other);
    MemoryNodes(MemoryNodes&&) noexcept = default;
    MemoryNodes& operator=(MemoryNodes&&) noexcept = default;

    const Node& read(NodeId id) const { return *slots_[id]; }
    NodeId make_writable(NodeId id) { return id; }
    Node& mutate(NodeId id) { return *slots_[id]; }
    NodeId allocate(Node node);
    void release(NodeId id);

    std::size_t live_nodes() const { return slots_.size() - free_.size(); }

private:
    std::vector<std::unique_ptr<Node>> slots_;
    std::vector<NodeId> free_;
};

} // namespace detail

/// In-memory aggregate-augmented B+-tree. Branch entries cache the
/// (count, summary) aggregate of their subtree; leaves are chained in key
/// order. Rank and select follow one root-to-leaf path, range aggregates
/// descend only along the two boundary paths.
class AggBTree final : public Store {
public:
    static constexpr std::size_t kDefaultFanout = 16;

    /// `fanout` bounds both branch and leaf node sizes; allowed range 4..256.
    explicit AggBTree(SummaryConfig cfg = {}, std::size_t fanout = kDefaultFanout);

    const SummaryConfig& config() const override { return tree_.config(); }
    std::uint64_t size() const override { return tree_.size(); }
    Aggregate totals() const override { return tree_.totals(); }
    Aggregate aggregate(const Bound& lo, const Bound& hi) const override { return tree_.aggregate(lo, hi); }
    std::uint64_t rank(const Bound& z) const override { return tree_.rank(z); }
    ItemKey select(std::uint64_t r) const override { return tree_.select(r); }
    std::vector<ItemKey> enumerate(const Bound& lo, const Bound& hi) const override {
        return tree_.enumerate(lo, hi);
    }

    RangeSummary summarize(const Bound& lo, const Bound& hi) const override { return tree_.summarize(lo, hi); }
    Aggregate aggregate_by_rank(std::uint64_t lo, std::uint64_t hi) const override {
        return tree_.aggregate_by_rank(lo, hi);
    }
    std::vector<ItemKey> enumerate_by_rank(std::uint64_t lo, std::uint64_t hi) const override {
        return tree_.enumerate_by_rank(lo, hi);
    }

    std::uint64_t version() const override { return version_; }
    std::size_t height() const override { return tree_.height(); }
    OpStats last_op_stats() const override { return tree_.last_stats(); }
    OpStats stats() const { return tree_.last_stats(); }

    bool insert(const ItemKey& key) override;
    bool erase(const ItemKey& key) override;

    std::size_t fanout() const { return tree_.shape().max_branch; }
    std::size_t node_count() const { return tree_.nodes().live_nodes(); }

    /// Empty when every invariant holds; otherwise one line per violation.
    std::vector<std::string> validate() const;

    /// (child node id, cached aggregate) of every branch entry.
    std::vector<std::pair<detail::NodeId, Aggregate>> cached_entries() const { return tree_.cached_entries(); }

    /// Adds one to the cached count of the first entry of the root's first
    /// child branch (or of the root itself when height is 2). Test hook.
    void corrupt_cached_count_for_testing();

private:
    detail::AggTree<detail::MemoryNodes> tree_;
    std::uint64_t version_;
};

} // namespace rbsr
