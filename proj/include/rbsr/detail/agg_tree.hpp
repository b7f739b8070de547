#pragma once

// Aggregate-augmented B+-tree algorithms, shared by the in-memory tree and
// the copy-on-write paged store. Storage of nodes is delegated to a policy:
//
//   const Node& read(NodeId) const;
//   NodeId make_writable(NodeId);   // copy-on-write point; may return a new id
//   Node& mutate(NodeId);           // id must come from make_writable/allocate
//   NodeId allocate(Node);
//   void release(NodeId);
//   static constexpr bool kLeafLinks;
//
// Every branch entry caches the aggregate and the smallest key of its
// subtree. A child covers [min_key, next sibling's min_key).

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rbsr/core.hpp"
#include "rbsr/error.hpp"
#include "rbsr/store.hpp"

namespace rbsr::detail {

using NodeId = std::uint64_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

struct ChildRef {
    NodeId id = kNoNode;
    Aggregate agg;
    ItemKey min_key;
};

struct Node {
    bool leaf = true;
    std::vector<ItemKey> keys;       // leaf
    std::vector<ChildRef> children;  // branch
    NodeId next = kNoNode;           // following leaf, when the policy keeps links

    std::size_t fanout() const { return leaf ? keys.size() : children.size(); }
};

struct TreeShape {
    std::size_t max_branch = 16;
    std::size_t max_leaf = 16;

    std::size_t min_branch() const { return (max_branch + 1) / 2; }
    std::size_t min_leaf() const { return (max_leaf + 1) / 2; }
};

struct TreeRoot {
    NodeId root = kNoNode;
    std::size_t height = 0;
    Aggregate total;
};

struct Violation {
    NodeId node = kNoNode;
    std::string message;
};

template <class Nodes>
class AggTree {
public:
    AggTree(Nodes nodes, TreeShape shape, SummaryConfig cfg, std::optional<TreeRoot> root = std::nullopt)
        : nodes_(std::move(nodes)), shape_(shape), cfg_(cfg) {
        if (shape_.max_branch < 4 || shape_.max_leaf < 4) throw ConfigError("tree fanout must be at least 4");
        if (root) {
            root_ = *root;
        } else {
            root_.total = Aggregate::identity(cfg_);
        }
    }

    Nodes& nodes() { return nodes_; }
    const Nodes& nodes() const { return nodes_; }
    const TreeRoot& root_state() const { return root_; }
    void set_root_state(TreeRoot r) { root_ = std::move(r); }
    const TreeShape& shape() const { return shape_; }
    const SummaryConfig& config() const { return cfg_; }

    std::uint64_t size() const { return root_.total.count; }
    const Aggregate& totals() const { return root_.total; }
    std::size_t height() const { return root_.height; }
    OpStats last_stats() const { return stats_; }

    std::uint64_t rank(const Bound& z) const {
        stats_ = {};
        if (root_.root == kNoNode || z.is_minus_infinity()) return 0;
        if (z.is_plus_infinity()) return size();
        std::uint64_t acc = 0;
        NodeId id = root_.root;
        for (;;) {
            const Node& n = visit(id);
            if (n.leaf) {
                auto pos = leaf_lower_bound(n, z);
                stats_.entries_scanned += 1;
                return acc + pos;
            }
            auto p = count_lt(n, z);
            if (p == 0) return acc;
            for (std::size_t j = 0; j + 1 < p; ++j) acc += n.children[j].agg.count;
            stats_.entries_scanned += p;
            id = n.children[p - 1].id;
        }
    }

    ItemKey select(std::uint64_t r) const {
        stats_ = {};
        if (r >= size()) {
            throw OutOfRangeError("select(" + std::to_string(r) + ") on store of size " + std::to_string(size()));
        }
        NodeId id = root_.root;
        for (;;) {
            const Node& n = visit(id);
            if (n.leaf) return n.keys[r];
            for (const auto& c : n.children) {
                ++stats_.entries_scanned;
                if (r < c.agg.count) {
                    id = c.id;
                    break;
                }
                r -= c.agg.count;
            }
        }
    }

    RangeSummary summarize(const Bound& lo, const Bound& hi) const {
        if (hi < lo) throw PreconditionError("inverted range bounds");
        stats_ = {};
        if (root_.root == kNoNode) return {0, 0, Aggregate::identity(cfg_)};
        bool lo_active = !lo.is_minus_infinity();
        bool hi_active = !hi.is_plus_infinity();
        if (!lo_active && !hi_active) return {0, size(), root_.total};
        auto w = summarize_rec(root_.root, lo, hi, lo_active, hi_active);
        return {w.rank_lo, w.rank_hi, w.aggregate};
    }

    Aggregate aggregate(const Bound& lo, const Bound& hi) const { return summarize(lo, hi).aggregate; }

    Aggregate aggregate_by_rank(std::uint64_t lo, std::uint64_t hi) const {
        if (lo > hi || hi > size()) throw OutOfRangeError("rank interval outside the store");
        stats_ = {};
        if (lo == hi) return Aggregate::identity(cfg_);
        if (lo == 0 && hi == size()) return root_.total;
        return aggregate_by_rank_rec(root_.root, lo, hi);
    }

    std::vector<ItemKey> enumerate(const Bound& lo, const Bound& hi) const {
        if (hi < lo) throw PreconditionError("inverted range bounds");
        stats_ = {};
        std::vector<ItemKey> out;
        if (root_.root == kNoNode || lo == hi) return out;
        Path path;
        NodeId id = root_.root;
        for (;;) {
            const Node& n = visit(id);
            if (n.leaf) break;
            auto i = route_le(n, lo);
            path.push_back({id, i});
            id = n.children[i].id;
        }
        const Node* leaf = &nodes_.read(id);
        std::size_t pos = leaf_lower_bound(*leaf, lo);
        for (;;) {
            for (; pos < leaf->keys.size(); ++pos) {
                ++stats_.entries_scanned;
                const ItemKey& k = leaf->keys[pos];
                if (!(hi > k)) return out;
                out.push_back(k);
            }
            id = next_leaf(path, id);
            if (id == kNoNode) return out;
            leaf = &nodes_.read(id);
            pos = 0;
        }
    }

    std::vector<ItemKey> enumerate_by_rank(std::uint64_t lo, std::uint64_t hi) const {
        if (lo > hi || hi > size()) throw OutOfRangeError("rank interval outside the store");
        stats_ = {};
        std::vector<ItemKey> out;
        if (lo == hi) return out;
        out.reserve(hi - lo);
        Path path;
        NodeId id = root_.root;
        std::uint64_t r = lo;
        for (;;) {
            const Node& n = visit(id);
            if (n.leaf) break;
            for (std::size_t i = 0; i < n.children.size(); ++i) {
                const auto& c = n.children[i];
                ++stats_.entries_scanned;
                if (r < c.agg.count) {
                    path.push_back({id, i});
                    id = c.id;
                    break;
                }
                r -= c.agg.count;
            }
        }
        const Node* leaf = &nodes_.read(id);
        auto pos = static_cast<std::size_t>(r);
        std::uint64_t remaining = hi - lo;
        for (;;) {
            for (; pos < leaf->keys.size() && remaining > 0; ++pos, --remaining) {
                ++stats_.entries_scanned;
                out.push_back(leaf->keys[pos]);
            }
            if (remaining == 0) return out;
            id = next_leaf(path, id);
            leaf = &nodes_.read(id);
            pos = 0;
        }
    }

    bool insert(const ItemKey& key) {
        stats_ = {};
        Aggregate item = Aggregate::of_item(key, cfg_);
        if (root_.root == kNoNode) {
            Node leaf;
            leaf.keys.push_back(key);
            root_.root = nodes_.allocate(std::move(leaf));
            root_.height = 1;
            root_.total = item;
            return true;
        }
        Grow g = insert_rec(root_.root, key, item);
        if (!g.inserted) return false;
        root_.root = g.id;
        if (g.sibling) {
            Node top;
            top.leaf = false;
            top.children.push_back(ChildRef{g.id, *g.split_agg, g.min_key});
            top.children.push_back(std::move(*g.sibling));
            root_.root = nodes_.allocate(std::move(top));
            ++root_.height;
        }
        root_.total.combine(item);
        return true;
    }

    bool erase(const ItemKey& key) {
        stats_ = {};
        if (root_.root == kNoNode) return false;
        Shrink s = erase_rec(root_.root, key);
        if (!s.removed) return false;
        root_.root = s.id;
        root_.total = s.agg;
        const Node& top = nodes_.read(root_.root);
        if (!top.leaf && top.children.size() == 1) {
            NodeId child = top.children[0].id;
            nodes_.release(root_.root);
            root_.root = child;
            --root_.height;
        } else if (top.leaf && top.keys.empty()) {
            nodes_.release(root_.root);
            root_.root = kNoNode;
            root_.height = 0;
        }
        return true;
    }

    /// Recomputes every cached aggregate bottom-up and checks fanout, key
    /// order, separators, uniform depth and (when kept) the leaf chain.
    std::vector<Violation> validate() const {
        std::vector<Violation> out;
        if (root_.root == kNoNode) {
            if (root_.total.count != 0 || !root_.total.summary.is_zero()) {
                out.push_back({kNoNode, "empty tree with non-identity total"});
            }
            if (root_.height != 0) out.push_back({kNoNode, "empty tree with non-zero height"});
            return out;
        }
        std::vector<NodeId> leaves;
        Check c = validate_rec(root_.root, true, 1, out, leaves);
        if (!(c.agg == root_.total)) out.push_back({root_.root, "total aggregate does not match recomputed root"});
        if (c.depth != root_.height) {
            out.push_back({root_.root, "recorded height " + std::to_string(root_.height) + " but leaves at depth " +
                                           std::to_string(c.depth)});
        }
        if constexpr (Nodes::kLeafLinks) {
            for (std::size_t j = 0; j < leaves.size(); ++j) {
                NodeId expect = j + 1 < leaves.size() ? leaves[j + 1] : kNoNode;
                if (nodes_.read(leaves[j]).next != expect) {
                    out.push_back({leaves[j], "leaf chain link does not point at the following leaf"});
                }
            }
        }
        return out;
    }

    /// (child id, cached aggregate) for every branch entry.
    std::vector<std::pair<NodeId, Aggregate>> cached_entries() const {
        std::vector<std::pair<NodeId, Aggregate>> out;
        if (root_.root == kNoNode) return out;
        std::vector<NodeId> stack{root_.root};
        while (!stack.empty()) {
            const Node& n = nodes_.read(stack.back());
            stack.pop_back();
            if (n.leaf) continue;
            for (const auto& c : n.children) {
                out.emplace_back(c.id, c.agg);
                stack.push_back(c.id);
            }
        }
        return out;
    }

    Aggregate node_aggregate(const Node& n) const {
        Aggregate acc = Aggregate::identity(cfg_);
        if (n.leaf) {
            for (const auto& k : n.keys) acc.combine(Aggregate::of_item(k, cfg_));
        } else {
            for (const auto& c : n.children) acc.combine(c.agg);
        }
        return acc;
    }

private:
    struct PathEntry {
        NodeId id;
        std::size_t index;
    };
    using Path = std::vector<PathEntry>;

    struct Walk {
        std::uint64_t rank_lo = 0;
        std::uint64_t rank_hi = 0;
        Aggregate aggregate;
    };

    struct Grow {
        bool inserted = false;
        NodeId id = kNoNode;
        ItemKey min_key;
        std::optional<Aggregate> split_agg; // left part, set on split
        std::optional<ChildRef> sibling;    // right part, set on split
    };

    struct Shrink {
        bool removed = false;
        NodeId id = kNoNode;
        Aggregate agg;
        ItemKey min_key;
        std::size_t fanout = 0;
        bool leaf = true;
    };

    struct Check {
        Aggregate agg;
        ItemKey min_key;
        ItemKey max_key;
        std::size_t depth = 0;
    };

    const Node& visit(NodeId id) const {
        ++stats_.nodes_visited;
        return nodes_.read(id);
    }

    // Children whose min_key < z.
    static std::size_t count_lt(const Node& n, const Bound& z) {
        auto it = std::partition_point(n.children.begin(), n.children.end(),
                                       [&](const ChildRef& c) { return z > c.min_key; });
        return static_cast<std::size_t>(it - n.children.begin());
    }

    // Last child whose min_key <= z, or 0.
    template <class K>
    static std::size_t route_le(const Node& n, const K& z) {
        auto it = std::partition_point(n.children.begin(), n.children.end(),
                                       [&](const ChildRef& c) { return !(z < c.min_key); });
        auto p = static_cast<std::size_t>(it - n.children.begin());
        return p == 0 ? 0 : p - 1;
    }

    static std::size_t leaf_lower_bound(const Node& n, const Bound& z) {
        if (z.is_minus_infinity()) return 0;
        if (z.is_plus_infinity()) return n.keys.size();
        return static_cast<std::size_t>(std::lower_bound(n.keys.begin(), n.keys.end(), z.key()) - n.keys.begin());
    }

    // Advances from leaf `id` to the following leaf; visits what it touches.
    NodeId next_leaf(Path& path, NodeId id) const {
        if constexpr (Nodes::kLeafLinks) {
            NodeId nx = nodes_.read(id).next;
            if (nx != kNoNode) visit(nx);
            return nx;
        } else {
            while (!path.empty()) {
                auto& top = path.back();
                const Node& parent = nodes_.read(top.id);
                if (top.index + 1 < parent.children.size()) {
                    ++top.index;
                    NodeId c = parent.children[top.index].id;
                    for (;;) {
                        const Node& cn = visit(c);
                        if (cn.leaf) return c;
                        path.push_back({c, 0});
                        c = cn.children[0].id;
                    }
                }
                path.pop_back();
            }
            return kNoNode;
        }
    }

    Walk summarize_rec(NodeId id, const Bound& lo, const Bound& hi, bool lo_active, bool hi_active) const {
        const Node& n = visit(id);
        Walk w;
        w.aggregate = Aggregate::identity(cfg_);
        if (n.leaf) {
            std::size_t a = lo_active ? leaf_lower_bound(n, lo) : 0;
            std::size_t b = hi_active ? leaf_lower_bound(n, hi) : n.keys.size();
            w.rank_lo = a;
            w.rank_hi = b;
            for (std::size_t i = a; i < b; ++i) w.aggregate.combine(Aggregate::of_item(n.keys[i], cfg_));
            stats_.entries_scanned += b - a;
            return w;
        }
        const auto& ch = n.children;
        for (std::size_t i = 0; i < ch.size(); ++i) {
            const ChildRef& c = ch[i];
            bool has_next = i + 1 < ch.size();
            if (lo_active && has_next && lo >= ch[i + 1].min_key) {
                w.rank_lo += c.agg.count;
                w.rank_hi += c.agg.count;
                continue;
            }
            if (hi_active && hi <= c.min_key) break;
            bool child_lo = lo_active && lo > c.min_key;
            bool child_hi = hi_active && !(has_next && hi >= ch[i + 1].min_key);
            if (!child_lo && !child_hi) {
                ++stats_.entries_scanned;
                w.rank_hi += c.agg.count;
                w.aggregate.combine(c.agg);
            } else {
                Walk sub = summarize_rec(c.id, lo, hi, child_lo, child_hi);
                w.rank_lo += sub.rank_lo;
                w.rank_hi += sub.rank_hi;
                w.aggregate.combine(sub.aggregate);
            }
        }
        return w;
    }

    Aggregate aggregate_by_rank_rec(NodeId id, std::uint64_t lo, std::uint64_t hi) const {
        const Node& n = visit(id);
        Aggregate acc = Aggregate::identity(cfg_);
        if (n.leaf) {
            for (auto i = lo; i < hi; ++i) acc.combine(Aggregate::of_item(n.keys[i], cfg_));
            stats_.entries_scanned += hi - lo;
            return acc;
        }
        std::uint64_t off = 0;
        for (const auto& c : n.children) {
            std::uint64_t end = off + c.agg.count;
            std::uint64_t s = std::max(lo, off);
            std::uint64_t e = std::min(hi, end);
            if (s < e) {
                if (s == off && e == end) {
                    ++stats_.entries_scanned;
                    acc.combine(c.agg);
                } else {
                    acc.combine(aggregate_by_rank_rec(c.id, s - off, e - off));
                }
            }
            off = end;
            if (off >= hi) break;
        }
        return acc;
    }

    Grow insert_rec(NodeId id, const ItemKey& key, const Aggregate& item) {
        const Node& n = visit(id);
        if (n.leaf) {
            auto pos = std::lower_bound(n.keys.begin(), n.keys.end(), key) - n.keys.begin();
            if (pos < static_cast<std::ptrdiff_t>(n.keys.size()) && n.keys[pos] == key) return {};
            NodeId wid = nodes_.make_writable(id);
            Node& w = nodes_.mutate(wid);
            w.keys.insert(w.keys.begin() + pos, key);
            Grow g;
            g.inserted = true;
            g.id = wid;
            if (w.keys.size() > shape_.max_leaf) {
                Node right;
                auto mid = static_cast<std::ptrdiff_t>(w.keys.size() / 2);
                right.keys.assign(w.keys.begin() + mid, w.keys.end());
                w.keys.resize(static_cast<std::size_t>(mid));
                right.next = w.next;
                ItemKey right_min = right.keys.front();
                Aggregate right_agg = node_aggregate(right);
                NodeId rid = nodes_.allocate(std::move(right));
                if constexpr (Nodes::kLeafLinks) w.next = rid;
                g.split_agg = node_aggregate(w);
                g.sibling = ChildRef{rid, right_agg, right_min};
            }
            g.min_key = w.keys.front();
            return g;
        }

        auto i = route_le(n, key);
        Grow sub = insert_rec(n.children[i].id, key, item);
        if (!sub.inserted) return sub;
        NodeId wid = nodes_.make_writable(id);
        Node& w = nodes_.mutate(wid);
        ChildRef& e = w.children[i];
        e.id = sub.id;
        e.min_key = sub.min_key;
        if (sub.sibling) {
            e.agg = *sub.split_agg;
            w.children.insert(w.children.begin() + static_cast<std::ptrdiff_t>(i) + 1, std::move(*sub.sibling));
        } else {
            e.agg.combine(item);
        }
        Grow g;
        g.inserted = true;
        g.id = wid;
        if (w.children.size() > shape_.max_branch) {
            Node right;
            right.leaf = false;
            auto mid = static_cast<std::ptrdiff_t>(w.children.size() / 2);
            right.children.assign(w.children.begin() + mid, w.children.end());
            w.children.resize(static_cast<std::size_t>(mid));
            ItemKey right_min = right.children.front().min_key;
            Aggregate right_agg = node_aggregate(right);
            NodeId rid = nodes_.allocate(std::move(right));
            g.split_agg = node_aggregate(w);
            g.sibling = ChildRef{rid, right_agg, right_min};
        }
        g.min_key = w.children.front().min_key;
        return g;
    }

    Shrink erase_rec(NodeId id, const ItemKey& key) {
        const Node& n = visit(id);
        if (n.leaf) {
            auto pos = std::lower_bound(n.keys.begin(), n.keys.end(), key) - n.keys.begin();
            if (pos == static_cast<std::ptrdiff_t>(n.keys.size()) || n.keys[pos] != key) return {};
            NodeId wid = nodes_.make_writable(id);
            Node& w = nodes_.mutate(wid);
            w.keys.erase(w.keys.begin() + pos);
            Shrink s;
            s.removed = true;
            s.id = wid;
            s.agg = node_aggregate(w);
            s.fanout = w.keys.size();
            s.leaf = true;
            if (!w.keys.empty()) s.min_key = w.keys.front();
            return s;
        }

        auto i = route_le(n, key);
        Shrink sub = erase_rec(n.children[i].id, key);
        if (!sub.removed) return sub;
        NodeId wid = nodes_.make_writable(id);
        Node& w = nodes_.mutate(wid);
        ChildRef& e = w.children[i];
        e.id = sub.id;
        e.agg = sub.agg;
        if (sub.fanout > 0) e.min_key = sub.min_key;
        std::size_t min_fill = sub.leaf ? shape_.min_leaf() : shape_.min_branch();
        if (sub.fanout < min_fill && w.children.size() > 1) rebalance(w, i, sub.leaf);

        Shrink s;
        s.removed = true;
        s.id = wid;
        s.agg = node_aggregate(w);
        s.fanout = w.children.size();
        s.leaf = false;
        s.min_key = w.children.front().min_key;
        return s;
    }

    // Child `i` of `parent` is under-full: borrow from a sibling or merge.
    void rebalance(Node& parent, std::size_t i, bool leaf) {
        std::size_t min_fill = leaf ? shape_.min_leaf() : shape_.min_branch();
        auto& ch = parent.children;

        if (i > 0 && visit(ch[i - 1].id).fanout() > min_fill) {
            ch[i - 1].id = nodes_.make_writable(ch[i - 1].id);
            ch[i].id = nodes_.make_writable(ch[i].id);
            Node& left = nodes_.mutate(ch[i - 1].id);
            Node& cur = nodes_.mutate(ch[i].id);
            if (leaf) {
                cur.keys.insert(cur.keys.begin(), left.keys.back());
                left.keys.pop_back();
                ch[i].agg.combine(Aggregate::of_item(cur.keys.front(), cfg_));
                ch[i].min_key = cur.keys.front();
            } else {
                cur.children.insert(cur.children.begin(), left.children.back());
                left.children.pop_back();
                ch[i].agg.combine(cur.children.front().agg);
                ch[i].min_key = cur.children.front().min_key;
            }
            ch[i - 1].agg = node_aggregate(left);
            return;
        }

        if (i + 1 < ch.size() && visit(ch[i + 1].id).fanout() > min_fill) {
            ch[i].id = nodes_.make_writable(ch[i].id);
            ch[i + 1].id = nodes_.make_writable(ch[i + 1].id);
            Node& cur = nodes_.mutate(ch[i].id);
            Node& right = nodes_.mutate(ch[i + 1].id);
            if (leaf) {
                cur.keys.push_back(right.keys.front());
                right.keys.erase(right.keys.begin());
                ch[i].agg.combine(Aggregate::of_item(cur.keys.back(), cfg_));
                ch[i + 1].min_key = right.keys.front();
            } else {
                cur.children.push_back(right.children.front());
                right.children.erase(right.children.begin());
                ch[i].agg.combine(cur.children.back().agg);
                ch[i + 1].min_key = right.children.front().min_key;
            }
            ch[i + 1].agg = node_aggregate(right);
            return;
        }

        std::size_t a = i > 0 ? i - 1 : i;
        ch[a].id = nodes_.make_writable(ch[a].id);
        Node& left = nodes_.mutate(ch[a].id);
        NodeId right_id = ch[a + 1].id;
        const Node& right = nodes_.read(right_id);
        if (leaf) {
            left.keys.insert(left.keys.end(), right.keys.begin(), right.keys.end());
            if constexpr (Nodes::kLeafLinks) left.next = right.next;
        } else {
            left.children.insert(left.children.end(), right.children.begin(), right.children.end());
        }
        ch[a].agg.combine(ch[a + 1].agg);
        ch[a].min_key = leaf ? left.keys.front() : left.children.front().min_key;
        nodes_.release(right_id);
        ch.erase(ch.begin() + static_cast<std::ptrdiff_t>(a) + 1);
    }

    Check validate_rec(NodeId id, bool is_root, std::size_t depth, std::vector<Violation>& out,
                       std::vector<NodeId>& leaves) const {
        const Node& n = nodes_.read(id);
        Check c;
        c.agg = Aggregate::identity(cfg_);
        c.depth = depth;
        std::size_t lo = is_root ? (n.leaf ? 1 : 2) : (n.leaf ? shape_.min_leaf() : shape_.min_branch());
        std::size_t hi = n.leaf ? shape_.max_leaf : shape_.max_branch;
        if (n.fanout() < lo || n.fanout() > hi) {
            out.push_back({id, "fanout " + std::to_string(n.fanout()) + " outside [" + std::to_string(lo) + ", " +
                                   std::to_string(hi) + "]"});
        }
        if (n.leaf) {
            leaves.push_back(id);
            for (std::size_t j = 0; j < n.keys.size(); ++j) {
                if (j > 0 && !(n.keys[j - 1] < n.keys[j])) {
                    out.push_back({id, "leaf keys not strictly ascending at position " + std::to_string(j)});
                }
                c.agg.combine(Aggregate::of_item(n.keys[j], cfg_));
            }
            if (!n.keys.empty()) {
                c.min_key = n.keys.front();
                c.max_key = n.keys.back();
            }
            return c;
        }
        std::optional<std::size_t> child_depth;
        for (std::size_t j = 0; j < n.children.size(); ++j) {
            const ChildRef& e = n.children[j];
            Check sub = validate_rec(e.id, false, depth + 1, out, leaves);
            if (!(sub.agg == e.agg)) {
                out.push_back({id, "child " + std::to_string(j) + " cached aggregate (" + std::to_string(e.agg.count) +
                                       ", " + e.agg.summary.to_hex() + ") != recomputed (" +
                                       std::to_string(sub.agg.count) + ", " + sub.agg.summary.to_hex() + ")"});
            }
            if (sub.min_key != e.min_key) {
                out.push_back({id, "child " + std::to_string(j) + " separator is not its smallest key"});
            }
            if (j > 0 && !(c.max_key < sub.min_key)) {
                out.push_back({id, "children " + std::to_string(j - 1) + " and " + std::to_string(j) + " overlap"});
            }
            if (child_depth && *child_depth != sub.depth) {
                out.push_back({id, "leaves at unequal depth below child " + std::to_string(j)});
            }
            child_depth = sub.depth;
            c.agg.combine(sub.agg);
            if (j == 0) c.min_key = sub.min_key;
            c.max_key = sub.max_key;
        }
        c.depth = child_depth.value_or(depth);
        return c;
    }

    Nodes nodes_;
    TreeShape shape_;
    SummaryConfig cfg_;
    TreeRoot root_;
    mutable OpStats stats_;
};

} // namespace rbsr::detail
