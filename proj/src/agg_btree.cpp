#include "rbsr/agg_btree.hpp"

#include "rbsr/error.hpp"

namespace rbsr {

namespace detail {

MemoryNodes::MemoryNodes(const MemoryNodes& other) : free_(other.free_) {
    slots_.reserve(other.slots_.size());
    for (const auto& s : other.slots_) slots_.push_back(s ? std::make_unique<Node>(*s) : nullptr);
}

MemoryNodes& MemoryNodes::operator=(const MemoryNodes& other) {
    if (this != &other) *this = MemoryNodes(other);
    return *this;
}

NodeId MemoryNodes::allocate(Node node) {
    if (!free_.empty()) {
        NodeId id = free_.back();
        free_.pop_back();
        slots_[id] = std::make_unique<Node>(std::move(node));
        return id;
    }
    slots_.push_back(std::make_unique<Node>(std::move(node)));
    return slots_.size() - 1;
}

void MemoryNodes::release(NodeId id) {
    slots_[id].reset();
    free_.push_back(id);
}

} // namespace detail

namespace {

detail::TreeShape shape_for(std::size_t fanout) {
    if (fanout < 4 || fanout > 256) throw ConfigError("fanout must be in [4, 256], got " + std::to_string(fanout));
    return {fanout, fanout};
}

SummaryConfig validated(SummaryConfig cfg) {
    cfg.validate();
    return cfg;
}

} // namespace

AggBTree::AggBTree(SummaryConfig cfg, std::size_t fanout)
    : tree_(detail::MemoryNodes{}, shape_for(fanout), validated(cfg)), version_(next_store_version()) {}

bool AggBTree::insert(const ItemKey& key) {
    if (!tree_.insert(key)) return false;
    version_ = next_store_version();
    return true;
}

bool AggBTree::erase(const ItemKey& key) {
    if (!tree_.erase(key)) return false;
    version_ = next_store_version();
    return true;
}

std::vector<std::string> AggBTree::validate() const {
    std::vector<std::string> out;
    for (const auto& v : tree_.validate()) {
        out.push_back("node " + (v.node == detail::kNoNode ? std::string("-") : std::to_string(v.node)) + ": " +
                      v.message);
    }
    return out;
}

void AggBTree::corrupt_cached_count_for_testing() {
    const auto& root = tree_.root_state();
    if (root.height < 2) throw PreconditionError("corruption hook needs a tree of height >= 2");
    detail::NodeId target = root.root;
    if (root.height > 2) target = tree_.nodes().read(root.root).children.front().id;
    tree_.nodes().mutate(target).children.front().agg.count += 1;
}

} // namespace rbsr
