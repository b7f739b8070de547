#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "rbsr/detail/agg_tree.hpp"
#include "rbsr/detail/page_format.hpp"
#include "rbsr/store.hpp"

namespace rbsr {

struct PagedOptions {
    std::uint32_t page_size = 4096;
    /// fdatasync data pages before publishing a meta page, and the meta after.
    bool sync = true;
};

/// Failure points for commit(), used by the crash-shape tests. The store
/// throws StorageError at the chosen point and rolls back to the last
/// committed state in memory; the file keeps whatever was written.
enum class CommitFault {
    None,
    CrashBeforeMeta, // all data pages written, meta not written
    TornDataPage,    // half of the data pages written, the last one cut short
    TornMeta,        // data pages written, meta page cut short
};

namespace detail {

// File handle plus a decoded-page cache. Committed pages are immutable, so
// the cache is shared by the writer and every snapshot.
class PageFile {
public:
    static std::shared_ptr<PageFile> create(const std::string& path, const FileHeader& header, bool sync);
    static std::shared_ptr<PageFile> open(const std::string& path, bool writable, bool sync);
    ~PageFile();

    PageFile(const PageFile&) = delete;
    PageFile& operator=(const PageFile&) = delete;

    const FileHeader& header() const { return header_; }
    const std::string& path() const { return path_; }
    bool sync_enabled() const { return sync_; }

    std::vector<std::uint8_t> read_page(std::uint64_t pgno) const;
    void write_at(std::uint64_t offset, std::span<const std::uint8_t> bytes);
    void flush();
    std::uint64_t file_size() const;

    /// Newest meta slot whose checksum verifies; throws StorageError if none.
    MetaBlock latest_meta() const;

    const Node& node(std::uint64_t pgno) const;
    void publish(std::uint64_t pgno, Node node);

    std::uint64_t pages_read() const;

private:
    PageFile(std::string path, int fd, FileHeader header, bool sync);

    std::string path_;
    int fd_;
    FileHeader header_;
    bool sync_;
    mutable std::shared_mutex mu_;
    mutable std::unordered_map<std::uint64_t, std::unique_ptr<const Node>> cache_;
    mutable std::atomic<std::uint64_t> pages_read_{0};
};

// Copy-on-write node policy over a PageFile: committed pages are never
// modified; the first write to one copies it to a fresh page number.
class PageNodes {
public:
    static constexpr bool kLeafLinks = false;

    PageNodes(std::shared_ptr<PageFile> file, std::uint64_t next_page, bool writable)
        : file_(std::move(file)), next_page_(next_page), writable_(writable) {}

    const Node& read(NodeId id) const;
    NodeId make_writable(NodeId id);
    Node& mutate(NodeId id);
    NodeId allocate(Node node);
    void release(NodeId id);

    std::uint64_t next_page() const { return next_page_; }
    const std::map<NodeId, Node>& dirty() const { return dirty_; }
    std::map<NodeId, Node> take_dirty() { return std::exchange(dirty_, {}); }
    void reset(std::uint64_t next_page) {
        dirty_.clear();
        next_page_ = next_page;
    }
    const std::shared_ptr<PageFile>& file() const { return file_; }

private:
    void require_writable() const;

    std::shared_ptr<PageFile> file_;
    std::map<NodeId, Node> dirty_;
    std::uint64_t next_page_;
    bool writable_;
};

TreeShape page_tree_shape(const FileHeader& h);

} // namespace detail

/// Read-only view of one committed transaction of a paged store. Cheap to
/// copy; copies share the file handle and page cache.
class PagedSnapshot final : public StoreView {
public:
    /// Opens the latest committed state without taking the writer token.
    static PagedSnapshot open(const std::string& path);

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

    std::uint64_t txn_id() const { return txn_id_; }

private:
    friend class PagedStore;
    PagedSnapshot(std::shared_ptr<detail::PageFile> file, const detail::MetaBlock& meta, std::uint64_t version);

    detail::AggTree<detail::PageNodes> tree_;
    std::uint64_t txn_id_;
    std::uint64_t version_;
};

/// File-backed aggregate B+-tree with copy-on-write commits and two
/// alternating meta pages. One writer per path within the process.
///
/// Mutations go into an implicit write transaction that commit() publishes
/// and abort() discards. Queries on the store see the transaction's own
/// writes; snapshots see committed state only.
class PagedStore final : public Store {
public:
    /// Fails if `path` exists and is not empty.
    static std::unique_ptr<PagedStore> create(const std::string& path, SummaryConfig cfg = {},
                                              PagedOptions opt = {});
    static std::unique_ptr<PagedStore> open(const std::string& path, bool sync = true);

    ~PagedStore() override;
    PagedStore(const PagedStore&) = delete;
    PagedStore& operator=(const PagedStore&) = delete;

    const SummaryConfig& config() const override { return tree_.config(); }
    std::uint64_t size() const override { return tree_.size(); }
    /// Read from the meta block (or the open transaction); touches no page.
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

    bool insert(const ItemKey& key) override;
    bool erase(const ItemKey& key) override;

    /// Writes dirty pages, then the meta page of txn_id()+1. Returns the new txn id.
    std::uint64_t commit();
    void abort();
    bool in_transaction() const { return version_ != committed_version_; }

    /// Last committed transaction id.
    std::uint64_t txn_id() const { return meta_.txn_id; }
    PagedSnapshot snapshot() const;

    std::uint64_t disk_bytes() const;
    std::uint32_t page_size() const { return file_->header().page_size; }
    std::size_t branch_capacity() const { return tree_.shape().max_branch; }
    std::size_t leaf_capacity() const { return tree_.shape().max_leaf; }
    std::size_t dirty_pages() const { return tree_.nodes().dirty().size(); }
    const std::string& path() const { return file_->path(); }

    /// In-memory invariant check of the current (possibly uncommitted) tree.
    std::vector<std::string> validate() const;

    /// Applies to the next commit() only.
    void inject_commit_fault(CommitFault fault) { fault_ = fault; }

private:
    PagedStore(std::shared_ptr<detail::PageFile> file, const detail::MetaBlock& meta);

    std::shared_ptr<detail::PageFile> file_;
    detail::AggTree<detail::PageNodes> tree_;
    detail::MetaBlock meta_;
    std::uint64_t version_;
    std::uint64_t committed_version_;
    CommitFault fault_ = CommitFault::None;
};

struct PageIssue {
    std::uint64_t page = 0;
    std::string message;
};

struct VerifyReport {
    std::uint64_t txn_id = 0;
    std::uint64_t pages_checked = 0;
    std::uint64_t items = 0;
    std::vector<PageIssue> issues;

    bool ok() const { return issues.empty(); }
};

/// Offline consistency check of a closed store file. Throws StorageError
/// only when the file cannot be read at all.
VerifyReport verify_file(const std::string& path);

} // namespace rbsr
