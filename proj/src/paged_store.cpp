#include "rbsr/paged_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <mutex>
#include <optional>
#include <set>

#include "rbsr/error.hpp"

namespace rbsr {

namespace detail {

namespace {

[[noreturn]] void io_error(const std::string& what, const std::string& path) {
    throw StorageError(what + " " + path + ": " + std::strerror(errno));
}

} // namespace

PageFile::PageFile(std::string path, int fd, FileHeader header, bool sync)
    : path_(std::move(path)), fd_(fd), header_(header), sync_(sync) {}

PageFile::~PageFile() { ::close(fd_); }

std::shared_ptr<PageFile> PageFile::create(const std::string& path, const FileHeader& header, bool sync) {
    if (!valid_page_size(header.page_size)) {
        throw ConfigError("page size must be a power of two in [512, 65536], got " + std::to_string(header.page_size));
    }
    header.cfg.validate();
    if (branch_capacity(header.page_size, header.cfg) < 4) throw ConfigError("page too small for the summary width");
    int fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd < 0) io_error("cannot create", path);
    struct stat st {};
    if (::fstat(fd, &st) != 0 || st.st_size != 0) {
        ::close(fd);
        throw StorageError("refusing to create over a non-empty file: " + path);
    }
    std::shared_ptr<PageFile> f(new PageFile(path, fd, header, sync));
    MetaBlock m;
    m.total = Aggregate::identity(header.cfg);
    auto page = encode_meta_page(header, m);
    f->write_at(0, page);
    f->write_at(header.page_size, page);
    f->flush();
    return f;
}

std::shared_ptr<PageFile> PageFile::open(const std::string& path, bool writable, bool sync) {
    int fd = ::open(path.c_str(), (writable ? O_RDWR : O_RDONLY) | O_CLOEXEC);
    if (fd < 0) io_error("cannot open", path);
    std::uint8_t prefix[kFileHeaderSize];
    auto n = ::pread(fd, prefix, sizeof prefix, 0);
    if (n != static_cast<ssize_t>(sizeof prefix)) {
        ::close(fd);
        throw StorageError("file too short for a header: " + path);
    }
    FileHeader h;
    try {
        h = decode_file_header(prefix);
    } catch (...) {
        ::close(fd);
        throw;
    }
    return std::shared_ptr<PageFile>(new PageFile(path, fd, h, sync));
}

std::vector<std::uint8_t> PageFile::read_page(std::uint64_t pgno) const {
    std::vector<std::uint8_t> buf(header_.page_size);
    std::size_t done = 0;
    while (done < buf.size()) {
        auto n = ::pread(fd_, buf.data() + done, buf.size() - done,
                         static_cast<off_t>(pgno * header_.page_size + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            io_error("read failed on", path_);
        }
        if (n == 0) throw StorageError("page " + std::to_string(pgno) + " lies beyond the end of " + path_);
        done += static_cast<std::size_t>(n);
    }
    pages_read_.fetch_add(1, std::memory_order_relaxed);
    return buf;
}

void PageFile::write_at(std::uint64_t offset, std::span<const std::uint8_t> bytes) {
    std::size_t done = 0;
    while (done < bytes.size()) {
        auto n = ::pwrite(fd_, bytes.data() + done, bytes.size() - done, static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR) continue;
            io_error("write failed on", path_);
        }
        done += static_cast<std::size_t>(n);
    }
}

void PageFile::flush() {
    if (sync_ && ::fdatasync(fd_) != 0) io_error("fdatasync failed on", path_);
}

std::uint64_t PageFile::file_size() const {
    struct stat st {};
    if (::fstat(fd_, &st) != 0) io_error("fstat failed on", path_);
    return static_cast<std::uint64_t>(st.st_size);
}

MetaBlock PageFile::latest_meta() const {
    std::optional<MetaBlock> best;
    for (std::uint64_t slot = 0; slot < 2; ++slot) {
        std::optional<MetaBlock> m;
        try {
            m = decode_meta_page(read_page(slot), header_);
        } catch (const StorageError&) {
        }
        if (m && (!best || m->txn_id > best->txn_id)) best = m;
    }
    if (!best) throw StorageError("no valid meta page in " + path_);
    return *best;
}

const Node& PageFile::node(std::uint64_t pgno) const {
    {
        std::shared_lock lock(mu_);
        auto it = cache_.find(pgno);
        if (it != cache_.end()) return *it->second;
    }
    Node n;
    try {
        n = decode_node(read_page(pgno), header_);
    } catch (const DecodeError& e) {
        throw StorageError("page " + std::to_string(pgno) + ": " + e.what());
    }
    std::unique_lock lock(mu_);
    auto [it, fresh] = cache_.emplace(pgno, std::make_unique<const Node>(std::move(n)));
    (void)fresh;
    return *it->second;
}

void PageFile::publish(std::uint64_t pgno, Node node) {
    std::unique_lock lock(mu_);
    cache_[pgno] = std::make_unique<const Node>(std::move(node));
}

std::uint64_t PageFile::pages_read() const { return pages_read_.load(std::memory_order_relaxed); }

void PageNodes::require_writable() const {
    if (!writable_) throw StorageError("snapshot is read-only");
}

const Node& PageNodes::read(NodeId id) const {
    auto it = dirty_.find(id);
    if (it != dirty_.end()) return it->second;
    return file_->node(id);
}

NodeId PageNodes::make_writable(NodeId id) {
    require_writable();
    if (dirty_.count(id)) return id;
    Node copy = file_->node(id);
    NodeId fresh = next_page_++;
    dirty_.emplace(fresh, std::move(copy));
    return fresh;
}

Node& PageNodes::mutate(NodeId id) {
    auto it = dirty_.find(id);
    if (it == dirty_.end()) throw StorageError("page " + std::to_string(id) + " mutated without a copy");
    return it->second;
}

NodeId PageNodes::allocate(Node node) {
    require_writable();
    NodeId fresh = next_page_++;
    dirty_.emplace(fresh, std::move(node));
    return fresh;
}

void PageNodes::release(NodeId id) { dirty_.erase(id); }

TreeShape page_tree_shape(const FileHeader& h) {
    return {branch_capacity(h.page_size, h.cfg), leaf_capacity(h.page_size)};
}

} // namespace detail

namespace {

detail::TreeRoot root_of(const detail::MetaBlock& m) { return {m.root_page, m.height, m.total}; }

std::mutex g_writers_mu;
std::set<std::string> g_writers;

std::string writer_key(const std::string& path) {
    return std::filesystem::weakly_canonical(std::filesystem::absolute(path)).string();
}

void claim_writer(const std::string& path) {
    std::lock_guard lock(g_writers_mu);
    if (!g_writers.insert(writer_key(path)).second) {
        throw StorageError("another writer already holds " + path);
    }
}

void release_writer(const std::string& path) {
    std::lock_guard lock(g_writers_mu);
    g_writers.erase(writer_key(path));
}

} // namespace

PagedSnapshot::PagedSnapshot(std::shared_ptr<detail::PageFile> file, const detail::MetaBlock& meta,
                             std::uint64_t version)
    : tree_(detail::PageNodes(file, meta.next_page, false), detail::page_tree_shape(file->header()),
            file->header().cfg, root_of(meta)),
      txn_id_(meta.txn_id),
      version_(version) {}

PagedSnapshot PagedSnapshot::open(const std::string& path) {
    auto file = detail::PageFile::open(path, false, false);
    auto meta = file->latest_meta();
    return PagedSnapshot(file, meta, next_store_version());
}

PagedStore::PagedStore(std::shared_ptr<detail::PageFile> file, const detail::MetaBlock& meta)
    : file_(file),
      tree_(detail::PageNodes(file, meta.next_page, true), detail::page_tree_shape(file->header()),
            file->header().cfg, root_of(meta)),
      meta_(meta),
      version_(next_store_version()),
      committed_version_(version_) {}

PagedStore::~PagedStore() { release_writer(file_->path()); }

std::unique_ptr<PagedStore> PagedStore::create(const std::string& path, SummaryConfig cfg, PagedOptions opt) {
    cfg.validate();
    claim_writer(path);
    try {
        detail::FileHeader h;
        h.page_size = opt.page_size;
        h.cfg = cfg;
        auto file = detail::PageFile::create(path, h, opt.sync);
        return std::unique_ptr<PagedStore>(new PagedStore(file, file->latest_meta()));
    } catch (...) {
        release_writer(path);
        throw;
    }
}

std::unique_ptr<PagedStore> PagedStore::open(const std::string& path, bool sync) {
    claim_writer(path);
    try {
        auto file = detail::PageFile::open(path, true, sync);
        auto meta = file->latest_meta();
        if (file->file_size() < meta.next_page * file->header().page_size) {
            throw StorageError("file is shorter than its committed page count: " + path);
        }
        return std::unique_ptr<PagedStore>(new PagedStore(file, meta));
    } catch (...) {
        release_writer(path);
        throw;
    }
}

bool PagedStore::insert(const ItemKey& key) {
    if (!tree_.insert(key)) return false;
    version_ = next_store_version();
    return true;
}

bool PagedStore::erase(const ItemKey& key) {
    if (!tree_.erase(key)) return false;
    version_ = next_store_version();
    return true;
}

void PagedStore::abort() {
    tree_.nodes().reset(meta_.next_page);
    tree_.set_root_state(root_of(meta_));
    version_ = committed_version_;
}

std::uint64_t PagedStore::commit() {
    CommitFault fault = std::exchange(fault_, CommitFault::None);
    const auto& h = file_->header();
    auto& nodes = tree_.nodes();
    const auto& root = tree_.root_state();

    detail::MetaBlock next;
    next.txn_id = meta_.txn_id + 1;
    next.root_page = root.root;
    next.height = static_cast<std::uint32_t>(root.height);
    next.next_page = nodes.next_page();
    next.total = root.total;

    try {
        std::vector<std::pair<std::uint64_t, std::vector<std::uint8_t>>> pages;
        pages.reserve(nodes.dirty().size());
        for (const auto& [pgno, node] : nodes.dirty()) pages.emplace_back(pgno, detail::encode_node(node, h));

        std::size_t limit = pages.size();
        if (fault == CommitFault::TornDataPage) limit = (pages.size() + 1) / 2;
        for (std::size_t i = 0; i < limit; ++i) {
            std::span<const std::uint8_t> bytes = pages[i].second;
            if (fault == CommitFault::TornDataPage && i + 1 == limit) bytes = bytes.first(bytes.size() / 2);
            file_->write_at(pages[i].first * h.page_size, bytes);
        }
        if (fault == CommitFault::TornDataPage) throw StorageError("simulated crash while writing data pages");
        file_->flush();
        if (fault == CommitFault::CrashBeforeMeta) throw StorageError("simulated crash before meta publish");

        auto meta_page = detail::encode_meta_page(h, next);
        std::span<const std::uint8_t> meta_bytes = meta_page;
        if (fault == CommitFault::TornMeta) meta_bytes = meta_bytes.first(detail::meta_crc_offset(h.cfg) / 2);
        file_->write_at((next.txn_id % 2) * h.page_size, meta_bytes);
        if (fault == CommitFault::TornMeta) throw StorageError("simulated crash while writing the meta page");
        file_->flush();
    } catch (...) {
        abort();
        throw;
    }

    for (auto& [pgno, node] : nodes.take_dirty()) file_->publish(pgno, std::move(node));
    meta_ = next;
    committed_version_ = version_;
    return meta_.txn_id;
}

PagedSnapshot PagedStore::snapshot() const { return PagedSnapshot(file_, meta_, committed_version_); }

std::uint64_t PagedStore::disk_bytes() const { return file_->file_size(); }

std::vector<std::string> PagedStore::validate() const {
    std::vector<std::string> out;
    for (const auto& v : tree_.validate()) {
        out.push_back("page " + (v.node == detail::kNoNode ? std::string("-") : std::to_string(v.node)) + ": " +
                      v.message);
    }
    return out;
}

namespace {

struct Verifier {
    const detail::PageFile& file;
    const detail::MetaBlock& meta;
    detail::TreeShape shape;
    VerifyReport& report;
    std::set<std::uint64_t> seen;
    std::optional<ItemKey> last_key;

    struct Sub {
        Aggregate agg;
        ItemKey min_key;
        std::size_t depth = 0;
    };

    void issue(std::uint64_t page, std::string msg) { report.issues.push_back({page, std::move(msg)}); }

    std::optional<Sub> walk(std::uint64_t pgno, bool is_root, std::size_t depth) {
        const auto& cfg = file.header().cfg;
        if (pgno < detail::kFirstNodePage || pgno >= meta.next_page) {
            issue(pgno, "page number outside the committed range");
            return std::nullopt;
        }
        if (!seen.insert(pgno).second) {
            issue(pgno, "page referenced more than once");
            return std::nullopt;
        }
        detail::Node n;
        try {
            n = detail::decode_node(file.read_page(pgno), file.header());
        } catch (const Error& e) {
            issue(pgno, e.what());
            return std::nullopt;
        }
        ++report.pages_checked;
        std::size_t lo = is_root ? (n.leaf ? 1 : 2) : (n.leaf ? shape.min_leaf() : shape.min_branch());
        if (n.fanout() < lo) issue(pgno, "under-full page: " + std::to_string(n.fanout()) + " records");

        Sub s;
        s.agg = Aggregate::identity(cfg);
        s.depth = depth;
        if (n.leaf) {
            for (const auto& k : n.keys) {
                if (last_key && !(*last_key < k)) issue(pgno, "leaf keys out of order");
                last_key = k;
                s.agg.combine(Aggregate::of_item(k, cfg));
            }
            s.min_key = n.keys.front();
            report.items += n.keys.size();
            return s;
        }
        std::optional<std::size_t> child_depth;
        for (std::size_t j = 0; j < n.children.size(); ++j) {
            const auto& c = n.children[j];
            auto sub = walk(c.id, false, depth + 1);
            if (!sub) continue;
            if (c.agg.count != sub->agg.count) {
                issue(pgno, "record " + std::to_string(j) + " entries " + std::to_string(c.agg.count) +
                                " != recomputed " + std::to_string(sub->agg.count));
            }
            if (!(c.agg.summary == sub->agg.summary)) {
                issue(pgno, "record " + std::to_string(j) + " hashsum does not match its subtree");
            }
            if (c.min_key != sub->min_key) issue(pgno, "record " + std::to_string(j) + " separator is not the child's smallest key");
            if (child_depth && *child_depth != sub->depth) issue(pgno, "children at unequal depth");
            child_depth = sub->depth;
            s.agg.combine(sub->agg);
            if (j == 0) s.min_key = sub->min_key;
        }
        s.depth = child_depth.value_or(depth);
        return s;
    }
};

} // namespace

VerifyReport verify_file(const std::string& path) {
    VerifyReport report;
    std::shared_ptr<detail::PageFile> file;
    try {
        file = detail::PageFile::open(path, false, false);
    } catch (const StorageError& e) {
        if (!std::filesystem::exists(path)) throw;
        report.issues.push_back({0, std::string("header: ") + e.what()});
        return report;
    }
    const auto& h = file->header();

    std::optional<detail::MetaBlock> best;
    std::uint64_t best_slot = 0;
    for (std::uint64_t slot = 0; slot < 2; ++slot) {
        std::optional<detail::MetaBlock> m;
        try {
            m = detail::decode_meta_page(file->read_page(slot), h);
        } catch (const StorageError&) {
        }
        if (!m) {
            report.issues.push_back({slot, "meta page fails its checksum"});
            continue;
        }
        if (!best || m->txn_id > best->txn_id) {
            best = m;
            best_slot = slot;
        }
    }
    if (!best) return report;
    report.txn_id = best->txn_id;
    if (file->file_size() < best->next_page * h.page_size) {
        report.issues.push_back({best_slot, "file is shorter than the committed page count"});
    }
    if (best->root_page == detail::kNoPage) {
        if (best->total.count != 0 || !best->total.summary.is_zero() || best->height != 0) {
            report.issues.push_back({best_slot, "empty tree with non-identity totals"});
        }
        return report;
    }

    Verifier v{*file, *best, detail::page_tree_shape(h), report, {}, {}};
    auto root = v.walk(best->root_page, true, 1);
    if (root) {
        if (!(root->agg == best->total)) report.issues.push_back({best_slot, "meta totals do not match the tree"});
        if (root->depth != best->height) report.issues.push_back({best_slot, "meta height does not match the tree"});
    }
    return report;
}

} // namespace rbsr
