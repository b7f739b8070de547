#include <doctest.h>

#include <fstream>
#include <iterator>
#include <thread>

#include "rbsr/codec.hpp"
#include "rbsr/error.hpp"
#include "rbsr/paged_store.hpp"
#include "rbsr/sorted_list_store.hpp"
#include "support/oracle.hpp"
#include "support/script.hpp"
#include "support/tempdir.hpp"

using namespace rbsr;
using testing_support::TempDir;

namespace {

PagedOptions fast(std::uint32_t page_size = 4096) { return {page_size, false}; }

std::vector<std::uint8_t> file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_byte(const std::string& path, std::uint64_t offset, std::uint8_t value) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(static_cast<std::streamoff>(offset));
    f.put(static_cast<char>(value));
}

std::uint8_t read_byte(const std::string& path, std::uint64_t offset) { return file_bytes(path).at(offset); }

std::vector<ItemKey> random_keys(std::uint64_t seed, std::size_t n) {
    SplitMix64 rng(seed);
    std::vector<ItemKey> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(ItemKey{rng.next(), rng.next_id()});
    return out;
}

// Compares every query kind on a few hundred random inputs.
void check_same_answers(const StoreView& a, const StoreView& b, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<ItemKey> pool = b.enumerate(Bound::minus_infinity(), Bound::plus_infinity());
    REQUIRE(a.size() == b.size());
    CHECK(a.totals() == b.totals());
    for (unsigned i = 0; i < 400; ++i) {
        auto err = script::compare_query(a, b, rng, pool, i, ~0ULL);
        REQUIRE_MESSAGE(!err, err.value_or(""));
    }
}

} // namespace

TEST_CASE("page capacities follow from the page size") {
    detail::FileHeader h;
    CHECK(detail::branch_record_size(h.cfg) == 88);
    CHECK(detail::branch_capacity(4096, h.cfg) == 46);
    CHECK(detail::leaf_capacity(4096) == 102);
    CHECK(detail::branch_capacity(512, h.cfg) == 5);
    CHECK(detail::branch_capacity(4096, oracle::width8()) == 71);
    CHECK(detail::valid_page_size(4096));
    CHECK_FALSE(detail::valid_page_size(256));
    CHECK_FALSE(detail::valid_page_size(3000));
}

TEST_CASE("node pages round-trip bit-exactly") {
    SplitMix64 rng(3);
    for (unsigned width : {8u, 256u}) {
        detail::FileHeader h;
        h.cfg = SummaryConfig::with_width(width, 8);
        for (int round = 0; round < 50; ++round) {
            detail::Node leaf;
            auto n = 1 + rng.below(detail::leaf_capacity(h.page_size));
            for (std::uint64_t i = 0; i < n; ++i) leaf.keys.push_back(ItemKey{i, rng.next_id()});
            auto page = detail::encode_node(leaf, h);
            CHECK(page.size() == h.page_size);
            auto back = detail::decode_node(page, h);
            CHECK(back.leaf);
            CHECK(back.keys == leaf.keys);
            CHECK(detail::encode_node(back, h) == page);

            detail::Node branch;
            branch.leaf = false;
            auto m = 1 + rng.below(detail::branch_capacity(h.page_size, h.cfg));
            for (std::uint64_t i = 0; i < m; ++i) {
                auto id = rng.next_id();
                branch.children.push_back({rng.next(), {rng.next(), Summary::from_big_endian(std::span(id).first(width / 8), width)},
                                           ItemKey{rng.next(), rng.next_id()}});
            }
            page = detail::encode_node(branch, h);
            auto bback = detail::decode_node(page, h);
            REQUIRE(bback.children.size() == m);
            for (std::size_t i = 0; i < m; ++i) {
                CHECK(bback.children[i].id == branch.children[i].id);
                CHECK(bback.children[i].agg == branch.children[i].agg);
                CHECK(bback.children[i].min_key == branch.children[i].min_key);
            }
            CHECK(detail::encode_node(bback, h) == page);
        }
    }
}

TEST_CASE("branch record layout") {
    detail::FileHeader h;
    detail::Node branch;
    branch.leaf = false;
    auto s = Summary::from_big_endian(std::vector<std::uint8_t>{0x01, 0x02}, 256);
    branch.children.push_back({0x0807060504030201ULL, {5, s}, make_key(10, {0xa1})});
    auto page = detail::encode_node(branch, h);
    CHECK(page[0] == 1);    // branch
    CHECK(page[1] == 0x03); // ENTRIES | HASHSUM
    CHECK(page[2] == 1);
    CHECK(page[16] == 0x01); // child page number, little-endian
    CHECK(page[23] == 0x08);
    CHECK(page[24] == 5);    // entries
    CHECK(page[32] == 0x02); // hashsum, little-endian
    CHECK(page[33] == 0x01);
    CHECK(page[64 + 7] == 0x0a); // separator key, big-endian timestamp
    CHECK(page[64 + 8] == 0xa1);
}

TEST_CASE("meta pages round-trip and reject bad checksums") {
    detail::FileHeader h;
    detail::MetaBlock m;
    m.txn_id = 7;
    m.root_page = 12;
    m.height = 3;
    m.next_page = 40;
    m.total = {99, Summary::from_big_endian(std::vector<std::uint8_t>{0xab}, 256)};
    auto page = detail::encode_meta_page(h, m);
    auto back = detail::decode_meta_page(page, h);
    REQUIRE(back);
    CHECK(back->txn_id == 7);
    CHECK(back->root_page == 12);
    CHECK(back->height == 3);
    CHECK(back->next_page == 40);
    CHECK(back->total == m.total);
    page[30] ^= 0x40;
    CHECK_FALSE(detail::decode_meta_page(page, h));

    auto good = detail::encode_meta_page(h, m);
    good[0] = 'X';
    CHECK_THROWS_AS(detail::decode_file_header(good), StorageError);
}

TEST_CASE("create and open an empty store") {
    TempDir dir;
    auto path = dir.file("a.db");
    {
        auto s = PagedStore::create(path, {}, fast());
        CHECK(s->size() == 0);
        CHECK(s->txn_id() == 0);
        CHECK(s->branch_capacity() == 46);
        CHECK(s->leaf_capacity() == 102);
        CHECK(s->disk_bytes() == 2 * 4096);
    }
    auto s = PagedStore::open(path, false);
    CHECK(s->size() == 0);
    CHECK(s->height() == 0);
    CHECK(s->txn_id() == 0);
    CHECK(s->enumerate(Bound::minus_infinity(), Bound::plus_infinity()).empty());
    CHECK(verify_file(path).ok());
}

TEST_CASE("create and open failures") {
    TempDir dir;
    auto path = dir.file("x.db");
    {
        std::ofstream out(path);
        out << "not a store";
    }
    CHECK_THROWS_AS(PagedStore::create(path, {}, fast()), StorageError);
    CHECK_THROWS_AS(PagedStore::open(path), StorageError);
    CHECK_THROWS_AS(PagedStore::open(dir.file("missing.db")), StorageError);
    CHECK_THROWS_AS(PagedStore::create(dir.file("y.db"), {}, fast(1000)), ConfigError);

    auto good = dir.file("good.db");
    { auto s = PagedStore::create(good, {}, fast()); }
    write_byte(good, 9, 0x20); // page_size field
    CHECK_THROWS_AS(PagedStore::open(good), StorageError);
    CHECK_FALSE(verify_file(good).ok());
}

TEST_CASE("one writer per path") {
    TempDir dir;
    auto path = dir.file("w.db");
    auto s = PagedStore::create(path, {}, fast());
    CHECK_THROWS_AS(PagedStore::open(path), StorageError);
    CHECK_NOTHROW(PagedSnapshot::open(path));
    s.reset();
    CHECK_NOTHROW(PagedStore::open(path));
}

TEST_CASE("persistence round trip after 1000 inserts") {
    TempDir dir;
    auto path = dir.file("p.db");
    auto keys = random_keys(11, 1000);
    auto ref = SortedListStore::from_items(keys);
    {
        auto s = PagedStore::create(path, {}, fast());
        for (const auto& k : keys) s->insert(k);
        CHECK(s->commit() == 1);
        check_same_answers(*s, ref, 1);
        CHECK(s->disk_bytes() % 4096 == 0);
    }
    auto report = verify_file(path);
    CHECK(report.ok());
    CHECK(report.items == 1000);
    auto s = PagedStore::open(path, false);
    CHECK(s->txn_id() == 1);
    check_same_answers(*s, ref, 2);
    CHECK(s->validate().empty());
}

TEST_CASE("abort discards the transaction") {
    TempDir dir;
    auto path = dir.file("abort.db");
    auto s = PagedStore::create(path, {}, fast(512));
    for (const auto& k : random_keys(5, 300)) s->insert(k);
    s->commit();
    auto before_bytes = file_bytes(path);
    auto totals = s->totals();
    auto version = s->version();
    auto items = s->enumerate(Bound::minus_infinity(), Bound::plus_infinity());

    for (const auto& k : random_keys(6, 200)) s->insert(k);
    for (std::size_t i = 0; i < 100; ++i) s->erase(items[i * 2]);
    CHECK(s->in_transaction());
    CHECK(s->version() != version);
    s->abort();
    CHECK_FALSE(s->in_transaction());
    CHECK(s->version() == version);
    CHECK(s->totals() == totals);
    CHECK(s->enumerate(Bound::minus_infinity(), Bound::plus_infinity()) == items);
    CHECK(s->dirty_pages() == 0);
    CHECK(file_bytes(path) == before_bytes);
    CHECK(s->validate().empty());
}

TEST_CASE("scripted equivalence with periodic commits") {
    for (std::uint32_t page_size : {512u, 4096u}) {
        CAPTURE(page_size);
        TempDir dir;
        auto path = dir.file("s.db");
        auto s = PagedStore::create(path, {}, fast(page_size));
        script::Options opt;
        opt.ops = 6000;
        opt.checkpoint_every = 50;
        opt.ts_span = 1024;
        auto err = script::run(*s, page_size, opt, [&]() -> std::optional<std::string> {
            auto v = s->validate();
            if (!v.empty()) return v.front();
            auto snap_before = s->snapshot();
            s->commit();
            auto snap = s->snapshot();
            if (!(snap.totals() == s->totals())) return std::string("snapshot totals differ after commit");
            auto all = snap.enumerate(Bound::minus_infinity(), Bound::plus_infinity());
            if (!(aggregate_of_items(all, snap.config()) == s->totals())) return std::string("totals != fold");
            (void)snap_before;
            return std::nullopt;
        });
        CHECK_MESSAGE(!err, err.value_or(""));
        s->commit();
        s.reset();
        CHECK(verify_file(path).ok());
    }
}

TEST_CASE("totals and page touches") {
    TempDir dir;
    auto s = PagedStore::create(dir.file("t.db"), {}, fast(512));
    for (const auto& k : random_keys(8, 3000)) s->insert(k);
    s->commit();
    auto h = s->height();
    CHECK(h >= 4);
    auto all = s->enumerate(Bound::minus_infinity(), Bound::plus_infinity());
    CHECK(s->totals() == aggregate_of_items(all, s->config()));
    (void)s->totals();
    (void)s->rank(Bound::minus_infinity());
    CHECK(s->last_op_stats().nodes_visited == 0);

    SplitMix64 rng(9);
    for (int i = 0; i < 500; ++i) {
        auto [lo, hi] = oracle::random_range(rng, all, ~0ULL);
        (void)s->aggregate(lo, hi);
        CHECK(s->last_op_stats().nodes_visited <= 2 * h + 2);
        (void)s->rank(lo);
        CHECK(s->last_op_stats().nodes_visited <= h + 1);
    }
}

TEST_CASE("snapshots stay pinned to their commit") {
    TempDir dir;
    auto path = dir.file("snap.db");
    auto s = PagedStore::create(path, {}, fast(512));
    auto first = random_keys(1, 400);
    for (const auto& k : first) s->insert(k);
    s->commit();
    auto snap = s->snapshot();
    auto ref = SortedListStore::from_items(first);

    for (const auto& k : random_keys(2, 400)) s->insert(k);
    check_same_answers(snap, ref, 3); // uncommitted writes invisible
    s->commit();
    for (std::size_t i = 0; i < 300; ++i) s->erase(first[i]);
    s->commit();
    check_same_answers(snap, ref, 4);
    CHECK(snap.txn_id() == 1);
    CHECK(s->snapshot().txn_id() == 3);
    CHECK(s->snapshot().size() == 500);
}

TEST_CASE("readers on other threads while the writer commits") {
    TempDir dir;
    auto s = PagedStore::create(dir.file("mt.db"), {}, fast(512));
    auto keys = random_keys(21, 2000);
    for (std::size_t i = 0; i < 1000; ++i) s->insert(keys[i]);
    s->commit();
    auto snap = s->snapshot();
    auto expect = snap.totals();
    std::atomic<bool> ok{true};
    std::vector<std::thread> readers;
    for (int t = 0; t < 4; ++t) {
        readers.emplace_back([&, t] {
            PagedSnapshot mine = snap;
            SplitMix64 rng(100 + t);
            for (int i = 0; i < 300; ++i) {
                auto r = rng.below(mine.size());
                if (mine.rank(mine.select(r)) != r) ok = false;
                if (!(mine.aggregate(Bound::minus_infinity(), Bound::plus_infinity()) == expect)) ok = false;
            }
        });
    }
    for (std::size_t i = 1000; i < 2000; ++i) {
        s->insert(keys[i]);
        if (i % 100 == 0) s->commit();
    }
    s->commit();
    for (auto& th : readers) th.join();
    CHECK(ok.load());
}

TEST_CASE("simulated crashes reopen to the previous commit") {
    for (auto fault : {CommitFault::CrashBeforeMeta, CommitFault::TornDataPage, CommitFault::TornMeta}) {
        CAPTURE(static_cast<int>(fault));
        TempDir dir;
        auto path = dir.file("c.db");
        auto keys = random_keys(31, 1500);
        std::vector<ItemKey> committed(keys.begin(), keys.begin() + 1000);
        auto ref = SortedListStore::from_items(committed);
        {
            auto s = PagedStore::create(path, {}, fast(1024));
            for (const auto& k : committed) s->insert(k);
            s->commit();
            for (std::size_t i = 1000; i < 1500; ++i) s->insert(keys[i]);
            s->erase(committed[0]);
            s->inject_commit_fault(fault);
            CHECK_THROWS_AS(s->commit(), StorageError);
            // The store rolled back in memory as well.
            CHECK(s->txn_id() == 1);
            check_same_answers(*s, ref, 5);
        }
        auto s = PagedStore::open(path, false);
        CHECK(s->txn_id() == 1);
        check_same_answers(*s, ref, 6);
        // The store keeps working after recovery.
        s->insert(keys[1200]);
        CHECK(s->commit() == 2);
        s.reset();
        CHECK(verify_file(path).ok());
    }
}

TEST_CASE("truncating the uncommitted tail reopens cleanly") {
    TempDir dir;
    auto path = dir.file("trunc.db");
    std::uint64_t committed_size = 0;
    auto keys = random_keys(41, 800);
    {
        auto s = PagedStore::create(path, {}, fast(512));
        for (std::size_t i = 0; i < 400; ++i) s->insert(keys[i]);
        s->commit();
        committed_size = s->disk_bytes();
        for (std::size_t i = 400; i < 800; ++i) s->insert(keys[i]);
        s->inject_commit_fault(CommitFault::CrashBeforeMeta);
        CHECK_THROWS_AS(s->commit(), StorageError);
    }
    std::filesystem::resize_file(path, committed_size);
    auto s = PagedStore::open(path, false);
    CHECK(s->size() == 400);
    CHECK(s->validate().empty());
}

TEST_CASE("corrupted newest meta falls back to the older one") {
    TempDir dir;
    auto path = dir.file("m.db");
    {
        auto s = PagedStore::create(path, {}, fast());
        for (const auto& k : random_keys(51, 200)) s->insert(k);
        s->commit(); // txn 1 -> slot 1
        for (const auto& k : random_keys(52, 200)) s->insert(k);
        s->commit(); // txn 2 -> slot 0
    }
    write_byte(path, 25, read_byte(path, 25) ^ 0xff); // inside slot 0's meta payload
    auto report = verify_file(path);
    CHECK(report.txn_id == 1);
    REQUIRE(report.issues.size() == 1);
    CHECK(report.issues[0].page == 0);
    auto s = PagedStore::open(path, false);
    CHECK(s->txn_id() == 1);
    CHECK(s->size() == 200);

    write_byte(path, 4096 + 25, read_byte(path, 4096 + 25) ^ 0xff);
    s.reset();
    CHECK_THROWS_AS(PagedStore::open(path), StorageError);
}

TEST_CASE("verify_file flags exactly the page with a flipped aggregate byte") {
    TempDir dir;
    auto path = dir.file("v.db");
    std::uint64_t root = 0;
    {
        auto s = PagedStore::create(path, {}, fast(512));
        for (const auto& k : random_keys(61, 2000)) s->insert(k);
        s->commit();
        REQUIRE(s->height() >= 3);
    }
    auto clean = verify_file(path);
    REQUIRE(clean.ok());
    CHECK(clean.items == 2000);

    auto file = detail::PageFile::open(path, false, false);
    auto meta = file->latest_meta();
    root = meta.root_page;
    auto root_node = detail::decode_node(file->read_page(root), file->header());
    std::uint64_t inner = root_node.children[1].id;
    auto inner_node = detail::decode_node(file->read_page(inner), file->header());
    REQUIRE_FALSE(inner_node.leaf);

    SUBCASE("hashsum byte of an inner branch") {
        std::uint64_t off = inner * 512 + detail::kPageHeaderSize + 16 + 3;
        write_byte(path, off, read_byte(path, off) ^ 0x10);
        auto r = verify_file(path);
        REQUIRE_FALSE(r.ok());
        for (const auto& i : r.issues) CHECK(i.page == inner);
    }
    SUBCASE("entries byte of the root") {
        std::uint64_t off = root * 512 + detail::kPageHeaderSize + detail::branch_record_size({}) + 8;
        write_byte(path, off, read_byte(path, off) ^ 0x01);
        auto r = verify_file(path);
        REQUIRE(r.issues.size() == 1);
        CHECK(r.issues[0].page == root);
    }
}

TEST_CASE("empty store verifies clean") {
    TempDir dir;
    auto path = dir.file("e.db");
    { auto s = PagedStore::create(path, oracle::width8(), fast()); }
    CHECK(verify_file(path).ok());
    CHECK_THROWS_AS(verify_file(dir.file("nope.db")), StorageError);
}

TEST_CASE("golden file bytes") {
    // Seed-42 script: 100 inserts, a commit after every tenth, 4096-byte pages.
    TempDir dir;
    auto path = dir.file("golden.db");
    {
        auto s = PagedStore::create(path, {}, fast());
        auto keys = random_keys(42, 100);
        for (std::size_t i = 0; i < keys.size(); ++i) {
            s->insert(keys[i]);
            if (i % 10 == 9) s->commit();
        }
    }
    auto bytes = file_bytes(path);
    CHECK(bytes.size() == 12 * 4096);
    CHECK(to_hex(sha256(bytes)) == "b284ed2b58a84502cb8e54fa59389f3c2652ba42b65436f216d3d945d355e648");
}
