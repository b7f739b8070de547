#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "rbsr/bench.hpp"
#include "rbsr/error.hpp"

using namespace rbsr;
using namespace rbsr::bench;

namespace {

std::vector<ItemKey> in_slice(const std::vector<ItemKey>& v, const HalfOpenRange& r) {
    std::vector<ItemKey> out;
    std::copy_if(v.begin(), v.end(), std::back_inserter(out), [&](const ItemKey& k) { return r.contains(k); });
    return out;
}

std::vector<ItemKey> difference(const std::vector<ItemKey>& a, const std::vector<ItemKey>& b) {
    std::vector<ItemKey> out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

RunOptions quick() {
    RunOptions o;
    o.repeats = 1;
    o.sync = false;
    return o;
}

} // namespace

TEST_CASE("family and backend names") {
    for (auto f : kFamilies) CHECK(parse_family(family_name(f)) == f);
    for (auto b : kBackends) CHECK(parse_backend(backend_name(b)) == b);
    CHECK_FALSE(parse_family("dense"));
    CHECK_FALSE(parse_backend("nosuch"));
    CHECK(ScenarioSpec::make(Family::StressDyn, 2, 1).label() == "stress_dyn_2");
}

TEST_CASE("table counts") {
    CHECK(table_counts(Family::BaseDense, 1) == ScenarioCounts{64, 4, 4, 1000, 200, 200});
    CHECK(table_counts(Family::BaseSparse, 2) == ScenarioCounts{256, 12, 12, 4000, 800, 800});
    CHECK(table_counts(Family::ScaleDense, 3) == ScenarioCounts{2304, 24, 24, 12000, 2400, 2400});
    CHECK(table_counts(Family::ScaleSparse, 2) == ScenarioCounts{1024, 32, 32, 12000, 2400, 2400});
    CHECK(table_counts(Family::Stress, 2) == ScenarioCounts{4096, 128, 128, 16000, 3200, 3200});
    CHECK(table_counts(Family::StressDyn, 2) == ScenarioCounts{16384, 4096, 4096, 16000, 3200, 3200});
    CHECK(table_counts(Family::StressDyn, 8).in_common == 262144);
    CHECK_THROWS_AS(table_counts(Family::Stress, 0), ConfigError);
    CHECK_THROWS_AS(table_counts(Family::Stress, 9), ConfigError);
}

TEST_CASE("base_dense_1 scenario shape") {
    auto spec = ScenarioSpec::make(Family::BaseDense, 1, 42);
    auto sc = generate_scenario(spec);
    auto xs = in_slice(sc.x, sc.outer), ys = in_slice(sc.y, sc.outer);
    CHECK(xs.size() == 68);
    CHECK(ys.size() == 68);
    CHECK(difference(xs, ys).size() + difference(ys, xs).size() == 8);
    CHECK(sc.x.size() == 64 + 4 + 1000 + 200);
    CHECK(sc.y.size() == sc.x.size());
    CHECK(sc.outer.lo == Bound(ItemKey{kSliceLo, {}}));
    CHECK(sc.outer.hi == Bound(ItemKey{kSliceHi, {}}));

    auto again = generate_scenario(spec);
    CHECK(again.x == sc.x);
    CHECK(again.y == sc.y);
    CHECK(generate_scenario(ScenarioSpec::make(Family::BaseDense, 1, 43)).x != sc.x);
}

TEST_CASE("planted difference equals the brute-force difference") {
    for (auto f : kFamilies) {
        for (unsigned i = 1; i <= 2; ++i) {
            auto spec = ScenarioSpec::make(f, i, 7);
            auto sc = generate_scenario(spec);
            INFO(spec.label());
            auto xs = in_slice(sc.x, sc.outer), ys = in_slice(sc.y, sc.outer);
            CHECK(difference(xs, ys) == sc.planted_have);
            CHECK(difference(ys, xs) == sc.planted_need);
            CHECK(sc.planted_have.size() == spec.counts.in_x_only);
            CHECK(sc.planted_need.size() == spec.counts.in_y_only);
            // Out-of-slice items straddle the slice.
            std::size_t below = 0, above = 0;
            for (const auto& k : sc.x) {
                below += k.timestamp < kSliceLo;
                above += k.timestamp >= kSliceHi;
            }
            CHECK(below + above == spec.counts.out_common + spec.counts.out_x_only);
            CHECK(below > 0);
            CHECK(above > 0);
            std::vector<ItemKey> u = sc.x;
            u.insert(u.end(), sc.y.begin(), sc.y.end());
            std::sort(u.begin(), u.end());
            CHECK(std::adjacent_find(sc.x.begin(), sc.x.end()) == sc.x.end());
            CHECK(static_cast<std::size_t>(std::unique(u.begin(), u.end()) - u.begin()) ==
                  spec.counts.in_common + spec.counts.out_common + spec.counts.in_x_only + spec.counts.out_x_only +
                      spec.counts.in_y_only + spec.counts.out_y_only);
        }
    }
}

TEST_CASE("every backend finds the planted difference with one transcript") {
    for (auto f : kFamilies) {
        for (unsigned i = 1; i <= 3; ++i) {
            auto spec = ScenarioSpec::make(f, i, 1);
            auto sc = generate_scenario(spec);
            std::vector<RunMetrics> runs;
            for (auto b : kBackends) runs.push_back(run(b, spec, sc, quick()));
            INFO(spec.label());
            for (const auto& m : runs) {
                INFO(m.backend << ": " << m.failure);
                CHECK(m.ground_truth_ok);
                CHECK(m.have.size() == spec.counts.in_x_only);
                CHECK(m.need.size() == spec.counts.in_y_only);
                CHECK(m.transcript_hash == runs[0].transcript_hash);
                CHECK(m.bytes == runs[0].bytes);
                CHECK(m.Q == runs[0].Q);
            }
            const auto& bt = runs[static_cast<int>(Backend::BTree)];
            const auto& bw = runs[static_cast<int>(Backend::BTreeWindow)];
            CHECK(bw.node_visits <= bt.node_visits);
            CHECK(runs[static_cast<int>(Backend::Paged)].disk_bytes > 0);
            CHECK(bt.disk_bytes == 0);
        }
    }
}

TEST_CASE("bytes and Q grow with the index") {
    for (auto f : kFamilies) {
        std::uint64_t last_bytes = 0, last_q = 0;
        for (unsigned i = 1; i <= 3; ++i) {
            auto m = run(Backend::BTree, ScenarioSpec::make(f, i, 5), quick());
            INFO(family_name(f) << " i=" << i);
            CHECK(m.bytes > last_bytes);
            CHECK(m.Q >= last_q);
            last_bytes = m.bytes;
            last_q = m.Q;
        }
    }
}

TEST_CASE("repeats and reruns agree on non-timing columns") {
    auto spec = ScenarioSpec::make(Family::ScaleSparse, 2, 9);
    RunOptions o = quick();
    o.repeats = 3;
    auto a = run(Backend::PagedWindow, spec, o);
    auto b = run(Backend::PagedWindow, spec, o);
    CHECK(a.ground_truth_ok);
    CHECK(same_non_timing(a, b));
    b.rounds += 1;
    CHECK_FALSE(same_non_timing(a, b));
}

TEST_CASE("reports") {
    auto m = run(Backend::Ref, ScenarioSpec::make(Family::BaseDense, 1, 42), quick());
    std::ostringstream csv;
    write_csv(csv, {m});
    std::istringstream lines(csv.str());
    std::string header, row, extra;
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(header == kCsvHeader);
    CHECK(row.rfind("base_dense,1,ref,42,", 0) == 0);
    CHECK(std::count(row.begin(), row.end(), ',') == std::count(header.begin(), header.end(), ','));
    CHECK(row.substr(row.size() - 64) == m.transcript_hash);
    CHECK_FALSE(std::getline(lines, extra));

    std::stringstream js;
    write_json(js, {m, m});
    auto back = read_json(js);
    REQUIRE(back.size() == 2);
    CHECK(back[0].transcript_hash == m.transcript_hash);
    CHECK(back[0].Q == m.Q);
    CHECK(back[0].bytes == m.bytes);
    CHECK(back[1].family == "base_dense");
    CHECK(back[0].t_rec_ms == doctest::Approx(m.t_rec_ms));

    std::istringstream broken(R"([{"family": "x"}])");
    CHECK_THROWS_AS(read_json(broken), DecodeError);
    std::istringstream typed(R"([{"family": 3}])");
    CHECK_THROWS_AS(read_json(typed), DecodeError);
    std::istringstream junk("not json");
    CHECK_THROWS_AS(read_json(junk), DecodeError);
}
