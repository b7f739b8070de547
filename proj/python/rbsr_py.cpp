// Python bindings for the stores, windows, the reconciliation driver and
// the scenario runner.

#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "rbsr/agg_btree.hpp"
#include "rbsr/bench.hpp"
#include "rbsr/error.hpp"
#include "rbsr/paged_store.hpp"
#include "rbsr/protocol.hpp"
#include "rbsr/sorted_list_store.hpp"
#include "rbsr/window.hpp"

namespace py = pybind11;
using namespace rbsr;

namespace {

ItemKey key_from(std::uint64_t ts, const py::bytes& id) {
    std::string s = id;
    if (s.size() > kIdSize) throw py::value_error("id longer than 32 bytes");
    ItemKey k;
    k.timestamp = ts;
    std::memcpy(k.id.data(), s.data(), s.size()); // zero-padded
    return k;
}

py::bytes as_bytes(std::span<const std::uint8_t> b) {
    return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
}

py::dict outcome_dict(const ReconcileOutcome& r) {
    auto c = r.totals();
    py::dict d;
    d["have"] = r.have;
    d["need"] = r.need;
    d["rounds"] = r.rounds;
    d["messages"] = r.messages;
    d["bytes_sent"] = r.bytes_sent;
    d["transcript_hash"] = to_hex(r.transcript_hash);
    d["Q"] = c.Q;
    d["I"] = c.I;
    d["L_skip"] = c.L_skip;
    d["L_id"] = c.L_id;
    d["K"] = c.K;
    d["initiator_node_visits"] = r.initiator.node_visits;
    d["responder_node_visits"] = r.responder.node_visits;
    return d;
}

py::dict metrics_dict(const bench::RunMetrics& m) {
    py::dict d;
    d["family"] = m.family;
    d["i"] = m.i;
    d["backend"] = m.backend;
    d["seed"] = m.seed;
    d["t_prep_ms"] = m.t_prep_ms;
    d["t_rec_ms"] = m.t_rec_ms;
    d["rounds"] = m.rounds;
    d["messages"] = m.messages;
    d["bytes"] = m.bytes;
    d["Q"] = m.Q;
    d["I"] = m.I;
    d["K"] = m.K;
    d["node_visits"] = m.node_visits;
    d["disk_bytes"] = m.disk_bytes;
    d["transcript_hash"] = m.transcript_hash;
    d["have"] = m.have;
    d["need"] = m.need;
    d["ok"] = m.ground_truth_ok;
    d["failure"] = m.failure;
    return d;
}

bench::Family family_of(const std::string& s) {
    auto f = bench::parse_family(s);
    if (!f) throw py::value_error("unknown family '" + s + "'");
    return *f;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Range-based set reconciliation over order-statistics stores";

    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ConfigError>(m, "ConfigError", base);
    py::register_exception<PreconditionError>(m, "PreconditionError", base);
    py::register_exception<OutOfRangeError>(m, "OutOfRangeError", base);
    py::register_exception<DecodeError>(m, "DecodeError", base);
    py::register_exception<ProtocolError>(m, "ProtocolError", base);
    py::register_exception<StorageError>(m, "StorageError", base);
    py::register_exception<StaleWindowError>(m, "StaleWindowError", base);

    py::class_<ItemKey>(m, "ItemKey")
        .def(py::init(&key_from), py::arg("timestamp"), py::arg("id") = py::bytes())
        .def_readwrite("timestamp", &ItemKey::timestamp)
        .def_property_readonly("id", [](const ItemKey& k) { return as_bytes(k.id); })
        .def("encode", [](const ItemKey& k) { return as_bytes(encode_key(k)); })
        .def_static("decode", [](const py::bytes& b) {
            std::string s = b;
            return decode_key(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
        })
        .def(py::self == py::self)
        .def(py::self != py::self)
        .def(py::self < py::self)
        .def(py::self <= py::self)
        .def(py::self > py::self)
        .def(py::self >= py::self)
        .def("__hash__", [](const ItemKey& k) { return py::hash(as_bytes(encode_key(k))); })
        .def("__repr__", [](const ItemKey& k) { return "ItemKey(" + to_string(k) + ")"; });

    py::class_<Bound>(m, "Bound")
        .def(py::init<const ItemKey&>())
        .def_static("minus_infinity", &Bound::minus_infinity)
        .def_static("plus_infinity", &Bound::plus_infinity)
        .def_property_readonly("is_key", &Bound::is_key)
        .def_property_readonly("key", &Bound::key)
        .def(py::self == py::self)
        .def(py::self < py::self)
        .def("__repr__", [](const Bound& b) { return "Bound(" + to_string(b) + ")"; });
    py::implicitly_convertible<ItemKey, Bound>();

    py::class_<SummaryConfig>(m, "SummaryConfig")
        .def(py::init([](unsigned w, unsigned off, std::optional<unsigned> len) {
                 SummaryConfig c{w, off, len.value_or(w / 8)};
                 c.validate();
                 return c;
             }),
             py::arg("width_bits") = 256, py::arg("slice_offset") = 8, py::arg("slice_len") = py::none())
        .def_readonly("width_bits", &SummaryConfig::width_bits)
        .def_readonly("slice_offset", &SummaryConfig::slice_offset)
        .def_readonly("slice_len", &SummaryConfig::slice_len);

    py::class_<Aggregate>(m, "Aggregate")
        .def_readonly("count", &Aggregate::count)
        .def_property_readonly("summary_hex", [](const Aggregate& a) { return a.summary.to_hex(); })
        .def("fingerprint", [](const Aggregate& a) { return fingerprint_of_aggregate(a).to_hex(); })
        .def(py::self == py::self)
        .def("__repr__", [](const Aggregate& a) {
            return "Aggregate(count=" + std::to_string(a.count) + ", summary=0x" + a.summary.to_hex() + ")";
        });

    py::class_<OpStats>(m, "OpStats")
        .def_readonly("nodes_visited", &OpStats::nodes_visited)
        .def_readonly("entries_scanned", &OpStats::entries_scanned);

    const auto lo = py::arg("lo") = Bound::minus_infinity();
    const auto hi = py::arg("hi") = Bound::plus_infinity();

    py::class_<StoreView>(m, "StoreView")
        .def_property_readonly("config", &StoreView::config)
        .def("__len__", &StoreView::size)
        .def("totals", &StoreView::totals)
        .def("aggregate", &StoreView::aggregate, lo, hi)
        .def("rank", &StoreView::rank)
        .def("select", &StoreView::select)
        .def("enumerate", &StoreView::enumerate, lo, hi)
        .def("aggregate_by_rank", &StoreView::aggregate_by_rank)
        .def_property_readonly("version", &StoreView::version)
        .def_property_readonly("height", &StoreView::height)
        .def_property_readonly("last_op_stats", &StoreView::last_op_stats);

    py::class_<Store, StoreView>(m, "Store")
        .def("insert", &Store::insert)
        .def("erase", &Store::erase)
        .def(
            "insert_many",
            [](Store& s, const std::vector<ItemKey>& keys) {
                std::size_t n = 0;
                for (const auto& k : keys) n += s.insert(k);
                return n;
            },
            "Returns the number of keys that were not yet present.");

    py::class_<SortedListStore, Store>(m, "SortedListStore")
        .def(py::init<SummaryConfig>(), py::arg("config") = SummaryConfig{})
        .def_static("from_items", &SortedListStore::from_items, py::arg("items"), py::arg("config") = SummaryConfig{});

    py::class_<AggBTree, Store>(m, "AggBTree")
        .def(py::init<SummaryConfig, std::size_t>(), py::arg("config") = SummaryConfig{},
             py::arg("fanout") = AggBTree::kDefaultFanout)
        .def_property_readonly("fanout", &AggBTree::fanout)
        .def("validate", &AggBTree::validate);

    py::class_<PagedSnapshot, StoreView>(m, "PagedSnapshot")
        .def_static("open", &PagedSnapshot::open)
        .def_property_readonly("txn_id", &PagedSnapshot::txn_id);

    py::class_<PagedStore, Store>(m, "PagedStore")
        .def_static(
            "create",
            [](const std::string& path, SummaryConfig cfg, std::uint32_t page_size, bool sync) {
                return PagedStore::create(path, cfg, {page_size, sync});
            },
            py::arg("path"), py::arg("config") = SummaryConfig{}, py::arg("page_size") = 4096, py::arg("sync") = true)
        .def_static("open", &PagedStore::open, py::arg("path"), py::arg("sync") = true)
        .def("commit", &PagedStore::commit)
        .def("abort", &PagedStore::abort)
        .def_property_readonly("in_transaction", &PagedStore::in_transaction)
        .def_property_readonly("txn_id", &PagedStore::txn_id)
        .def("snapshot", &PagedStore::snapshot)
        .def_property_readonly("disk_bytes", &PagedStore::disk_bytes)
        .def_property_readonly("page_size", &PagedStore::page_size)
        .def("validate", &PagedStore::validate);

    m.def(
        "verify_file",
        [](const std::string& path) {
            auto r = verify_file(path);
            py::dict d;
            d["ok"] = r.ok();
            d["txn_id"] = r.txn_id;
            d["pages_checked"] = r.pages_checked;
            d["items"] = r.items;
            py::list issues;
            for (const auto& i : r.issues) issues.append(py::make_tuple(i.page, i.message));
            d["issues"] = issues;
            return d;
        },
        py::arg("path"));

    py::class_<WindowHandle>(m, "Window")
        .def_readonly("rank_lo", &WindowHandle::rank_lo)
        .def_readonly("rank_hi", &WindowHandle::rank_hi)
        .def_readonly("total", &WindowHandle::total)
        .def_property_readonly("lo", [](const WindowHandle& w) { return w.outer.lo; })
        .def_property_readonly("hi", [](const WindowHandle& w) { return w.outer.hi; })
        .def("__len__", &WindowHandle::count);

    m.def(
        "window_open", [](const StoreView& s, const Bound& l, const Bound& h) { return window_open(s, l, h); },
        py::arg("store"), lo, hi);
    m.def(
        "window_select", [](const StoreView& s, const WindowHandle& w, std::uint64_t r) { return window_select(s, w, r); });
    m.def("window_aggregate", [](const StoreView& s, const WindowHandle& w, std::uint64_t a, std::uint64_t b) {
        return window_aggregate(s, w, a, b);
    });
    m.def(
        "window_split", [](const StoreView& s, const WindowHandle& w, std::size_t b) { return window_split(s, w, b); },
        py::arg("store"), py::arg("window"), py::arg("b") = 16);

    m.def(
        "reconcile",
        [](const StoreView& x, const StoreView& y, const Bound& l, const Bound& h, std::size_t b, std::size_t t,
           bool windows) {
            ReconcileOptions o;
            o.initiator_windows = o.responder_windows = windows;
            return outcome_dict(reconcile(x, y, {l, h}, {b, t}, o));
        },
        py::arg("x"), py::arg("y"), lo, hi, py::arg("b") = 16, py::arg("t") = 32, py::arg("windows") = false,
        "Reconciles x (initiator) against y over [lo, hi).");

    m.def(
        "generate_scenario",
        [](const std::string& family, unsigned i, std::uint64_t seed) {
            auto sc = bench::generate_scenario(bench::ScenarioSpec::make(family_of(family), i, seed));
            py::dict d;
            d["x"] = sc.x;
            d["y"] = sc.y;
            d["lo"] = sc.outer.lo;
            d["hi"] = sc.outer.hi;
            d["planted_have"] = sc.planted_have;
            d["planted_need"] = sc.planted_need;
            return d;
        },
        py::arg("family"), py::arg("i"), py::arg("seed") = 42);

    m.def(
        "run_scenario",
        [](const std::string& backend, const std::string& family, unsigned i, std::uint64_t seed, unsigned repeats) {
            auto be = bench::parse_backend(backend);
            if (!be) throw py::value_error("unknown backend '" + backend + "'");
            auto spec = bench::ScenarioSpec::make(family_of(family), i, seed);
            bench::RunOptions o;
            o.repeats = repeats;
            o.sync = false;
            bench::RunMetrics r;
            {
                py::gil_scoped_release release;
                r = bench::run(*be, spec, o);
            }
            return metrics_dict(r);
        },
        py::arg("backend"), py::arg("family"), py::arg("i"), py::arg("seed") = 42, py::arg("repeats") = 1);
}
