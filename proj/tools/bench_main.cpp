// bench: scenario runs across backends, report output and file verification.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "rbsr/bench.hpp"
#include "rbsr/error.hpp"
#include "rbsr/paged_store.hpp"

using namespace rbsr;
using namespace rbsr::bench;

namespace {

struct Common {
    std::uint64_t seed = 42;
    unsigned repeats = 10;
    std::string format = "csv";
    std::string out;
    std::size_t b = 16;
    std::size_t t = 32;
    std::uint32_t page_size = 4096;
    bool no_sync = false;
    std::string work_dir;

    RunOptions options() const {
        RunOptions o;
        o.repeats = repeats;
        o.params = {b, t};
        o.page_size = page_size;
        o.sync = !no_sync;
        o.work_dir = work_dir;
        return o;
    }
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "scenario seed")->capture_default_str();
    app->add_option("--repeats", c.repeats, "reconciliations per run")->capture_default_str()->check(CLI::PositiveNumber);
    app->add_option("--format", c.format, "csv or json")->capture_default_str()->check(CLI::IsMember({"csv", "json"}));
    app->add_option("--out", c.out, "report path (stdout when omitted)");
    app->add_option("-b,--branch-factor", c.b, "split fanout")->capture_default_str()->check(CLI::Range(2, 1 << 20));
    app->add_option("-t,--threshold", c.t, "id list threshold")->capture_default_str()->check(CLI::Range(1, 1 << 20));
    app->add_option("--page-size", c.page_size, "paged backend page size")->capture_default_str();
    app->add_flag("--no-sync", c.no_sync, "skip fdatasync on paged commits");
    app->add_option("--work-dir", c.work_dir, "directory for paged files (temporary when omitted)");
}

int emit(const Common& c, const std::vector<RunMetrics>& runs) {
    auto write = [&](std::ostream& os) {
        if (c.format == "json") {
            write_json(os, runs);
        } else {
            write_csv(os, runs);
        }
    };
    if (c.out.empty()) {
        write(std::cout);
        return 0;
    }
    std::ofstream f(c.out);
    if (!f) {
        std::cerr << "bench: cannot write " << c.out << "\n";
        return 2;
    }
    write(f);
    return f.good() ? 0 : 2;
}

int report_failures(const std::vector<RunMetrics>& runs) {
    int bad = 0;
    for (const auto& m : runs) {
        if (m.ground_truth_ok) continue;
        ++bad;
        std::cerr << "FAIL " << m.family << "_" << m.i << " " << m.backend << ": " << m.failure << "\n";
    }
    return bad;
}

// Non-timing protocol columns must agree across backends for one scenario.
int cross_check(const std::vector<RunMetrics>& runs) {
    std::map<std::pair<std::string, unsigned>, const RunMetrics*> first;
    int bad = 0;
    for (const auto& m : runs) {
        auto [it, fresh] = first.emplace(std::make_pair(m.family, m.i), &m);
        if (fresh) continue;
        const auto& a = *it->second;
        if (a.transcript_hash != m.transcript_hash || a.rounds != m.rounds || a.messages != m.messages ||
            a.bytes != m.bytes || a.Q != m.Q || a.I != m.I || a.K != m.K || a.have != m.have || a.need != m.need) {
            ++bad;
            std::cerr << "MISMATCH " << m.family << "_" << m.i << ": " << a.backend << " vs " << m.backend << "\n";
        }
    }
    return bad;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Range-based set reconciliation benchmark"};
    app.require_subcommand(1);

    Common rc;
    std::string family_s = "base_dense", backend_s = "btree";
    unsigned index = 1;
    auto* run_cmd = app.add_subcommand("run", "one scenario on one backend");
    run_cmd->add_option("--family", family_s, "scenario family")->capture_default_str();
    run_cmd->add_option("--i", index, "scenario index 1..8")->capture_default_str()->check(CLI::Range(1u, kMaxIndex));
    run_cmd->add_option("--backend", backend_s, "ref, btree, paged, btree+window or paged+window")
        ->capture_default_str();
    add_common(run_cmd, rc);

    Common ac;
    unsigned max_i = 3;
    unsigned parallel = 1;
    auto* all_cmd = app.add_subcommand("all", "every family and backend for i = 1..max-i");
    all_cmd->add_option("--max-i", max_i, "largest scenario index")->capture_default_str()->check(CLI::Range(1u, kMaxIndex));
    all_cmd->add_option("--parallel", parallel, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    add_common(all_cmd, ac);

    std::string verify_path;
    auto* verify_cmd = app.add_subcommand("verify", "check a paged store file");
    verify_cmd->add_option("--file", verify_path, "store file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) {
            auto fam = parse_family(family_s);
            auto be = parse_backend(backend_s);
            if (!fam) throw ConfigError("unknown family '" + family_s + "'");
            if (!be) throw ConfigError("unknown backend '" + backend_s + "'");
            std::vector<RunMetrics> runs{run(*be, ScenarioSpec::make(*fam, index, rc.seed), rc.options())};
            int io = emit(rc, runs);
            if (io) return io;
            return report_failures(runs) ? 1 : 0;
        }

        if (*all_cmd) {
            struct Cell {
                Family f;
                unsigned i;
                Backend b;
            };
            std::vector<Cell> cells;
            for (auto f : kFamilies) {
                for (unsigned i = 1; i <= max_i; ++i) {
                    for (auto b : kBackends) cells.push_back({f, i, b});
                }
            }
            std::vector<RunMetrics> runs(cells.size());
            std::atomic<std::size_t> next{0};
            std::mutex err_mu;
            std::string first_error;
            auto worker = [&] {
                for (std::size_t k; (k = next++) < cells.size();) {
                    try {
                        const auto& c = cells[k];
                        runs[k] = run(c.b, ScenarioSpec::make(c.f, c.i, ac.seed), ac.options());
                    } catch (const std::exception& e) {
                        std::lock_guard lock(err_mu);
                        if (first_error.empty()) first_error = e.what();
                        runs[k].failure = e.what();
                    }
                }
            };
            std::vector<std::thread> pool;
            for (unsigned w = 1; w < parallel; ++w) pool.emplace_back(worker);
            worker();
            for (auto& th : pool) th.join();
            if (!first_error.empty()) {
                std::cerr << "bench: " << first_error << "\n";
                return 1;
            }
            int io = emit(ac, runs);
            if (io) return io;
            int bad = report_failures(runs) + cross_check(runs);
            std::cerr << runs.size() << " runs, " << bad << " failures\n";
            return bad ? 1 : 0;
        }

        if (*verify_cmd) {
            auto rep = verify_file(verify_path);
            std::cout << "txn " << rep.txn_id << ", " << rep.pages_checked << " pages, " << rep.items << " items\n";
            for (const auto& issue : rep.issues) std::cout << "page " << issue.page << ": " << issue.message << "\n";
            std::cout << (rep.ok() ? "ok" : "CORRUPT") << "\n";
            return rep.ok() ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "bench: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
