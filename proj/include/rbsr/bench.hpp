#pragma once

// Scenario families, benchmark runs and their reports.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rbsr/core.hpp"
#include "rbsr/protocol.hpp"

namespace rbsr::bench {

enum class Family { BaseDense, BaseSparse, ScaleDense, ScaleSparse, Stress, StressDyn };

inline constexpr std::array<Family, 6> kFamilies{Family::BaseDense,   Family::BaseSparse, Family::ScaleDense,
                                                 Family::ScaleSparse, Family::Stress,     Family::StressDyn};

std::string_view family_name(Family f);
std::optional<Family> parse_family(std::string_view name);

enum class Backend { Ref, BTree, Paged, BTreeWindow, PagedWindow };

inline constexpr std::array<Backend, 5> kBackends{Backend::Ref, Backend::BTree, Backend::Paged, Backend::BTreeWindow,
                                                  Backend::PagedWindow};

std::string_view backend_name(Backend b);
std::optional<Backend> parse_backend(std::string_view name);

// Timestamps are abstract ticks. The reconciled slice is [1e6, 2e6);
// context items fall in [0, 1e6) or [2e6, 3e6).
inline constexpr std::uint64_t kSliceLo = 1'000'000;
inline constexpr std::uint64_t kSliceHi = 2'000'000;
inline constexpr std::uint64_t kUniverseHi = 3'000'000;
inline constexpr unsigned kMaxIndex = 8;

struct ScenarioCounts {
    std::uint64_t in_common = 0;
    std::uint64_t in_x_only = 0;
    std::uint64_t in_y_only = 0;
    std::uint64_t out_common = 0;
    std::uint64_t out_x_only = 0;
    std::uint64_t out_y_only = 0;

    friend bool operator==(const ScenarioCounts&, const ScenarioCounts&) = default;
};

/// Per-family item counts at index i (1..8). One-sided counts apply to
/// each side separately.
ScenarioCounts table_counts(Family f, unsigned i);

struct ScenarioSpec {
    Family family = Family::BaseDense;
    unsigned index = 1;
    std::uint64_t seed = 42;
    HalfOpenRange slice{ItemKey{kSliceLo, {}}, ItemKey{kSliceHi, {}}};
    ScenarioCounts counts;

    /// Throws ConfigError unless 1 <= i <= 8.
    static ScenarioSpec make(Family f, unsigned i, std::uint64_t seed);
    std::string label() const; // e.g. "base_dense_1"
};

struct Scenario {
    std::vector<ItemKey> x; // sorted
    std::vector<ItemKey> y; // sorted
    HalfOpenRange outer;
    std::vector<ItemKey> planted_have; // in-slice X-only items, sorted
    std::vector<ItemKey> planted_need; // in-slice Y-only items, sorted
};

/// Deterministic in the spec. All keys are distinct.
Scenario generate_scenario(const ScenarioSpec& spec);

struct RunOptions {
    unsigned repeats = 10;
    ProtocolParams params{};
    std::size_t btree_fanout = 16;
    std::uint32_t page_size = 4096;
    bool sync = true;
    /// Paged files go here; a fresh temporary directory when empty.
    std::filesystem::path work_dir;
};

struct RunMetrics {
    std::string family;
    unsigned i = 0;
    std::string backend;
    std::uint64_t seed = 0;
    double t_prep_ms = 0;
    double t_rec_ms = 0; // mean over repeats
    std::uint64_t rounds = 0;
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
    std::uint64_t Q = 0;
    std::uint64_t I = 0;
    std::uint64_t K = 0;
    std::uint64_t node_visits = 0; // both peers, one reconciliation
    std::uint64_t disk_bytes = 0;  // both files, paged backends only
    std::string transcript_hash;   // hex

    // Not part of the report columns.
    std::uint64_t L_skip = 0;
    std::uint64_t L_id = 0;
    std::uint64_t respond_node_visits = 0;
    std::size_t height = 0; // max of the two stores
    std::vector<ItemKey> have;
    std::vector<ItemKey> need;
    bool ground_truth_ok = false;
    std::string failure;

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

/// Builds both stores, reconciles `repeats` times and checks every outcome
/// against the planted difference. A mismatch or a transcript that changes
/// between repeats leaves ground_truth_ok false with a reason in `failure`.
RunMetrics run(Backend backend, const ScenarioSpec& spec, const RunOptions& opt);
RunMetrics run(Backend backend, const ScenarioSpec& spec, const Scenario& scenario, const RunOptions& opt);

/// True when two runs agree on every column except the timings.
bool same_non_timing(const RunMetrics& a, const RunMetrics& b);

inline constexpr std::string_view kCsvHeader =
    "family,i,backend,seed,t_prep_ms,t_rec_ms,rounds,messages,bytes,Q,I,K,node_visits,disk_bytes,transcript_hash";

void write_csv(std::ostream& out, const std::vector<RunMetrics>& runs);
void write_json(std::ostream& out, const std::vector<RunMetrics>& runs);
/// Parses write_json output; throws DecodeError on missing or mistyped fields.
std::vector<RunMetrics> read_json(std::istream& in);

} // namespace rbsr::bench
