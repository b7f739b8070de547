#include "rbsr/store.hpp"

#include <atomic>

namespace rbsr {

std::uint64_t next_store_version() {
    static std::atomic<std::uint64_t> counter{0};
    return ++counter;
}

} // namespace rbsr
