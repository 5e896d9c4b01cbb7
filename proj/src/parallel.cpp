#include "dbn/parallel.hpp"

#include <atomic>

namespace dbn {
namespace {
std::atomic<std::size_t> g_threads{1};
}

void set_num_threads(std::size_t n) { g_threads = std::max<std::size_t>(1, n); }
std::size_t num_threads() { return g_threads; }

}  // namespace dbn
