#include "quasihom/parallel.hpp"

namespace quasihom {

namespace {
std::atomic<unsigned> g_workers{0};
}

void set_worker_count(unsigned count) { g_workers = count; }

unsigned worker_count() {
  const unsigned configured = g_workers.load();
  if (configured != 0) return configured;
  return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace quasihom
