#include "eslkit/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace esl {

namespace {
std::atomic<int> g_jobs{0};

constexpr std::int64_t kMinChunk = 4096;  // below this, threads cost more
}  // namespace

void set_default_jobs(int jobs) { g_jobs.store(jobs < 0 ? 0 : jobs); }

int default_jobs() {
    const int j = g_jobs.load();
    if (j > 0) return j;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

void parallel_for(std::int64_t n, void* ctx,
                  void (*fn)(void* ctx, std::int64_t begin, std::int64_t end)) {
    if (n <= 0) return;
    const int jobs = std::max(1, default_jobs());
    if (jobs == 1 || n < 2 * kMinChunk) {
        fn(ctx, 0, n);
        return;
    }
    const std::int64_t workers = std::min<std::int64_t>(jobs, (n + kMinChunk - 1) / kMinChunk);
    const std::int64_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::int64_t w = 0; w < workers; ++w) {
        const std::int64_t b = w * chunk;
        const std::int64_t e = std::min(n, b + chunk);
        if (b >= e) break;
        threads.emplace_back([=] { fn(ctx, b, e); });
    }
    for (std::thread& t : threads) t.join();
}

}  // namespace esl
