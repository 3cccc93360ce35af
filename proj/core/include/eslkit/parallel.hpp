#pragma once

#include <cstdint>

namespace esl {

/// Process-wide worker bound for per-pixel passes (CLI --jobs). 0 means
/// hardware concurrency.
void set_default_jobs(int jobs);
int default_jobs();

/// Runs fn(begin, end) over disjoint chunks of [0, n), possibly on
/// several threads. Each index is handled exactly once and chunks are
/// fixed given (n, jobs), so slot-writing loops stay deterministic.
void parallel_for(std::int64_t n, void* ctx,
                  void (*fn)(void* ctx, std::int64_t begin, std::int64_t end));

template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
    parallel_for(n, &fn, [](void* ctx, std::int64_t b, std::int64_t e) {
        (*static_cast<Fn*>(ctx))(b, e);
    });
}

}  // namespace esl
