// SPDX-License-Identifier: Apache-2.0
#include "tridf/threading.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace tridf {

namespace {
std::size_t g_threads = 1;
}

void set_num_threads(std::size_t n) { g_threads = n == 0 ? 1 : n; }
std::size_t num_threads() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(g_threads, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace tridf
