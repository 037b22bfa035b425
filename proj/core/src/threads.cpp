#include "corrfactor/threads.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace corrfactor {

unsigned worker_count(unsigned requested) {
    unsigned n = requested != 0 ? requested : std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CORRFACTOR_THREADS")) {
        try {
            const unsigned cap = static_cast<unsigned>(std::stoul(env));
            if (cap >= 1) n = std::min(n, cap);
        } catch (const std::exception&) {
            // ignore malformed override
        }
    }
    return std::max(1u, n);
}

void parallel_batches(std::size_t num_batches, unsigned workers,
                      const std::function<void(std::size_t)>& fn) {
    workers = std::min<std::size_t>(std::max(1u, workers), num_batches == 0 ? 1 : num_batches);
    if (workers <= 1 || num_batches <= 1) {
        for (std::size_t b = 0; b < num_batches; ++b) fn(b);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            for (std::size_t b = next.fetch_add(1); b < num_batches; b = next.fetch_add(1)) fn(b);
        });
    for (auto& th : pool) th.join();
}

}  // namespace corrfactor
