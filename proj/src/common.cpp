#include "dgf/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <thread>
#include <vector>

namespace dgf {

std::string to_string(Task t) {
    return t == Task::super_resolution ? "sr" : "denoising";
}

Task task_from_string(const std::string& s) {
    if (s == "sr" || s == "super-resolution") return Task::super_resolution;
    if (s == "denoising") return Task::denoising;
    throw config_error("unknown task '" + s + "' (expected sr | denoising)");
}

int thread_budget() {
    static const int budget = [] {
        if (const char* env = std::getenv("DGF_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) return n;
        }
        unsigned hw = std::thread::hardware_concurrency();
        return hw == 0 ? 1 : static_cast<int>(hw);
    }();
    return budget;
}

void parallel_for(int n, const std::function<void(int)>& body) {
    if (n <= 0) return;
    int workers = std::min(thread_budget(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::exception_ptr first_error;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += workers) body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace dgf
