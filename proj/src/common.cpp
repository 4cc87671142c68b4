#include "homlab/common.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <thread>

namespace homlab {

namespace {
int g_threads = 1;
}

void schema_error(const std::string& msg) { throw Error(ErrorKind::schema, msg); }
void invariant_error(const std::string& msg) { throw Error(ErrorKind::invariant, msg); }
void numerical_error(const std::string& msg) { throw Error(ErrorKind::numerical, msg); }

int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::schema: return 2;
    case ErrorKind::invariant: return 3;
    case ErrorKind::numerical: return 4;
    }
    return 4;
}

int default_threads() { return g_threads; }
void set_default_threads(int n) { g_threads = std::max(1, n); }

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body)
{
    if (threads <= 0) threads = g_threads;
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = n * w / workers;
        const std::size_t end = n * (w + 1) / workers;
        pool.emplace_back([begin, end, w, &body, &errors] {
            try {
                for (std::size_t i = begin; i < end; ++i) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

std::uint64_t fnv1a(const std::string& bytes)
{
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace homlab
