#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace homlab {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Failure classes map one-to-one onto CLI exit codes.
enum class ErrorKind { schema, invariant, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void schema_error(const std::string& msg);
[[noreturn]] void invariant_error(const std::string& msg);
[[noreturn]] void numerical_error(const std::string& msg);

int exit_code(ErrorKind kind);

// Static partition of [0, n) over worker threads.  Each index is handled by
// exactly one worker, so results do not depend on the thread count as long
// as the body writes only to its own slot.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

int default_threads();
void set_default_threads(int n);

// Stable 64-bit FNV-1a hash, used for config fingerprints.
std::uint64_t fnv1a(const std::string& bytes);

inline double sqr(double v) { return v * v; }

} // namespace homlab
