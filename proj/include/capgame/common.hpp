// Shared numeric utilities: error types, deterministic reductions, and the
// counter-based RNG behind all replicate sampling.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>

namespace capgame {

// Invalid configuration, model parameters, or call contracts.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Unusable input data (files, parsing, degenerate columns).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical failures: bracket loss, iteration limits, failed verification.
struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Pairwise reduction. The result depends only on the buffer contents, never
// on thread count or accumulation order at the call site.
double pairwise_sum(std::span<const double> values);
double mean(std::span<const double> values);
double sample_variance(std::span<const double> values);

struct Estimate {
    double value = 0.0;
    double se = 0.0;  // standard error of the sample mean
};

Estimate mean_with_se(std::span<const double> values);

// Uniform stream that is a pure function of (seed, counter): replicate k sees
// the same draws no matter which thread generates it or in what order.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t counter);

    std::uint64_t next_u64();
    double next_unit();  // [0, 1), 53-bit resolution

private:
    std::uint64_t state_;
};

// Worker threads for replicate loops. Affects speed only: loops write
// disjoint slots and reductions are pairwise, so results are identical for
// any thread count.
int worker_threads();
void set_worker_threads(int count);

// Calls fn(begin, end) on a contiguous partition of [0, count).
void parallel_for(std::size_t count,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace capgame
