#pragma once

#include <Eigen/Dense>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace kernid {

/// Runs fn(begin, end) over a fixed partition of [0, rows) into row blocks.
/// The partition depends only on `rows`, never on the thread count, so
/// results are bitwise independent of the parallelism degree: every output
/// element is written by exactly one block with a fixed arithmetic order.
template <typename Fn>
void parallel_for_rows(Eigen::Index rows, Fn&& fn) {
    const Eigen::Index min_block = 1024;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const Eigen::Index nblocks = std::max<Eigen::Index>(1, std::min<Eigen::Index>(rows / min_block, 4 * hw));
    if (nblocks == 1 || hw == 1) {
        fn(Eigen::Index{0}, rows);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(hw);
    std::atomic<Eigen::Index> next{0};
    auto worker = [&]() {
        for (;;) {
            const Eigen::Index b = next.fetch_add(1);
            if (b >= nblocks) return;
            const Eigen::Index lo = rows * b / nblocks;
            const Eigen::Index hi = rows * (b + 1) / nblocks;
            fn(lo, hi);
        }
    };
    for (unsigned t = 0; t < hw; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
}

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
inline double stddev_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

/// Shortest round-trip decimal form of a double (CSV number format).
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

} // namespace kernid
