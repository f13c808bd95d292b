#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <numeric>
#include <vector>

#include "kernid/errors.hpp"
#include "kernid/kernel.hpp"

namespace kernid {

/// Partition of a point set into a compact source cluster and the
/// well-separated targets.
///   rho: max distance from the center to a source (attained by some source);
///   xi:  separation parameter; every target satisfies ||p - x_c|| >= xi * rho.
/// Source indices are the n points closest to the center (ties broken by
/// ascending point index); targets are all remaining points at distance
/// >= xi * rho, in ascending index order. Sources are always excluded from
/// the target set, for any xi.
struct SourceTargetSplit {
    Eigen::VectorXd center;
    std::vector<Eigen::Index> source_indices;
    std::vector<Eigen::Index> target_indices;
    double rho = 0.0;
    double xi = 0.0;
};

inline SourceTargetSplit split_sources_targets(const PointSet& ps, const Eigen::VectorXd& x_c,
                                               Eigen::Index n, double xi) {
    const Eigen::Index N = ps.rows();
    if (n < 1 || n >= N) throw RangeError("split_sources_targets: requires 1 <= n < N");
    if (xi < 0.0) throw RangeError("split_sources_targets: requires xi >= 0");
    if (x_c.size() != ps.cols()) throw DimensionError("split_sources_targets: center dimension mismatch");

    Eigen::VectorXd dist(N);
    for (Eigen::Index i = 0; i < N; ++i) dist(i) = (ps.row(i).transpose() - x_c).norm();

    std::vector<Eigen::Index> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::nth_element(order.begin(), order.begin() + (n - 1), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) {
                         if (dist(a) != dist(b)) return dist(a) < dist(b);
                         return a < b;
                     });

    SourceTargetSplit split;
    split.center = x_c;
    split.xi = xi;
    split.source_indices.assign(order.begin(), order.begin() + n);
    std::sort(split.source_indices.begin(), split.source_indices.end());
    split.rho = 0.0;
    for (Eigen::Index i : split.source_indices) split.rho = std::max(split.rho, dist(i));

    std::vector<char> is_source(static_cast<std::size_t>(N), 0);
    for (Eigen::Index i : split.source_indices) is_source[static_cast<std::size_t>(i)] = 1;
    const double cutoff = xi * split.rho;
    for (Eigen::Index i = 0; i < N; ++i)
        if (!is_source[static_cast<std::size_t>(i)] && dist(i) >= cutoff)
            split.target_indices.push_back(i);
    if (split.target_indices.empty())
        throw NoTargetsError("split_sources_targets: no targets at separation xi = " +
                             std::to_string(xi) + " (try a smaller xi)");
    return split;
}

/// The k target point indices closest to the source center, in ascending
/// distance (ties by index). Distance is measured to x_c rather than to the
/// nearest source; the two differ by at most rho.
inline std::vector<Eigen::Index> nearest_targets(const SourceTargetSplit& split, const PointSet& ps,
                                                 Eigen::Index k) {
    const Eigen::Index m = static_cast<Eigen::Index>(split.target_indices.size());
    if (k < 1 || k > m) throw RangeError("nearest_targets: requires 1 <= k <= number of targets");
    std::vector<std::pair<double, Eigen::Index>> by_dist;
    by_dist.reserve(static_cast<std::size_t>(m));
    for (Eigen::Index idx : split.target_indices)
        by_dist.emplace_back((ps.row(idx).transpose() - split.center).norm(), idx);
    std::sort(by_dist.begin(), by_dist.end());
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) out.push_back(by_dist[static_cast<std::size_t>(i)].second);
    return out;
}

struct Histogram {
    Eigen::VectorXd edges; // bins + 1 edges
    Eigen::VectorXi counts;
};

/// Histogram of all source-target pair distances over equal-width bins
/// spanning [min, max]; the maximum lands in the last bin.
inline Histogram pairwise_distance_histogram(const SourceTargetSplit& split, const PointSet& ps,
                                             int bins) {
    if (bins < 1) throw RangeError("pairwise_distance_histogram: requires bins >= 1");
    const auto& T = split.target_indices;
    const auto& S = split.source_indices;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd d(static_cast<Eigen::Index>(T.size()), static_cast<Eigen::Index>(S.size()));
    for (std::size_t i = 0; i < T.size(); ++i)
        for (std::size_t j = 0; j < S.size(); ++j) {
            const double v = (ps.row(T[i]) - ps.row(S[j])).norm();
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    Histogram hist;
    hist.edges.resize(bins + 1);
    const double width = (hi > lo) ? (hi - lo) : 1.0;
    for (int b = 0; b <= bins; ++b) hist.edges(b) = lo + width * b / bins;
    hist.counts = Eigen::VectorXi::Zero(bins);
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            int b = static_cast<int>((d(i, j) - lo) / width * bins);
            b = std::clamp(b, 0, bins - 1);
            hist.counts(b) += 1;
        }
    return hist;
}

} // namespace kernid
