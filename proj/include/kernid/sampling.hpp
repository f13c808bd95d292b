#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "kernid/errors.hpp"
#include "kernid/geometry.hpp"
#include "kernid/lowrank.hpp"
#include "kernid/rng.hpp"

namespace kernid {

enum class SchemeKind { Uniform, Bernoulli, EuclideanNorm, Distance, Leverage, NearestNeighbor };

/// Row-sampling scheme over the interaction matrix.
///   replacement is honored by Uniform and EuclideanNorm and ignored elsewhere;
///   rank_for_leverage fixes the rank the leverage scores are taken against;
///   distance_direct switches the Distance scheme from the default weighting
///   (probability proportional to 1/distance, which favors the large-norm rows
///   of a decaying kernel) to the literal direct proportionality.
struct SamplingScheme {
    SchemeKind kind = SchemeKind::Uniform;
    bool replacement = false;
    Eigen::Index rank_for_leverage = 1;
    bool distance_direct = false;

    std::string name() const {
        std::string base;
        switch (kind) {
            case SchemeKind::Uniform: base = "uniform"; break;
            case SchemeKind::Bernoulli: base = "bernoulli"; break;
            case SchemeKind::EuclideanNorm: base = "euclidean_norm"; break;
            case SchemeKind::Distance: base = distance_direct ? "distance_direct" : "distance"; break;
            case SchemeKind::Leverage: base = "leverage"; break;
            case SchemeKind::NearestNeighbor: base = "nearest_neighbor"; break;
        }
        if (replacement && (kind == SchemeKind::Uniform || kind == SchemeKind::EuclideanNorm))
            base += "_wr";
        return base;
    }
};

/// A drawn set of row indices. Without replacement the indices are distinct
/// and count = ceil(s * m); Bernoulli draws a random count.
struct RowSample {
    std::vector<Eigen::Index> indices;
    double fraction = 0.0;
    std::uint64_t seed = 0;
};

/// Context handed to sample_rows; K is required by the EuclideanNorm and
/// Leverage schemes, split (+points) by Distance and NearestNeighbor.
struct SampleContext {
    Eigen::Index m = 0;
    const Eigen::MatrixXd* K = nullptr;
    const SourceTargetSplit* split = nullptr;
    const PointSet* points = nullptr;
};

/// m_s = ceil(s * m), at least one row for any s in (0, 1].
inline Eigen::Index sample_count(double s, Eigen::Index m) {
    if (!(s > 0.0 && s <= 1.0)) throw RangeError("sample fraction must lie in (0, 1]");
    const Eigen::Index c = static_cast<Eigen::Index>(std::ceil(s * static_cast<double>(m)));
    return std::max<Eigen::Index>(1, std::min(c, m));
}

namespace detail {

// Fenwick tree over nonnegative weights supporting prefix-sum draws; used for
// the sequential renormalized weighted draws without replacement.
class WeightTree {
public:
    explicit WeightTree(const std::vector<double>& w) : n_(w.size()), tree_(w.size() + 1, 0.0) {
        for (std::size_t i = 0; i < n_; ++i) add(i, w[i]);
    }

    // Smallest element index whose cumulative weight exceeds u (0-based).
    std::size_t find(double u) const {
        std::size_t pos = 0;
        std::size_t mask = 1;
        while ((mask << 1) <= n_) mask <<= 1;
        for (; mask > 0; mask >>= 1) {
            const std::size_t next = pos + mask;
            if (next <= n_ && tree_[next] <= u) {
                u -= tree_[next];
                pos = next;
            }
        }
        return std::min(pos, n_ - 1);
    }

    void add(std::size_t i, double delta) {
        for (std::size_t k = i + 1; k <= n_; k += k & (~k + 1)) tree_[k] += delta;
    }

private:
    std::size_t n_;
    std::vector<double> tree_;
};

inline std::vector<Eigen::Index> weighted_draw(const std::vector<double>& weights, Eigen::Index count,
                                               bool replacement, Rng& rng) {
    const std::size_t m = weights.size();
    double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double w : weights)
        if (w < 0.0 || !std::isfinite(w)) throw RangeError("sample_rows: invalid (negative or non-finite) weight");
    if (!(total > 0.0)) throw Error("sample_rows: zero total weight");
    std::vector<Eigen::Index> out;
    out.reserve(static_cast<std::size_t>(count));
    if (replacement) {
        std::vector<double> cum(m);
        std::partial_sum(weights.begin(), weights.end(), cum.begin());
        for (Eigen::Index k = 0; k < count; ++k) {
            const double u = rng.uniform01() * total;
            const auto it = std::upper_bound(cum.begin(), cum.end(), u);
            std::size_t idx = static_cast<std::size_t>(it - cum.begin());
            if (idx >= m) idx = m - 1;
            out.push_back(static_cast<Eigen::Index>(idx));
        }
        return out;
    }
    WeightTree tree(weights);
    std::vector<double> live = weights;
    for (Eigen::Index k = 0; k < count; ++k) {
        const double u = rng.uniform01() * total;
        std::size_t idx = tree.find(u);
        if (live[idx] <= 0.0) {
            // fp boundary: the draw landed on an already-removed weight.
            std::size_t probe = idx;
            while (probe + 1 < m && live[probe] <= 0.0) ++probe;
            while (probe > 0 && live[probe] <= 0.0) --probe;
            idx = probe;
        }
        out.push_back(static_cast<Eigen::Index>(idx));
        total -= live[idx];
        tree.add(idx, -live[idx]);
        live[idx] = 0.0;
        if (!(total > 0.0) && k + 1 < count)
            throw Error("sample_rows: weights exhausted before reaching the requested count");
    }
    return out;
}

} // namespace detail

/// Draws row indices of an m-row matrix according to the scheme. Weighted
/// draws without replacement are performed sequentially with renormalization.
/// Deterministic for a fixed seed.
inline RowSample sample_rows(const SamplingScheme& scheme, const SampleContext& ctx, double s,
                             std::uint64_t seed) {
    if (ctx.m < 1) throw RangeError("sample_rows: context must have m >= 1 rows");
    RowSample out;
    out.fraction = s;
    out.seed = seed;
    Rng rng(seed);
    const Eigen::Index m = ctx.m;

    switch (scheme.kind) {
        case SchemeKind::Uniform: {
            const Eigen::Index count = sample_count(s, m);
            if (scheme.replacement) {
                for (Eigen::Index k = 0; k < count; ++k)
                    out.indices.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(m))));
            } else {
                std::vector<Eigen::Index> pool(static_cast<std::size_t>(m));
                std::iota(pool.begin(), pool.end(), Eigen::Index{0});
                for (Eigen::Index k = 0; k < count; ++k) {
                    const std::size_t j = static_cast<std::size_t>(k) +
                                          static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(m - k)));
                    std::swap(pool[static_cast<std::size_t>(k)], pool[j]);
                    out.indices.push_back(pool[static_cast<std::size_t>(k)]);
                }
            }
            break;
        }
        case SchemeKind::Bernoulli: {
            if (!(s > 0.0 && s <= 1.0)) throw RangeError("sample fraction must lie in (0, 1]");
            for (Eigen::Index i = 0; i < m; ++i)
                if (rng.uniform01() < s) out.indices.push_back(i);
            break;
        }
        case SchemeKind::EuclideanNorm: {
            if (ctx.K == nullptr) throw Error("sample_rows: EuclideanNorm scheme requires the matrix K");
            if (ctx.K->rows() != m) throw DimensionError("sample_rows: K row count disagrees with context m");
            std::vector<double> w(static_cast<std::size_t>(m));
            for (Eigen::Index i = 0; i < m; ++i) w[static_cast<std::size_t>(i)] = ctx.K->row(i).norm();
            out.indices = detail::weighted_draw(w, sample_count(s, m), scheme.replacement, rng);
            break;
        }
        case SchemeKind::Distance: {
            if (ctx.split == nullptr || ctx.points == nullptr)
                throw Error("sample_rows: Distance scheme requires the source/target split and points");
            if (static_cast<Eigen::Index>(ctx.split->target_indices.size()) != m)
                throw DimensionError("sample_rows: split target count disagrees with context m");
            std::vector<double> w(static_cast<std::size_t>(m));
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index pt = ctx.split->target_indices[static_cast<std::size_t>(i)];
                const double dist = (ctx.points->row(pt).transpose() - ctx.split->center).norm();
                w[static_cast<std::size_t>(i)] =
                    scheme.distance_direct ? dist : 1.0 / std::max(dist, std::numeric_limits<double>::min());
            }
            out.indices = detail::weighted_draw(w, sample_count(s, m), false, rng);
            break;
        }
        case SchemeKind::Leverage: {
            if (ctx.K == nullptr) throw Error("sample_rows: Leverage scheme requires the matrix K");
            if (ctx.K->rows() != m) throw DimensionError("sample_rows: K row count disagrees with context m");
            if (scheme.rank_for_leverage < 1) throw RangeError("sample_rows: rank_for_leverage must be >= 1");
            const Eigen::Index r = std::min(scheme.rank_for_leverage, std::min(ctx.K->rows(), ctx.K->cols()));
            const Eigen::VectorXd scores = row_leverage_scores(*ctx.K, r).scores;
            std::vector<double> w(scores.data(), scores.data() + scores.size());
            out.indices = detail::weighted_draw(w, sample_count(s, m), false, rng);
            break;
        }
        case SchemeKind::NearestNeighbor: {
            if (ctx.split == nullptr || ctx.points == nullptr)
                throw Error("sample_rows: NearestNeighbor scheme requires the source/target split and points");
            if (static_cast<Eigen::Index>(ctx.split->target_indices.size()) != m)
                throw DimensionError("sample_rows: split target count disagrees with context m");
            const Eigen::Index count = sample_count(s, m);
            // Row i of K corresponds to target_indices[i]; order rows by
            // distance to the center, ties by row position.
            std::vector<std::pair<double, Eigen::Index>> by_dist;
            by_dist.reserve(static_cast<std::size_t>(m));
            for (Eigen::Index i = 0; i < m; ++i) {
                const Eigen::Index pt = ctx.split->target_indices[static_cast<std::size_t>(i)];
                by_dist.emplace_back((ctx.points->row(pt).transpose() - ctx.split->center).norm(), i);
            }
            std::sort(by_dist.begin(), by_dist.end());
            for (Eigen::Index k = 0; k < count; ++k)
                out.indices.push_back(by_dist[static_cast<std::size_t>(k)].second);
            break;
        }
    }
    return out;
}

/// Sample count sufficient for the uniform-sampling reconstruction guarantee:
/// ceil( m * gamma * ln(2r/delta) / ln((1+eps)^(1+eps) / e^eps) ).
inline long long sample_complexity(Eigen::Index m, double gamma, Eigen::Index r, double delta,
                                   double eps) {
    if (!(eps > 0.0 && eps < 1.0)) throw RangeError("sample_complexity: requires eps in (0, 1)");
    if (!(delta > 0.0 && delta < 1.0)) throw RangeError("sample_complexity: requires delta in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw RangeError("sample_complexity: requires gamma in (0, 1]");
    if (m < 1 || r < 1) throw RangeError("sample_complexity: requires m >= 1 and r >= 1");
    const double denom = (1.0 + eps) * std::log1p(eps) - eps;
    const double value = static_cast<double>(m) * gamma * std::log(2.0 * static_cast<double>(r) / delta) / denom;
    return static_cast<long long>(std::ceil(value));
}

/// Spectral-norm reconstruction bound for s uniformly sampled rows/columns:
/// sqrt(1 + (m/s)(1+eps)/(1-eps)^2) * sigma_{r+1}.
inline double reconstruction_bound(Eigen::Index m, Eigen::Index s_count, double eps, double sigma_r1) {
    if (s_count < 1) throw RangeError("reconstruction_bound: requires s_count >= 1");
    if (!(eps > 0.0 && eps < 1.0)) throw RangeError("reconstruction_bound: requires eps in (0, 1)");
    if (sigma_r1 < 0.0) throw RangeError("reconstruction_bound: requires sigma_r1 >= 0");
    const double ratio = static_cast<double>(m) / static_cast<double>(s_count);
    return std::sqrt(1.0 + ratio * (1.0 + eps) / ((1.0 - eps) * (1.0 - eps))) * sigma_r1;
}

} // namespace kernid
