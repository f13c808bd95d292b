#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "kernid/datagen.hpp"
#include "kernid/geometry.hpp"
#include "kernid/sampling.hpp"

using namespace kernid;
using Catch::Approx;

namespace {
bool all_distinct(const std::vector<Eigen::Index>& v) {
    std::set<Eigen::Index> s(v.begin(), v.end());
    return s.size() == v.size();
}
} // namespace

TEST_CASE("uniform sampling counts and ranges", "[sampling]") {
    SamplingScheme uni{SchemeKind::Uniform};
    SampleContext ctx;
    ctx.m = 10;
    const RowSample a = sample_rows(uni, ctx, 0.3, 5);
    CHECK(a.indices.size() == 3);
    CHECK(all_distinct(a.indices));
    for (Eigen::Index i : a.indices) {
        CHECK(i >= 0);
        CHECK(i < 10);
    }
    const RowSample full = sample_rows(uni, ctx, 1.0, 6);
    CHECK(full.indices.size() == 10);
    CHECK(all_distinct(full.indices));
    CHECK_THROWS_AS(sample_rows(uni, ctx, 0.0, 7), RangeError);
    CHECK_THROWS_AS(sample_rows(uni, ctx, 1.5, 7), RangeError);
}

TEST_CASE("sampling is deterministic in the seed", "[sampling]") {
    SamplingScheme uni{SchemeKind::Uniform};
    SampleContext ctx;
    ctx.m = 1000;
    CHECK(sample_rows(uni, ctx, 0.1, 42).indices == sample_rows(uni, ctx, 0.1, 42).indices);
    CHECK(sample_rows(uni, ctx, 0.1, 42).indices != sample_rows(uni, ctx, 0.1, 43).indices);
}

TEST_CASE("with replacement permits duplicates", "[sampling]") {
    SamplingScheme uni{SchemeKind::Uniform, /*replacement=*/true};
    SampleContext ctx;
    ctx.m = 5;
    bool saw_duplicate = false;
    for (std::uint64_t seed = 0; seed < 30 && !saw_duplicate; ++seed) {
        const RowSample s = sample_rows(uni, ctx, 1.0, seed);
        REQUIRE(s.indices.size() == 5);
        saw_duplicate = !all_distinct(s.indices);
    }
    CHECK(saw_duplicate);
}

TEST_CASE("nearest-neighbor rows on the line example", "[sampling]") {
    PointSet ps(8, 1);
    ps << 0, 0.1, -0.1, 0.5, -0.5, 2, -2, 3;
    const auto split = split_sources_targets(ps, Eigen::VectorXd::Zero(1), 3, 2.0);
    SamplingScheme nn{SchemeKind::NearestNeighbor};
    SampleContext ctx;
    ctx.m = static_cast<Eigen::Index>(split.target_indices.size());
    ctx.split = &split;
    ctx.points = &ps;
    const RowSample s = sample_rows(nn, ctx, 0.4, 1); // 2 of 5 rows
    REQUIRE(s.indices.size() == 2);
    // rows 0 and 1 of K correspond to targets 0.5 and -0.5
    CHECK(s.indices == std::vector<Eigen::Index>{0, 1});
}

TEST_CASE("euclidean-norm sampling finds the dominant row", "[sampling]") {
    Eigen::MatrixXd K = Eigen::MatrixXd::Constant(100, 2, 1e-6);
    K.row(17).setConstant(1e6);
    SamplingScheme euc{SchemeKind::EuclideanNorm};
    SampleContext ctx;
    ctx.m = 100;
    ctx.K = &K;
    int hits = 0;
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const RowSample s = sample_rows(euc, ctx, 0.01, seed);
        REQUIRE(s.indices.size() == 1);
        if (s.indices[0] == 17) ++hits;
    }
    CHECK(hits >= 999);
}

TEST_CASE("weighted marginals converge to the target distribution", "[sampling]") {
    // rows with norms proportional to 1..10; single with-replacement draw
    Eigen::MatrixXd K(10, 1);
    for (int i = 0; i < 10; ++i) K(i, 0) = i + 1.0;
    SamplingScheme euc{SchemeKind::EuclideanNorm, /*replacement=*/true};
    SampleContext ctx;
    ctx.m = 10;
    ctx.K = &K;
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(10);
    const int trials = 100000;
    for (int t = 0; t < trials; ++t) {
        const RowSample s = sample_rows(euc, ctx, 0.05, derive_seed(777, t));
        counts(s.indices[0]) += 1.0;
    }
    for (int i = 0; i < 10; ++i) {
        const double expected = (i + 1.0) / 55.0;
        CHECK(std::abs(counts(i) / trials - expected) < 0.01);
    }
}

TEST_CASE("leverage sampling favors the lone independent row", "[sampling]") {
    // one row along v1, the rest copies of v2: the v1 row holds leverage 1 of 2
    const int m = 40;
    Eigen::MatrixXd K(m, 6);
    Eigen::VectorXd v1 = Eigen::VectorXd::Zero(6), v2 = Eigen::VectorXd::Zero(6);
    v1(0) = 1.0;
    v2(1) = 1.0;
    K.row(0) = v1.transpose();
    for (int i = 1; i < m; ++i) K.row(i) = v2.transpose();
    SamplingScheme lev{SchemeKind::Leverage};
    lev.rank_for_leverage = 2;
    SampleContext ctx;
    ctx.m = m;
    ctx.K = &K;
    int hits = 0;
    const int trials = 2000;
    for (int t = 0; t < trials; ++t) {
        const RowSample s = sample_rows(lev, ctx, 1.0 / m, derive_seed(888, t));
        REQUIRE(s.indices.size() == 1);
        if (s.indices[0] == 0) ++hits;
    }
    CHECK(static_cast<double>(hits) / trials >= 0.45);
}

TEST_CASE("bernoulli draws a random count with the right mean", "[sampling]") {
    SamplingScheme bern{SchemeKind::Bernoulli};
    SampleContext ctx;
    ctx.m = 200;
    double total = 0.0;
    std::set<std::size_t> sizes;
    for (int t = 0; t < 400; ++t) {
        const RowSample s = sample_rows(bern, ctx, 0.25, derive_seed(99, t));
        CHECK(all_distinct(s.indices));
        sizes.insert(s.indices.size());
        total += static_cast<double>(s.indices.size());
    }
    CHECK(sizes.size() > 1); // the count is genuinely random
    CHECK(total / 400.0 == Approx(50.0).margin(3.0));
    const RowSample full = sample_rows(bern, ctx, 1.0, 1);
    CHECK(full.indices.size() == 200);
}

TEST_CASE("schemes reject missing context", "[sampling]") {
    SampleContext bare;
    bare.m = 10;
    CHECK_THROWS_AS(sample_rows(SamplingScheme{SchemeKind::EuclideanNorm}, bare, 0.5, 1), Error);
    CHECK_THROWS_AS(sample_rows(SamplingScheme{SchemeKind::Leverage}, bare, 0.5, 1), Error);
    CHECK_THROWS_AS(sample_rows(SamplingScheme{SchemeKind::Distance}, bare, 0.5, 1), Error);
    CHECK_THROWS_AS(sample_rows(SamplingScheme{SchemeKind::NearestNeighbor}, bare, 0.5, 1), Error);
}

TEST_CASE("zero total weight is an error", "[sampling]") {
    const Eigen::MatrixXd K = Eigen::MatrixXd::Zero(6, 3);
    SamplingScheme euc{SchemeKind::EuclideanNorm};
    SampleContext ctx;
    ctx.m = 6;
    ctx.K = &K;
    CHECK_THROWS_AS(sample_rows(euc, ctx, 0.5, 3), Error);
}

TEST_CASE("distance sampling weights nearer targets more by default", "[sampling]") {
    PointSet ps(102, 1);
    ps(0, 0) = 0.0;
    ps(1, 0) = 0.05;
    ps(2, 0) = 1.0;    // near target
    for (int i = 3; i < 102; ++i) ps(i, 0) = 100.0 + i; // far targets
    const auto split = split_sources_targets(ps, Eigen::VectorXd::Zero(1), 2, 1.0);
    SamplingScheme dist{SchemeKind::Distance};
    SampleContext ctx;
    ctx.m = static_cast<Eigen::Index>(split.target_indices.size());
    ctx.split = &split;
    ctx.points = &ps;
    int near_hits = 0;
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
        const RowSample s = sample_rows(dist, ctx, 1.0 / static_cast<double>(ctx.m),
                                        derive_seed(31337, t));
        if (split.target_indices[static_cast<std::size_t>(s.indices[0])] == 2) ++near_hits;
    }
    // weight of the near target is ~1/1 against ~99 weights of ~1/200
    CHECK(static_cast<double>(near_hits) / trials > 0.5);

    SamplingScheme direct = dist;
    direct.distance_direct = true;
    int near_hits_direct = 0;
    for (int t = 0; t < trials; ++t) {
        const RowSample s = sample_rows(direct, ctx, 1.0 / static_cast<double>(ctx.m),
                                        derive_seed(31338, t));
        if (split.target_indices[static_cast<std::size_t>(s.indices[0])] == 2) ++near_hits_direct;
    }
    CHECK(near_hits_direct < near_hits);
}

TEST_CASE("sample complexity arithmetic", "[sampling]") {
    CHECK(sample_complexity(1000, 0.01, 10, 0.1, 0.5) == 490);
    // eps = 0.5 denominator: coefficient ln(2r/delta)/0.108198 ~ 9.2423 per unit
    const double denom = 1.5 * std::log(1.5) - 0.5;
    CHECK(denom == Approx(0.108198).margin(1e-6));
    CHECK(1.0 / denom == Approx(9.2423).margin(1e-3));
    // minimal gamma = r/m gives the smallest s
    long long prev = std::numeric_limits<long long>::max();
    for (double gamma : {1.0, 0.5, 0.1, 10.0 / 1000.0}) {
        const long long s = sample_complexity(1000, gamma, 10, 0.1, 0.5);
        CHECK(s <= prev);
        prev = s;
    }
    CHECK_THROWS_AS(sample_complexity(1000, 0.01, 10, 0.1, 1.5), RangeError);
    CHECK_THROWS_AS(sample_complexity(1000, 0.01, 10, 0.1, 0.0), RangeError);
}

TEST_CASE("reconstruction bound arithmetic", "[sampling]") {
    CHECK(reconstruction_bound(100, 10, 0.5, 2.0) ==
          Approx(std::sqrt(1.0 + 6.0 * 10.0) * 2.0).epsilon(1e-12));
    CHECK(reconstruction_bound(100, 10, 0.5, 0.0) == 0.0);
    CHECK(reconstruction_bound(64, 64, 0.5, 1.0) == Approx(std::sqrt(7.0)).epsilon(1e-12));
}

TEST_CASE("without-replacement draws are distinct for every scheme", "[sampling]") {
    const PointSet ps = gen_normal(3, 150, 2024);
    const auto split = split_sources_targets(ps, Eigen::VectorXd::Zero(3), 30, 1.0);
    PointSet tgt(split.target_indices.size(), 3), src(30, 3);
    for (std::size_t i = 0; i < split.target_indices.size(); ++i)
        tgt.row(static_cast<Eigen::Index>(i)) = ps.row(split.target_indices[i]);
    for (std::size_t i = 0; i < 30; ++i) src.row(static_cast<Eigen::Index>(i)) = ps.row(split.source_indices[i]);
    const Eigen::MatrixXd K = kernel_matrix(KernelSpec::gaussian(0.8), tgt, src);
    SampleContext ctx;
    ctx.m = K.rows();
    ctx.K = &K;
    ctx.split = &split;
    ctx.points = &ps;
    for (SchemeKind kind : {SchemeKind::Uniform, SchemeKind::EuclideanNorm, SchemeKind::Distance,
                            SchemeKind::Leverage, SchemeKind::NearestNeighbor}) {
        SamplingScheme scheme{kind};
        scheme.rank_for_leverage = 5;
        const RowSample s = sample_rows(scheme, ctx, 0.33, 9);
        CHECK(s.indices.size() == static_cast<std::size_t>((ctx.m * 33 + 99) / 100));
        CHECK(all_distinct(s.indices));
    }
}
