// Acceptance suite: one case per release criterion. Each prints a single
// [criterion N] PASS/FAIL line with the measured values, then asserts.

#include <catch2/catch_amalgamated.hpp>

#include <iostream>
#include <sstream>

#include "kernid/config.hpp"
#include "kernid/harness.hpp"
#include "oracles.hpp"

using namespace kernid;

namespace {

void report(int criterion, bool ok, const std::string& details) {
    std::cout << "[criterion " << criterion << "] " << (ok ? "PASS" : "FAIL") << ": " << details
              << std::endl;
    CHECK(ok);
}

std::string fmt(double v) { return format_double(v); }

ExperimentConfig base_config(int d, Eigen::Index N, Eigen::Index n, double xi) {
    ExperimentConfig cfg;
    cfg.dataset.type = DatasetConfig::Type::Normal;
    cfg.dataset.d = d;
    cfg.dataset.N = N;
    cfg.n_sources = n;
    cfg.xi = xi;
    cfg.seed = 20240601;
    return cfg;
}

} // namespace

TEST_CASE("criterion 1: Silverman bandwidth table", "[acceptance]") {
    const std::vector<std::pair<int, double>> table = {
        {4, 0.2143}, {8, 0.3396}, {16, 0.5060}, {32, 0.6722}, {64, 0.8022}};
    bool ok = true;
    std::ostringstream detail;
    for (const auto& [d, expected] : table) {
        const double got = silverman_bandwidth(d, 100000);
        if (std::abs(got - expected) > 5e-5) ok = false;
        detail << "d=" << d << ":" << fmt(got) << " ";
    }
    report(1, ok, "h_S(d, 1e5) = " + detail.str() + "(table tolerance 5e-5)");
}

TEST_CASE("criterion 2: rank-budget bandwidth search", "[acceptance]") {
    ExperimentConfig cfg = base_config(4, 100000, 500, 1.0);
    cfg.kernel = KernelSpec::gaussian(1.0);
    BandwidthSearchSpec spec;
    spec.kappa = 0.2;
    spec.eps = 1e-2;
    spec.rank_tolerance_rows = 2;
    spec.max_iters = 40;

    auto mean_ratio = [&](bool large_branch) {
        spec.large_h_branch = large_branch;
        std::vector<double> ratios;
        for (int seed_idx = 0; seed_idx < 5; ++seed_idx) {
            const BandwidthResult r = bandwidth_search(
                cfg, spec, derive_seed(cfg.seed, static_cast<std::uint64_t>(seed_idx), 0xB5));
            ratios.push_back(r.h_over_hs);
        }
        return mean_of(ratios);
    };

    const double small_mean = mean_ratio(false);
    const double large_mean = mean_ratio(true);
    const bool ok_small = std::abs(small_mean - 0.1656) <= 0.024;
    const bool ok_large = std::abs(large_mean - 1.1719) <= 0.05;
    report(2, ok_small && ok_large,
           "mean h/h_S over 5 seeds: small_h=" + fmt(small_mean) + " (target 0.1656 +- 0.024), large_h=" +
               fmt(large_mean) + " (target 1.1719 +- 0.05)");
}

TEST_CASE("criterion 3: interaction fractions", "[acceptance]") {
    auto fractions_at = [&](int d) {
        const std::uint64_t seed = derive_seed(20240601, static_cast<std::uint64_t>(d), 0xF4);
        const PointSet ps = gen_normal(d, 100000, seed);
        const KernelSpec spec = KernelSpec::gaussian(silverman_bandwidth(d, 100000));
        return interaction_fractions(ps, spec, Eigen::VectorXd::Zero(d), 500);
    };
    const InteractionFractions f4 = fractions_at(4);
    const bool ok4 = std::abs(100.0 * f4.self_frac - 84.44) <= 5.0 &&
                     std::abs(100.0 * f4.nn_frac - 40.52) <= 5.0 &&
                     std::abs(100.0 * f4.far_frac - 38.09) <= 5.0;
    const InteractionFractions f64 = fractions_at(64);
    const bool ok64 = std::abs(100.0 * f64.self_frac - 100.0) <= 1.0 &&
                      std::abs(100.0 * f64.nn_frac - 0.0) <= 1.0 &&
                      std::abs(100.0 * f64.far_frac - 0.0) <= 1.0;
    report(3, ok4 && ok64,
           "d=4,h_S: (" + fmt(100 * f4.self_frac) + "," + fmt(100 * f4.nn_frac) + "," +
               fmt(100 * f4.far_frac) + ") vs (84.44,40.52,38.09) +-5; d=64,h_S: (" +
               fmt(100 * f64.self_frac) + "," + fmt(100 * f64.nn_frac) + "," +
               fmt(100 * f64.far_frac) + ") vs (100,0,0) +-1");
}

TEST_CASE("criterion 4: Laplace one-percent-of-rows claim", "[acceptance]") {
    ExperimentConfig cfg = base_config(3, 100000, 500, 4.0);
    cfg.kernel = KernelSpec::laplace();

    const int trials = 15;
    std::vector<SamplingScheme> schemes(4);
    schemes[0] = SamplingScheme{SchemeKind::Uniform};
    schemes[1] = SamplingScheme{SchemeKind::Distance};
    schemes[2] = SamplingScheme{SchemeKind::Leverage};
    schemes[3] = SamplingScheme{SchemeKind::NearestNeighbor};

    std::vector<std::vector<double>> scheme_errors(4);
    std::vector<double> full_errors;

    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t data_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(trial), 0);
        const TrialData td = prepare_trial(cfg, data_seed);
        const Eigen::VectorXd full_sv = singular_values(td.K);
        const Eigen::Index r = epsilon_rank(full_sv, 1e-2);
        REQUIRE(r > 0);

        CompressOptions opts;
        opts.k_norm = full_sv(0);

        RowSample all;
        all.fraction = 1.0;
        for (Eigen::Index i = 0; i < td.K.rows(); ++i) all.indices.push_back(i);
        const auto [full_id, full_rep] = compress_id(td.K, all, RankRule::from_fixed(r), opts);
        full_errors.push_back(full_rep.rel_error);

        SampleContext ctx;
        ctx.m = td.K.rows();
        ctx.K = &td.K;
        ctx.split = &td.split;
        ctx.points = &td.points;
        for (std::size_t si = 0; si < schemes.size(); ++si) {
            SamplingScheme scheme = schemes[si];
            scheme.rank_for_leverage = r;
            const RowSample sample =
                sample_rows(scheme, ctx, 0.01, derive_seed(data_seed, si, 7));
            const auto [id, rep] = compress_id(td.K, sample, RankRule::from_fixed(r), opts);
            scheme_errors[si].push_back(rep.rel_error);
        }
    }

    const double full_mean = mean_of(full_errors);
    bool ok = true;
    std::ostringstream detail;
    detail << "full-row ID mean err=" << fmt(full_mean) << "; s=0.01 means:";
    for (std::size_t si = 0; si < schemes.size(); ++si) {
        const double m = mean_of(scheme_errors[si]);
        if (m > 2.0 * full_mean) ok = false;
        detail << " " << schemes[si].name() << "=" << fmt(m);
    }
    detail << " (each must be <= 2x full)";
    report(4, ok, detail.str());
}

TEST_CASE("criterion 5: ID error bound on random matrices", "[acceptance]") {
    VerifyOptions opt;
    opt.suite = "id_bound";
    opt.trials = 200;
    std::ostringstream log;
    const VerifySummary s = run_verification(opt, log);
    report(5, s.failures == 0, log.str().substr(0, log.str().size() - 1));
}

TEST_CASE("criterion 6: deterministic HMT bound and projection lemma", "[acceptance]") {
    std::ostringstream log;
    VerifyOptions opt;
    opt.trials = 200;
    opt.suite = "hmt";
    const VerifySummary hmt = run_verification(opt, log);
    opt.suite = "projection";
    const VerifySummary proj = run_verification(opt, log);
    std::string lines = log.str();
    std::replace(lines.begin(), lines.end(), '\n', ';');
    report(6, hmt.failures == 0 && proj.failures == 0, lines);
}

TEST_CASE("criterion 7: uniform-sampling theorem and the improvement direction", "[acceptance]") {
    const int trials = 200;
    const UniformTheoremResult res =
        verify_uniform_sampling_theorem(400, 60, 5, 0.5, 0.1, trials, 0xACCE7701);
    const double threshold = 0.1 + 3.0 * std::sqrt(0.09 / trials);
    bool grid_ok = true;
    for (int t = 1; t <= 10000; ++t)
        if (!sampling_bound_improvement_holds(static_cast<double>(t))) grid_ok = false;
    const bool ok = (res.failure_rate <= threshold) && grid_ok;
    report(7, ok,
           "failure_rate=" + fmt(res.failure_rate) + " <= " + fmt(threshold) + " over " +
               std::to_string(res.trials_run) + " trials (s_required=" +
               std::to_string(res.s_required_last) +
               (res.used_replacement ? ", with replacement since s_required > m" : "") +
               "); sqrt(1+6t) <= 1+2t on t in {1..1e4}: " + (grid_ok ? "holds" : "violated"));
}

TEST_CASE("criterion 8: matrix Chernoff tails", "[acceptance]") {
    const int trials = 200;
    bool ok = true;
    std::ostringstream detail;
    for (double eps : {0.2, 0.5, 0.8}) {
        const ChernoffTailsResult res =
            verify_chernoff_tails(10, 400, 4000, trials, 0xACCE7708, eps);
        auto within = [&](double emp, double bound) {
            const double se = std::sqrt(std::max(emp * (1.0 - emp), 0.0) / trials);
            return emp <= bound + 3.0 * se;
        };
        if (!within(res.empirical_lower, res.bound_lower) ||
            !within(res.empirical_upper, res.bound_upper))
            ok = false;
        detail << "eps=" << eps << " lower " << fmt(res.empirical_lower) << "<=" << fmt(res.bound_lower)
               << " upper " << fmt(res.empirical_upper) << "<=" << fmt(res.bound_upper) << "; ";
    }
    report(8, ok, detail.str() + "(empirical <= bound + 3 MC standard errors)");
}

TEST_CASE("criterion 9: skeleton matvec against the direct summation oracle", "[acceptance]") {
    const int instances = 50;
    bool ok = true;
    double worst_printed = 0.0, worst_corrected = 0.0;
    for (int t = 0; t < instances; ++t) {
        Rng rng(derive_seed(0xACCE7709, static_cast<std::uint64_t>(t)));
        const int d = 2 + static_cast<int>(rng.below(4));
        const Eigen::Index N = 1200 + static_cast<Eigen::Index>(rng.below(800));
        const Eigen::Index n = 40 + static_cast<Eigen::Index>(rng.below(41));

        ExperimentConfig cfg = base_config(d, N, n, 1.0);
        cfg.kernel = KernelSpec::gaussian((0.5 + rng.uniform01()) * silverman_bandwidth(d, N));
        cfg.h_value = cfg.kernel.h;
        const TrialData td = prepare_trial(cfg, derive_seed(0xACCE7709, t, 1));

        const Eigen::VectorXd full_sv = singular_values(td.K);
        const Eigen::Index r = epsilon_rank(full_sv, 1e-2);
        if (r == 0) continue;

        SampleContext ctx;
        ctx.m = td.K.rows();
        const RowSample sample = sample_rows(SamplingScheme{SchemeKind::Uniform}, ctx, 0.3,
                                             derive_seed(0xACCE7709, t, 2));
        const auto [id, rep] = compress_id(td.K, sample, RankRule::from_fixed(r));

        PointSet skel(id.rank, d);
        for (Eigen::Index j = 0; j < id.rank; ++j)
            skel.row(j) = td.sources.row(id.skeleton[static_cast<std::size_t>(j)]);
        Eigen::VectorXd qv(n);
        for (Eigen::Index j = 0; j < n; ++j) qv(j) = rng.normal();
        const ChargeVector q = ChargeVector::from(qv);

        const Eigen::VectorXd u = apply_skeleton(id, q, td.kernel, td.targets, skel);
        const Eigen::VectorXd u_direct = oracles::direct_summation(td.kernel, td.targets, td.sources, q.q);
        const double err = (u - u_direct).norm();

        const double sigma_r1_K = (r < full_sv.size()) ? full_sv(r) : 0.0;
        const double sigma_r1_Ks = rep.sigma_r1_sample;
        const Eigen::Index s_count = static_cast<Eigen::Index>(sample.indices.size());
        const double printed =
            bound_full_error(td.K.rows(), n, s_count, r, 0.5, sigma_r1_K, sigma_r1_Ks, q.norm, false);
        const double corrected =
            bound_full_error(td.K.rows(), n, s_count, r, 0.5, sigma_r1_K, sigma_r1_Ks, q.norm, true);
        if (err > printed || err > corrected) ok = false;
        worst_printed = std::max(worst_printed, err / printed);
        worst_corrected = std::max(worst_corrected, err / corrected);
    }
    report(9, ok,
           "50 instances; worst error/bound ratio: printed-form " + fmt(worst_printed) +
               ", corrected-form " + fmt(worst_corrected) + " (both must stay <= 1)");
}

TEST_CASE("criterion 10: byte-identical CSV reproduction", "[acceptance]") {
    const std::string compress_json = R"({
        "dataset": {"type": "normal", "d": 3, "N": 600},
        "n_sources": 40,
        "kernel": {"family": "gaussian", "h": 1.0, "h_units": "silverman"},
        "methods": ["id", "svd"],
        "schemes": ["uniform", "distance", "leverage", "nearest_neighbor", "bernoulli",
                     "euclidean_norm"],
        "s_grid": [0.2, 1.0],
        "trials": 2,
        "mc_error": {"s_mc": 0.3, "n_mc": 2},
        "seed": 424242
    })";
    const ExperimentConfig cfg = parse_config_string(compress_json);
    std::ostringstream a1, a2;
    run_experiment(cfg, a1);
    run_experiment(cfg, a2);
    const bool ok_compress = a1.str() == a2.str() && a1.str().size() > 100;

    std::ostringstream b1, b2;
    spectra_report(cfg, b1);
    spectra_report(cfg, b2);
    const bool ok_spectra = b1.str() == b2.str();

    std::ostringstream c1, c2;
    interactions_report(cfg, c1);
    interactions_report(cfg, c2);
    const bool ok_inter = c1.str() == c2.str();

    ExperimentConfig bw = parse_config_string(R"({
        "dataset": {"type": "normal", "d": 2, "N": 1500},
        "n_sources": 50,
        "kernel": {"family": "gaussian", "h": 1.0},
        "bandwidth_search": {"kappa": 0.2, "branch": "small_h", "eps": 1e-2, "seeds": 2},
        "seed": 77
    })");
    std::ostringstream d1, d2;
    bandwidth_search_command(bw, d1);
    bandwidth_search_command(bw, d2);
    const bool ok_bw = d1.str() == d2.str();

    report(10, ok_compress && ok_spectra && ok_inter && ok_bw,
           std::string("compress ") + (ok_compress ? "ok" : "DIFFERS") + ", spectra " +
               (ok_spectra ? "ok" : "DIFFERS") + ", interactions " + (ok_inter ? "ok" : "DIFFERS") +
               ", bandwidth-search " + (ok_bw ? "ok" : "DIFFERS"));
}
