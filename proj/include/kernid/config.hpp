#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kernid/compress.hpp"
#include "kernid/datagen.hpp"
#include "kernid/errors.hpp"
#include "kernid/kernel.hpp"
#include "kernid/sampling.hpp"

namespace kernid {

using json = nlohmann::json;

struct DatasetConfig {
    enum class Type { Normal, LowIntrinsic, File };
    Type type = Type::Normal;
    int d = 8;
    Eigen::Index N = 100000;
    LowIntrinsicSpec low;
    std::string path;
    bool rescale = false;

    std::string label() const {
        switch (type) {
            case Type::Normal: return "normal";
            case Type::LowIntrinsic: return "low_intrinsic";
            case Type::File: {
                const auto slash = path.find_last_of("/\\");
                return "file:" + (slash == std::string::npos ? path : path.substr(slash + 1));
            }
        }
        return "?";
    }

    /// Ambient dimension; for files it is known only after loading.
    int ambient_dim() const { return type == Type::LowIntrinsic ? low.ambient_dim : d; }

    /// Dimension governing the distance scale, hence the Silverman reference
    /// bandwidth: padding plus rotation preserves the intrinsic draw's
    /// distances, so low-intrinsic data uses the intrinsic dimension.
    int scale_dim() const { return type == Type::LowIntrinsic ? low.intrinsic_dim : d; }
};

enum class CenterMode { Origin, Explicit, RandomPoint };

/// Rank-budget bandwidth search parameters. kappa is the target epsilon-rank
/// as a fraction of n; the small_h branch has rank increasing in h, the
/// large_h branch decreasing.
struct BandwidthSearchSpec {
    double kappa = 0.2;
    bool large_h_branch = false;
    double eps = 1e-2;
    int max_iters = 40;
    int rank_tolerance_rows = 2;
    int seeds = 5;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    Eigen::Index n_sources = 500;
    double xi = 1.0;
    CenterMode center_mode = CenterMode::Origin;
    std::vector<double> center;

    KernelSpec kernel = KernelSpec::gaussian(1.0);
    bool h_in_silverman_units = false;
    double h_value = 1.0;

    RankRule rank_rule = RankRule::from_eps(1e-2);
    bool rank_reference_full = false;

    std::vector<CompressionMethod> methods = {CompressionMethod::ID};
    std::vector<SamplingScheme> schemes = {SamplingScheme{}};
    std::vector<bool> scheme_rank_auto; // leverage rank tied to the full-matrix epsilon-rank
    std::vector<double> s_grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};
    int trials = 15;

    std::optional<double> s_mc;
    int n_mc = 1;

    std::uint64_t seed = 1;
    std::string out;
    bool emit_timings = false;
    NormPolicy norms;
    bool emit_bound_sampling = false;
    double theorem_eps = 0.5;

    BandwidthSearchSpec bandwidth;
    std::vector<int> grid_d;
    std::vector<double> grid_h;

    void validate() const {
        if (n_sources < 1) throw ConfigError("n_sources must be >= 1");
        if (xi < 0.0) throw ConfigError("xi must be >= 0");
        if (trials < 1) throw ConfigError("trials must be >= 1");
        for (double s : s_grid)
            if (!(s > 0.0 && s <= 1.0)) throw ConfigError("s_grid values must lie in (0, 1]");
        if (s_grid.empty()) throw ConfigError("s_grid must be nonempty");
        if (s_mc && !(*s_mc > 0.0 && *s_mc <= 1.0)) throw ConfigError("mc_error.s_mc must lie in (0, 1]");
        if (s_mc && n_mc < 1) throw ConfigError("mc_error.n_mc must be >= 1");
        if (bandwidth.kappa * static_cast<double>(n_sources) < 1.0)
            throw ConfigError("bandwidth_search.kappa * n_sources must be >= 1");
        if (!(bandwidth.eps > 0.0 && bandwidth.eps < 1.0))
            throw ConfigError("bandwidth_search.eps must lie in (0, 1)");
        if (bandwidth.seeds < 1) throw ConfigError("bandwidth_search.seeds must be >= 1");
        kernel.validate();
    }
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where,
                       std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* k) { return it.key() == k; });
        if (!known) throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

inline SamplingScheme parse_scheme(const json& j, bool& rank_auto) {
    SamplingScheme scheme;
    rank_auto = false;
    std::string kind;
    if (j.is_string()) {
        kind = j.get<std::string>();
    } else {
        check_keys(j, "schemes[]", {"kind", "with_replacement", "rank", "direct"});
        kind = get_or<std::string>(j, "kind", "");
        scheme.replacement = get_or<bool>(j, "with_replacement", false);
        scheme.distance_direct = get_or<bool>(j, "direct", false);
        if (j.contains("rank")) scheme.rank_for_leverage = j.at("rank").get<Eigen::Index>();
    }
    if (kind == "uniform") scheme.kind = SchemeKind::Uniform;
    else if (kind == "bernoulli") scheme.kind = SchemeKind::Bernoulli;
    else if (kind == "euclidean_norm") scheme.kind = SchemeKind::EuclideanNorm;
    else if (kind == "distance") scheme.kind = SchemeKind::Distance;
    else if (kind == "leverage") scheme.kind = SchemeKind::Leverage;
    else if (kind == "nearest_neighbor") scheme.kind = SchemeKind::NearestNeighbor;
    else throw ConfigError("config: unknown sampling scheme '" + kind + "'");
    if (scheme.kind == SchemeKind::Leverage && (!j.is_object() || !j.contains("rank")))
        rank_auto = true; // tie the leverage rank to the full-matrix epsilon-rank
    return scheme;
}

} // namespace detail

/// Parses and validates the experiment configuration document. Unknown keys
/// anywhere are errors.
inline ExperimentConfig parse_config(const json& root) {
    using detail::check_keys;
    using detail::get_or;
    check_keys(root, "top level",
               {"dataset", "n_sources", "xi", "center", "kernel", "rank_rule", "methods", "schemes",
                "s_grid", "trials", "mc_error", "seed", "out", "timings", "memory_budget_values",
                "bound_sampling", "theorem_eps", "bandwidth_search", "grid"});
    ExperimentConfig cfg;

    if (!root.contains("dataset")) throw ConfigError("config: missing 'dataset'");
    {
        const json& d = root.at("dataset");
        check_keys(d, "dataset",
                   {"type", "d", "N", "intrinsic_dim", "ambient_dim", "noise_amplitude", "path",
                    "rescale_unit_hypercube"});
        const std::string type = get_or<std::string>(d, "type", "normal");
        if (type == "normal") {
            cfg.dataset.type = DatasetConfig::Type::Normal;
            cfg.dataset.d = get_or<int>(d, "d", 8);
            cfg.dataset.N = get_or<Eigen::Index>(d, "N", 100000);
        } else if (type == "low_intrinsic") {
            cfg.dataset.type = DatasetConfig::Type::LowIntrinsic;
            cfg.dataset.low.intrinsic_dim = get_or<int>(d, "intrinsic_dim", 4);
            cfg.dataset.low.ambient_dim = get_or<int>(d, "ambient_dim", 1000);
            cfg.dataset.low.noise_amplitude = get_or<double>(d, "noise_amplitude", 1e-3);
            cfg.dataset.N = get_or<Eigen::Index>(d, "N", 100000);
            cfg.dataset.low.validate();
        } else if (type == "file") {
            cfg.dataset.type = DatasetConfig::Type::File;
            cfg.dataset.path = get_or<std::string>(d, "path", "");
            if (cfg.dataset.path.empty()) throw ConfigError("config: file dataset requires 'path'");
            cfg.dataset.rescale = get_or<bool>(d, "rescale_unit_hypercube", false);
        } else {
            throw ConfigError("config: unknown dataset type '" + type + "'");
        }
    }

    cfg.n_sources = get_or<Eigen::Index>(root, "n_sources", 500);
    cfg.xi = get_or<double>(root, "xi", 1.0);

    if (root.contains("center")) {
        const json& c = root.at("center");
        if (c.is_string()) {
            const std::string mode = c.get<std::string>();
            if (mode == "origin") cfg.center_mode = CenterMode::Origin;
            else if (mode == "random_point") cfg.center_mode = CenterMode::RandomPoint;
            else throw ConfigError("config: center must be 'origin', 'random_point', or an array");
        } else if (c.is_array()) {
            cfg.center_mode = CenterMode::Explicit;
            cfg.center = c.get<std::vector<double>>();
        } else {
            throw ConfigError("config: center must be 'origin', 'random_point', or an array");
        }
    }

    if (root.contains("kernel")) {
        const json& k = root.at("kernel");
        check_keys(k, "kernel", {"family", "h", "h_units", "c", "p"});
        const std::string family = get_or<std::string>(k, "family", "gaussian");
        const std::string units = get_or<std::string>(k, "h_units", "absolute");
        if (units != "absolute" && units != "silverman")
            throw ConfigError("config: kernel.h_units must be 'absolute' or 'silverman'");
        cfg.h_in_silverman_units = (units == "silverman");
        cfg.h_value = get_or<double>(k, "h", 1.0);
        if (family == "gaussian") {
            cfg.kernel = KernelSpec::gaussian(cfg.h_value);
        } else if (family == "laplace") {
            if (k.contains("h") || k.contains("h_units"))
                throw ConfigError("config: the Laplace kernel carries no parameters");
            cfg.kernel = KernelSpec::laplace();
        } else if (family == "polynomial") {
            cfg.kernel = KernelSpec::polynomial(cfg.h_value, get_or<double>(k, "c", 1.0),
                                                get_or<int>(k, "p", 2));
        } else {
            throw ConfigError("config: unknown kernel family '" + family + "'");
        }
    }

    if (root.contains("rank_rule")) {
        const json& r = root.at("rank_rule");
        check_keys(r, "rank_rule", {"eps", "fixed_r", "reference"});
        if (r.contains("eps") && r.contains("fixed_r"))
            throw ConfigError("config: rank_rule takes either eps or fixed_r, not both");
        if (r.contains("fixed_r")) cfg.rank_rule = RankRule::from_fixed(r.at("fixed_r").get<Eigen::Index>());
        else if (r.contains("eps")) cfg.rank_rule = RankRule::from_eps(r.at("eps").get<double>());
        else throw ConfigError("config: rank_rule requires eps or fixed_r");
        const std::string ref = get_or<std::string>(r, "reference", "sample");
        if (ref == "full") cfg.rank_reference_full = true;
        else if (ref != "sample") throw ConfigError("config: rank_rule.reference must be 'sample' or 'full'");
    }

    if (root.contains("methods")) {
        cfg.methods.clear();
        for (const auto& mj : root.at("methods")) {
            const std::string m = mj.get<std::string>();
            if (m == "id") cfg.methods.push_back(CompressionMethod::ID);
            else if (m == "svd") cfg.methods.push_back(CompressionMethod::SVD);
            else throw ConfigError("config: unknown method '" + m + "'");
        }
        if (cfg.methods.empty()) throw ConfigError("config: methods must be nonempty");
    }

    if (root.contains("schemes")) {
        cfg.schemes.clear();
        cfg.scheme_rank_auto.clear();
        for (const auto& sj : root.at("schemes")) {
            bool rank_auto = false;
            cfg.schemes.push_back(detail::parse_scheme(sj, rank_auto));
            cfg.scheme_rank_auto.push_back(rank_auto);
        }
        if (cfg.schemes.empty()) throw ConfigError("config: schemes must be nonempty");
    } else {
        cfg.scheme_rank_auto.assign(cfg.schemes.size(), false);
    }

    if (root.contains("s_grid")) cfg.s_grid = root.at("s_grid").get<std::vector<double>>();
    cfg.trials = get_or<int>(root, "trials", 15);

    if (root.contains("mc_error")) {
        const json& mc = root.at("mc_error");
        check_keys(mc, "mc_error", {"s_mc", "n_mc"});
        cfg.s_mc = get_or<double>(mc, "s_mc", 1e-2);
        cfg.n_mc = get_or<int>(mc, "n_mc", 1);
    }

    cfg.seed = get_or<std::uint64_t>(root, "seed", 1);
    cfg.out = get_or<std::string>(root, "out", "");
    const std::string timings = get_or<std::string>(root, "timings", "none");
    if (timings == "wall") cfg.emit_timings = true;
    else if (timings != "none") throw ConfigError("config: timings must be 'none' or 'wall'");
    cfg.norms.memory_budget_values = get_or<double>(root, "memory_budget_values", 2e8);
    cfg.emit_bound_sampling = get_or<bool>(root, "bound_sampling", false);
    cfg.theorem_eps = get_or<double>(root, "theorem_eps", 0.5);

    if (root.contains("bandwidth_search")) {
        const json& b = root.at("bandwidth_search");
        check_keys(b, "bandwidth_search",
                   {"kappa", "branch", "eps", "max_iters", "rank_tolerance_rows", "seeds"});
        cfg.bandwidth.kappa = get_or<double>(b, "kappa", 0.2);
        const std::string branch = get_or<std::string>(b, "branch", "small_h");
        if (branch == "small_h") cfg.bandwidth.large_h_branch = false;
        else if (branch == "large_h") cfg.bandwidth.large_h_branch = true;
        else throw ConfigError("config: bandwidth_search.branch must be 'small_h' or 'large_h'");
        cfg.bandwidth.eps = get_or<double>(b, "eps", 1e-2);
        cfg.bandwidth.max_iters = get_or<int>(b, "max_iters", 40);
        cfg.bandwidth.rank_tolerance_rows = get_or<int>(b, "rank_tolerance_rows", 2);
        cfg.bandwidth.seeds = get_or<int>(b, "seeds", 5);
    }

    if (root.contains("grid")) {
        const json& g = root.at("grid");
        check_keys(g, "grid", {"d", "h"});
        if (g.contains("d")) cfg.grid_d = g.at("d").get<std::vector<int>>();
        if (g.contains("h")) cfg.grid_h = g.at("h").get<std::vector<double>>();
    }

    cfg.validate();
    return cfg;
}

inline ExperimentConfig parse_config_string(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    return parse_config(root);
}

} // namespace kernid
