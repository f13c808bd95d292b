#pragma once

#include <Eigen/Dense>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kernid/errors.hpp"
#include "kernid/kernel.hpp"
#include "kernid/rng.hpp"

namespace kernid {

/// Low-intrinsic-dimension dataset: d_i-dimensional normal draws zero-padded
/// to d_e ambient dimensions, rotated by a Haar-random orthogonal matrix, plus
/// i.i.d. uniform noise in [-noise_amplitude, +noise_amplitude].
struct LowIntrinsicSpec {
    int intrinsic_dim = 4;
    int ambient_dim = 1000;
    double noise_amplitude = 1e-3;

    void validate() const {
        if (intrinsic_dim < 1 || ambient_dim < intrinsic_dim)
            throw ConfigError("low-intrinsic spec requires ambient_dim >= intrinsic_dim >= 1");
        if (noise_amplitude < 0.0)
            throw ConfigError("low-intrinsic noise amplitude must be nonnegative");
    }
};

/// N x d i.i.d. standard normal points, filled row by row (point-major).
inline PointSet gen_normal(int d, Eigen::Index N, std::uint64_t seed) {
    if (d < 1 || N < 1) throw RangeError("gen_normal: requires d >= 1 and N >= 1");
    Rng rng(seed);
    PointSet ps(N, d);
    for (Eigen::Index i = 0; i < N; ++i)
        for (int j = 0; j < d; ++j)
            ps(i, j) = rng.normal();
    return ps;
}

/// Haar-distributed d x d orthogonal matrix: QR of a seeded standard normal
/// matrix with the sign convention diag(R) > 0, which makes the draw both
/// deterministic and uniform over the orthogonal group.
inline Eigen::MatrixXd random_rotation(int d, std::uint64_t seed) {
    Rng rng(seed);
    Eigen::MatrixXd g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

inline PointSet gen_low_intrinsic(const LowIntrinsicSpec& spec, Eigen::Index N, std::uint64_t seed) {
    spec.validate();
    if (N < 1) throw RangeError("gen_low_intrinsic: requires N >= 1");
    PointSet ps = PointSet::Zero(N, spec.ambient_dim);
    ps.leftCols(spec.intrinsic_dim) = gen_normal(spec.intrinsic_dim, N, derive_seed(seed, 1));
    const Eigen::MatrixXd rot = random_rotation(spec.ambient_dim, derive_seed(seed, 2));
    ps = ps * rot.transpose(); // rows: x_i -> Q x_i
    if (spec.noise_amplitude > 0.0) {
        Rng noise(derive_seed(seed, 3));
        const double a = spec.noise_amplitude;
        for (Eigen::Index i = 0; i < N; ++i)
            for (int j = 0; j < spec.ambient_dim; ++j)
                ps(i, j) += noise.uniform(-a, a);
    }
    return ps;
}

/// Reads a delimited text point file: one point per line, comma or whitespace
/// separated fields, lines whose first non-space character is '#' skipped.
inline PointSet load_points(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("load_points: cannot open " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    long lineno = 0;
    Eigen::Index width = -1;
    while (std::getline(in, line)) {
        ++lineno;
        std::size_t first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue; // blank
        if (line[first] == '#') continue;
        std::string normalized = line;
        for (char& ch : normalized)
            if (ch == ',') ch = ' ';
        std::istringstream ss(normalized);
        std::vector<double> fields;
        std::string tok;
        while (ss >> tok) {
            double v = 0.0;
            std::size_t used = 0;
            try {
                v = std::stod(tok, &used);
            } catch (const std::exception&) {
                throw ParseError("load_points: bad numeric field '" + tok + "' at line " +
                                     std::to_string(lineno),
                                 lineno);
            }
            if (used != tok.size())
                throw ParseError("load_points: trailing characters in field '" + tok +
                                     "' at line " + std::to_string(lineno),
                                 lineno);
            if (!std::isfinite(v))
                throw ParseError("load_points: non-finite value at line " + std::to_string(lineno),
                                 lineno);
            fields.push_back(v);
        }
        if (fields.empty()) continue;
        if (width < 0) {
            width = static_cast<Eigen::Index>(fields.size());
        } else if (static_cast<Eigen::Index>(fields.size()) != width) {
            throw ParseError("load_points: inconsistent column count at line " +
                                 std::to_string(lineno) + " (expected " + std::to_string(width) +
                                 ", got " + std::to_string(fields.size()) + ")",
                             lineno);
        }
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw ParseError("load_points: no data rows in " + path.string(), lineno);
    PointSet ps(static_cast<Eigen::Index>(rows.size()), width);
    for (Eigen::Index i = 0; i < ps.rows(); ++i)
        for (Eigen::Index j = 0; j < width; ++j)
            ps(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return ps;
}

/// Per-coordinate affine map onto [0, 1]; constant coordinates map to 0.
inline PointSet rescale_unit_hypercube(const PointSet& ps) {
    if (ps.rows() < 1) throw RangeError("rescale_unit_hypercube: empty point set");
    PointSet out(ps.rows(), ps.cols());
    for (Eigen::Index j = 0; j < ps.cols(); ++j) {
        const double lo = ps.col(j).minCoeff();
        const double hi = ps.col(j).maxCoeff();
        if (hi > lo)
            out.col(j) = (ps.col(j).array() - lo) / (hi - lo);
        else
            out.col(j).setZero();
    }
    return out;
}

} // namespace kernid
