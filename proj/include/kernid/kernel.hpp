#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

#include "kernid/errors.hpp"
#include "kernid/util.hpp"

namespace kernid {

/// N x d matrix of points, one point per row.
using PointSet = Eigen::MatrixXd;

enum class KernelFamily { Gaussian, Laplace, Polynomial };

/// Tagged kernel family with parameters.
///   Gaussian:    K(y, x) = exp(-||x - y||^2 / (2 h^2)),  h > 0
///   Laplace:     K(y, x) = log ||x - y||     for d == 2,
///                          ||x - y||^(2-d)   otherwise (singular at x == y)
///   Polynomial:  K(y, x) = (x^T y / h + c)^p,  h > 0, p >= 1
struct KernelSpec {
    KernelFamily family = KernelFamily::Gaussian;
    double h = 1.0;
    double c = 1.0;
    int p = 2;

    static KernelSpec gaussian(double h) { return {KernelFamily::Gaussian, h, 0.0, 0}; }
    static KernelSpec laplace() { return {KernelFamily::Laplace, 0.0, 0.0, 0}; }
    static KernelSpec polynomial(double h, double c = 1.0, int p = 2) {
        return {KernelFamily::Polynomial, h, c, p};
    }

    void validate() const {
        if (family == KernelFamily::Gaussian && !(h > 0.0))
            throw ConfigError("Gaussian kernel requires bandwidth h > 0");
        if (family == KernelFamily::Polynomial) {
            if (!(h > 0.0)) throw ConfigError("polynomial kernel requires bandwidth h > 0");
            if (p < 1) throw ConfigError("polynomial kernel requires degree p >= 1");
        }
    }

    std::string family_name() const {
        switch (family) {
            case KernelFamily::Gaussian: return "gaussian";
            case KernelFamily::Laplace: return "laplace";
            case KernelFamily::Polynomial: return "polynomial";
        }
        return "?";
    }
};

namespace detail {

// Sequential single-accumulator reductions, shared by the scalar and matrix
// evaluation paths. Keeping one arithmetic order (and avoiding Eigen's
// packet-reordered reductions) makes kernel_matrix entries bitwise equal to
// eval_kernel on the same points.
inline double sqdist_strided(const double* a, Eigen::Index stride_a, const double* b,
                             Eigen::Index stride_b, Eigen::Index d) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) {
        const double diff = a[k * stride_a] - b[k * stride_b];
        acc += diff * diff;
    }
    return acc;
}

inline double inner_strided(const double* a, Eigen::Index stride_a, const double* b,
                            Eigen::Index stride_b, Eigen::Index d) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < d; ++k) acc += a[k * stride_a] * b[k * stride_b];
    return acc;
}

inline double gaussian_of_sqdist(double sq, double h) {
    return std::exp(-sq / (2.0 * h * h));
}

inline double laplace_of_sqdist(double sq, int d) {
    const double r = std::sqrt(sq);
    if (d == 2) return std::log(r);
    return std::pow(r, 2.0 - static_cast<double>(d));
}

inline double polynomial_of_inner(double ip, double h, double c, int p) {
    return std::pow(ip / h + c, static_cast<double>(p));
}

} // namespace detail

/// Single kernel evaluation. Laplace throws SingularKernelError when x == y.
inline double eval_kernel(const KernelSpec& spec,
                          const Eigen::Ref<const Eigen::VectorXd>& x,
                          const Eigen::Ref<const Eigen::VectorXd>& y) {
    if (x.size() != y.size())
        throw DimensionError("eval_kernel: points have dimensions " + std::to_string(x.size()) +
                             " and " + std::to_string(y.size()));
    const Eigen::Index d = x.size();
    switch (spec.family) {
        case KernelFamily::Gaussian:
            return detail::gaussian_of_sqdist(detail::sqdist_strided(x.data(), 1, y.data(), 1, d),
                                              spec.h);
        case KernelFamily::Laplace: {
            const double sq = detail::sqdist_strided(x.data(), 1, y.data(), 1, d);
            if (sq == 0.0) throw SingularKernelError("Laplace kernel evaluated at coincident points");
            return detail::laplace_of_sqdist(sq, static_cast<int>(d));
        }
        case KernelFamily::Polynomial:
            return detail::polynomial_of_inner(detail::inner_strided(x.data(), 1, y.data(), 1, d),
                                               spec.h, spec.c, spec.p);
    }
    throw Error("eval_kernel: unknown kernel family");
}

/// Silverman's asymptotically optimal Gaussian KDE bandwidth for standard
/// normal data: h_S = (4 / (2d + 1))^(1/(d+4)) * N^(-1/(d+4)).
inline double silverman_bandwidth(int d, long long N) {
    if (d < 1 || N < 1) throw RangeError("silverman_bandwidth: requires d >= 1 and N >= 1");
    const double e = 1.0 / (static_cast<double>(d) + 4.0);
    return std::pow(4.0 / (2.0 * d + 1.0), e) * std::pow(static_cast<double>(N), -e);
}

/// Density normalizer 1 / (N h^d (2 pi)^(d/2)) for the Gaussian kernel.
/// Display-only: a scalar multiple of K changes neither epsilon-ranks nor
/// relative errors, so the library always works with the unnormalized kernel.
inline double gaussian_density_normalizer(int d, long long N, double h) {
    return 1.0 / (static_cast<double>(N) * std::pow(h, d) * std::pow(2.0 * M_PI, 0.5 * d));
}

/// m x n matrix of squared distances ||y_i - x_j||^2, evaluated pairwise with
/// the same arithmetic as eval_kernel (no Gram-trick cancellation).
inline Eigen::MatrixXd squared_distances(const PointSet& targets, const PointSet& sources) {
    if (targets.cols() != sources.cols())
        throw DimensionError("squared_distances: point dimensions disagree");
    Eigen::MatrixXd sq(targets.rows(), sources.rows());
    const Eigen::Index d = targets.cols();
    parallel_for_rows(targets.rows(), [&](Eigen::Index i0, Eigen::Index i1) {
        for (Eigen::Index i = i0; i < i1; ++i)
            for (Eigen::Index j = 0; j < sources.rows(); ++j)
                sq(i, j) = detail::sqdist_strided(targets.data() + i, targets.rows(),
                                                  sources.data() + j, sources.rows(), d);
    });
    return sq;
}

/// m x n matrix of inner products x_j^T y_i (polynomial kernel cache).
inline Eigen::MatrixXd inner_products(const PointSet& targets, const PointSet& sources) {
    if (targets.cols() != sources.cols())
        throw DimensionError("inner_products: point dimensions disagree");
    Eigen::MatrixXd ip(targets.rows(), sources.rows());
    const Eigen::Index d = targets.cols();
    parallel_for_rows(targets.rows(), [&](Eigen::Index i0, Eigen::Index i1) {
        for (Eigen::Index i = i0; i < i1; ++i)
            for (Eigen::Index j = 0; j < sources.rows(); ++j)
                ip(i, j) = detail::inner_strided(targets.data() + i, targets.rows(),
                                                 sources.data() + j, sources.rows(), d);
    });
    return ip;
}

/// Kernel matrix from a cached squared-distance matrix (Gaussian / Laplace).
inline Eigen::MatrixXd kernel_matrix_from_sq(const KernelSpec& spec, const Eigen::MatrixXd& sq, int d) {
    Eigen::MatrixXd K(sq.rows(), sq.cols());
    if (spec.family == KernelFamily::Gaussian) {
        const double h = spec.h;
        parallel_for_rows(sq.rows(), [&](Eigen::Index i0, Eigen::Index i1) {
            for (Eigen::Index i = i0; i < i1; ++i)
                for (Eigen::Index j = 0; j < sq.cols(); ++j)
                    K(i, j) = detail::gaussian_of_sqdist(sq(i, j), h);
        });
    } else if (spec.family == KernelFamily::Laplace) {
        for (Eigen::Index i = 0; i < sq.rows(); ++i)
            for (Eigen::Index j = 0; j < sq.cols(); ++j) {
                if (sq(i, j) == 0.0)
                    throw SingularKernelError("Laplace kernel: coincident target " + std::to_string(i) +
                                                  " and source " + std::to_string(j),
                                              static_cast<long>(i), static_cast<long>(j));
                K(i, j) = detail::laplace_of_sqdist(sq(i, j), d);
            }
    } else {
        throw Error("kernel_matrix_from_sq: spec is not distance-based");
    }
    return K;
}

/// Kernel matrix from a cached inner-product matrix (polynomial).
inline Eigen::MatrixXd kernel_matrix_from_ip(const KernelSpec& spec, const Eigen::MatrixXd& ip) {
    if (spec.family != KernelFamily::Polynomial)
        throw Error("kernel_matrix_from_ip: spec is not inner-product based");
    Eigen::MatrixXd K(ip.rows(), ip.cols());
    parallel_for_rows(ip.rows(), [&](Eigen::Index i0, Eigen::Index i1) {
        for (Eigen::Index i = i0; i < i1; ++i)
            for (Eigen::Index j = 0; j < ip.cols(); ++j)
                K(i, j) = detail::polynomial_of_inner(ip(i, j), spec.h, spec.c, spec.p);
    });
    return K;
}

/// Dense m x n interaction matrix, entry (i, j) = eval_kernel(spec, target_i, source_j).
inline Eigen::MatrixXd kernel_matrix(const KernelSpec& spec, const PointSet& targets, const PointSet& sources) {
    spec.validate();
    if (spec.family == KernelFamily::Polynomial)
        return kernel_matrix_from_ip(spec, inner_products(targets, sources));
    return kernel_matrix_from_sq(spec, squared_distances(targets, sources),
                                 static_cast<int>(targets.cols()));
}

} // namespace kernid
