#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "kernid/errors.hpp"

namespace kernid {

/// Thin SVD factors A = U diag(sv) V^T with k = min(m, n).
struct SVDFactors {
    Eigen::MatrixXd U;
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd V;
};

/// Singular values plus the right factor V (of the thin SVD).
struct RightFactor {
    Eigen::VectorXd singular_values;
    Eigen::MatrixXd V;
};

/// Column-pivoted QR: A P = Q R with greedy max-residual-norm pivoting, so
/// |R(i,i)| is nonincreasing. permutation[k] is the original column index
/// moved to position k.
struct PivotedQR {
    Eigen::MatrixXd Q;
    Eigen::MatrixXd R;
    std::vector<Eigen::Index> permutation;
};

/// Rank-r interpolative decomposition A ~= A[:, skeleton] * projection.
/// projection restricted to the skeleton columns is the r x r identity.
struct IDFactorization {
    std::vector<Eigen::Index> skeleton;
    Eigen::MatrixXd projection; // r x n, original column order
    Eigen::Index rank = 0;
};

struct LeverageScores {
    Eigen::VectorXd scores; // one per column of A; sums to r
    bool degenerate_gap = false; // sigma_r == sigma_{r+1} to 1e-12 relative
};

namespace detail {

// Householder QR of a tall matrix followed by an SVD of the triangular factor
// computes exact singular values (and V) at O(m n^2) with a small SVD. Used
// whenever forming the bidiagonalization of the full matrix would be wasteful.
inline bool prefer_qr_reduction(Eigen::Index rows, Eigen::Index cols) {
    return rows > 4 * cols && rows > 2000;
}

inline Eigen::MatrixXd triangular_factor(const Eigen::MatrixXd& A) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    return qr.matrixQR()
        .topRows(A.cols())
        .triangularView<Eigen::Upper>();
}

} // namespace detail

/// Singular values of A, nonincreasing, exact up to floating point.
inline Eigen::VectorXd singular_values(const Eigen::MatrixXd& A) {
    if (A.size() == 0) throw RangeError("singular_values: empty matrix");
    if (detail::prefer_qr_reduction(A.rows(), A.cols()))
        return Eigen::BDCSVD<Eigen::MatrixXd>(detail::triangular_factor(A)).singularValues();
    if (detail::prefer_qr_reduction(A.cols(), A.rows()))
        return Eigen::BDCSVD<Eigen::MatrixXd>(detail::triangular_factor(A.transpose())).singularValues();
    return Eigen::BDCSVD<Eigen::MatrixXd>(A).singularValues();
}

/// Singular values and right singular vectors. For very tall A the V factor
/// comes from the SVD of the QR triangular factor, never touching U.
inline RightFactor right_factor(const Eigen::MatrixXd& A) {
    if (A.size() == 0) throw RangeError("right_factor: empty matrix");
    if (detail::prefer_qr_reduction(A.rows(), A.cols())) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(detail::triangular_factor(A),
                                           Eigen::ComputeThinU | Eigen::ComputeThinV);
        return {svd.singularValues(), svd.matrixV()};
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {svd.singularValues(), svd.matrixV()};
}

/// Thin SVD. Production path is bidiagonalization-based (Eigen BDCSVD), with a
/// QR reduction first when A is very rectangular.
inline SVDFactors svd(const Eigen::MatrixXd& A) {
    if (A.size() == 0) throw RangeError("svd: empty matrix");
    if (detail::prefer_qr_reduction(A.rows(), A.cols())) {
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
        const Eigen::MatrixXd R = qr.matrixQR().topRows(A.cols()).triangularView<Eigen::Upper>();
        Eigen::BDCSVD<Eigen::MatrixXd> s(R, Eigen::ComputeThinU | Eigen::ComputeThinV);
        Eigen::MatrixXd U = Eigen::MatrixXd::Zero(A.rows(), A.cols());
        U.topRows(A.cols()) = s.matrixU();
        U = qr.householderQ() * U;
        return {std::move(U), s.singularValues(), s.matrixV()};
    }
    if (detail::prefer_qr_reduction(A.cols(), A.rows())) {
        SVDFactors t = svd(A.transpose());
        return {std::move(t.V), std::move(t.singular_values), std::move(t.U)};
    }
    Eigen::BDCSVD<Eigen::MatrixXd> s(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return {s.matrixU(), s.singularValues(), s.matrixV()};
}

/// Smallest r such that sv[r] / sigma_ref < eps (sv is 0-indexed, so sv[r] is
/// the (r+1)-th singular value); returns sv.size() when no value falls below
/// the threshold. sigma_ref defaults to sv[0]; passing a reference makes the
/// cutoff independent of the sample the values came from.
inline Eigen::Index epsilon_rank(const Eigen::VectorXd& sv, double eps,
                                 std::optional<double> reference_sigma1 = std::nullopt) {
    if (!(eps > 0.0 && eps < 1.0)) throw RangeError("epsilon_rank: requires eps in (0, 1)");
    if (sv.size() == 0) return 0;
    const double ref = reference_sigma1.value_or(sv(0));
    if (!(ref > 0.0)) return 0; // zero matrix
    for (Eigen::Index r = 0; r < sv.size(); ++r)
        if (sv(r) < eps * ref) return r;
    return sv.size();
}

namespace detail {

// In-place greedy column-pivoted Householder QR (Businger-Golub). After k
// steps, rows 0..k-1 of W hold R and the strictly-lower part holds the
// Householder vectors (unit leading entry implicit). Residual column norms
// are downdated and recomputed from scratch once the downdated value has lost
// half the significant digits relative to the last fresh computation.
struct CpqrWorkspace {
    Eigen::MatrixXd W;
    std::vector<double> tau;
    std::vector<Eigen::Index> perm;
    Eigen::VectorXd colnorm2;
    Eigen::VectorXd refnorm2;
    Eigen::Index steps = 0;

    explicit CpqrWorkspace(const Eigen::MatrixXd& A)
        : W(A), tau(static_cast<std::size_t>(std::min(A.rows(), A.cols())), 0.0),
          perm(static_cast<std::size_t>(A.cols())) {
        for (Eigen::Index j = 0; j < A.cols(); ++j) perm[static_cast<std::size_t>(j)] = j;
        colnorm2 = W.colwise().squaredNorm();
        refnorm2 = colnorm2;
    }

    void run(Eigen::Index max_steps) {
        const Eigen::Index m = W.rows(), n = W.cols();
        const Eigen::Index kmax = std::min({max_steps, m, n});
        constexpr double recompute_ratio = 2.3e-16; // (sqrt(machine eps))^2
        while (steps < kmax) {
            const Eigen::Index k = steps;
            Eigen::Index piv = k;
            for (Eigen::Index j = k + 1; j < n; ++j)
                if (colnorm2(j) > colnorm2(piv)) piv = j;
            if (piv != k) {
                W.col(k).swap(W.col(piv));
                std::swap(colnorm2(k), colnorm2(piv));
                std::swap(refnorm2(k), refnorm2(piv));
                std::swap(perm[static_cast<std::size_t>(k)], perm[static_cast<std::size_t>(piv)]);
            }
            const Eigen::Index len = m - k;
            const double normx = W.col(k).tail(len).norm();
            if (normx == 0.0) {
                tau[static_cast<std::size_t>(k)] = 0.0;
                ++steps;
                continue;
            }
            const double alpha = W(k, k);
            const double beta = (alpha >= 0.0) ? -normx : normx;
            const double v0 = alpha - beta;
            tau[static_cast<std::size_t>(k)] = -v0 / beta;
            if (len > 1) W.col(k).tail(len - 1) /= v0;
            W(k, k) = beta;
            if (k + 1 < n && len > 0) {
                auto B = W.block(k, k + 1, len, n - k - 1);
                Eigen::VectorXd v(len);
                v(0) = 1.0;
                if (len > 1) v.tail(len - 1) = W.col(k).tail(len - 1);
                Eigen::RowVectorXd w = tau[static_cast<std::size_t>(k)] * (v.transpose() * B);
                B.noalias() -= v * w;
            }
            for (Eigen::Index j = k + 1; j < n; ++j) {
                const double t = W(k, j);
                colnorm2(j) -= t * t;
                if (colnorm2(j) < recompute_ratio * refnorm2(j) || colnorm2(j) < 0.0) {
                    colnorm2(j) = (m - k - 1 > 0) ? W.col(j).tail(m - k - 1).squaredNorm() : 0.0;
                    refnorm2(j) = colnorm2(j);
                }
            }
            ++steps;
        }
    }
};

} // namespace detail

/// Greedy column-pivoted Householder QR with norm downdating. Returns
/// Q (m x k), R (k x n) upper trapezoidal with k = min(m, n), and the column
/// permutation; ties in the pivot choice go to the lowest column index.
inline PivotedQR pivoted_qr(const Eigen::MatrixXd& A) {
    if (A.rows() < 1 || A.cols() < 1) throw RangeError("pivoted_qr: empty matrix");
    const Eigen::Index m = A.rows(), n = A.cols();
    const Eigen::Index k = std::min(m, n);
    detail::CpqrWorkspace ws(A);
    ws.run(k);
    PivotedQR out;
    out.R = Eigen::MatrixXd::Zero(k, n);
    for (Eigen::Index i = 0; i < k; ++i)
        for (Eigen::Index j = i; j < n; ++j) out.R(i, j) = ws.W(i, j);
    out.permutation = ws.perm;
    // Accumulate Q = H_0 ... H_{k-1} restricted to the leading k columns.
    out.Q = Eigen::MatrixXd::Identity(m, k);
    for (Eigen::Index s = k - 1; s >= 0; --s) {
        const double t = ws.tau[static_cast<std::size_t>(s)];
        if (t == 0.0) continue;
        const Eigen::Index len = m - s;
        Eigen::VectorXd v(len);
        v(0) = 1.0;
        if (len > 1) v.tail(len - 1) = ws.W.col(s).tail(len - 1);
        auto B = out.Q.block(s, 0, len, k);
        Eigen::RowVectorXd w = t * (v.transpose() * B);
        B.noalias() -= v * w;
    }
    return out;
}

/// Rank-r interpolative decomposition via partial pivoted QR: the skeleton is
/// the first r pivot columns and the projection solves R11 P2 = R12 by back
/// substitution, mapped back to the original column order.
inline IDFactorization interpolative_decomposition(const Eigen::MatrixXd& A, Eigen::Index r) {
    const Eigen::Index m = A.rows(), n = A.cols();
    if (r < 1 || r > std::min(m, n))
        throw RangeError("interpolative_decomposition: requires 1 <= r <= min(m, n)");
    detail::CpqrWorkspace ws(A);
    ws.run(r);
    const double lead = std::abs(ws.W(0, 0));
    const double tail = std::abs(ws.W(r - 1, r - 1));
    if (!(lead > 0.0) || tail < 10.0 * std::numeric_limits<double>::epsilon() * lead)
        throw IllConditionedSkeletonError(
            "interpolative_decomposition: pivot " + std::to_string(r) +
            " is numerically negligible; reduce the requested rank");
    IDFactorization id;
    id.rank = r;
    id.skeleton.assign(ws.perm.begin(), ws.perm.begin() + r);
    id.projection = Eigen::MatrixXd::Zero(r, n);
    for (Eigen::Index i = 0; i < r; ++i) id.projection(i, ws.perm[static_cast<std::size_t>(i)]) = 1.0;
    if (r < n) {
        Eigen::MatrixXd R11 = Eigen::MatrixXd::Zero(r, r);
        for (Eigen::Index i = 0; i < r; ++i)
            for (Eigen::Index j = i; j < r; ++j) R11(i, j) = ws.W(i, j);
        const Eigen::MatrixXd R12 = ws.W.block(0, r, r, n - r);
        const Eigen::MatrixXd P2 = R11.triangularView<Eigen::Upper>().solve(R12);
        for (Eigen::Index j = 0; j < n - r; ++j)
            id.projection.col(ws.perm[static_cast<std::size_t>(r + j)]) = P2.col(j);
    }
    return id;
}

/// Statistical leverage scores of the columns of A with respect to the best
/// rank-r approximation: the squared row norms of V_r. Flags a degenerate
/// spectral gap (sigma_r == sigma_{r+1} to 1e-12 relative), where the scores
/// are not unique.
inline LeverageScores leverage_scores(const Eigen::MatrixXd& A, Eigen::Index r) {
    const Eigen::Index m = A.rows(), n = A.cols();
    if (r < 1 || r > std::min(m, n)) throw RangeError("leverage_scores: requires 1 <= r <= min(m, n)");
    LeverageScores out;
    if (detail::prefer_qr_reduction(n, m)) {
        // Wide A: row norms of V_r are column norms of U_r^T A scaled by 1/sigma,
        // with U_r available from the SVD of the small triangular factor of A^T.
        Eigen::BDCSVD<Eigen::MatrixXd> s(detail::triangular_factor(A.transpose()),
                                         Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd& sv = s.singularValues();
        if (!(sv(r - 1) > 0.0))
            throw NumericalError("leverage_scores: sigma_r vanishes; scores undefined");
        const Eigen::MatrixXd W = s.matrixV().leftCols(r) * sv.head(r).cwiseInverse().asDiagonal();
        const Eigen::MatrixXd M = W.transpose() * A; // r x n
        out.scores = M.colwise().squaredNorm();
        out.degenerate_gap = (r < sv.size()) && (sv(r - 1) - sv(r) <= 1e-12 * sv(r - 1));
        return out;
    }
    RightFactor rf = right_factor(A);
    const Eigen::VectorXd& sv = rf.singular_values;
    if (!(sv(r - 1) > 0.0)) throw NumericalError("leverage_scores: sigma_r vanishes; scores undefined");
    out.scores = rf.V.leftCols(r).rowwise().squaredNorm();
    out.degenerate_gap = (r < sv.size()) && (sv(r - 1) - sv(r) <= 1e-12 * sv(r - 1));
    return out;
}

/// Leverage scores of the rows of A (columns of A^T), without materializing
/// the transpose: the squared row norms of U_r = A V_r Sigma_r^{-1}.
inline LeverageScores row_leverage_scores(const Eigen::MatrixXd& A, Eigen::Index r) {
    const Eigen::Index mn = std::min(A.rows(), A.cols());
    if (r < 1 || r > mn) throw RangeError("row_leverage_scores: requires 1 <= r <= min(m, n)");
    RightFactor rf = right_factor(A);
    const Eigen::VectorXd& sv = rf.singular_values;
    if (!(sv(r - 1) > 0.0))
        throw NumericalError("row_leverage_scores: sigma_r vanishes; scores undefined");
    LeverageScores out;
    const Eigen::MatrixXd W = rf.V.leftCols(r) * sv.head(r).cwiseInverse().asDiagonal();
    out.scores = (A * W).rowwise().squaredNorm();
    out.degenerate_gap = (r < sv.size()) && (sv(r - 1) - sv(r) <= 1e-12 * sv(r - 1));
    return out;
}

/// Coherence gamma^(r) = max leverage score; r/n <= gamma <= 1.
inline double coherence(const Eigen::MatrixXd& A, Eigen::Index r) {
    return leverage_scores(A, r).scores.maxCoeff();
}

/// Spectral norm of the operator given by matvec (y = Ax) and rmatvec
/// (x = A^T y), via power iteration on A^T A from a fixed deterministic start
/// vector. Stops when the Rayleigh estimate changes by less than rel_tol, or
/// after max_iters (returning the current estimate; the iteration is
/// monotonically nondecreasing so a capped value is a valid lower estimate).
inline double power_iteration_norm(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& matvec,
                                   const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& rmatvec,
                                   Eigen::Index ncols, double rel_tol = 1e-6, int max_iters = 1000) {
    if (ncols < 1) throw RangeError("power_iteration_norm: empty operator");
    // Fixed pseudorandom start; any vector not orthogonal to the top right
    // singular vector works, and this one is reproducible.
    Eigen::VectorXd x(ncols);
    std::uint64_t state = 0x9E3779B97F4A7C15ull;
    for (Eigen::Index i = 0; i < ncols; ++i) {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        x(i) = static_cast<double>(state >> 11) * 0x1.0p-53 - 0.5;
    }
    x.normalize();
    double last = 0.0;
    for (int it = 0; it < max_iters; ++it) {
        Eigen::VectorXd y = matvec(x);
        const double est = y.norm();
        if (est == 0.0) return 0.0;
        x = rmatvec(y);
        const double xn = x.norm();
        if (xn == 0.0) return est;
        x /= xn;
        if (it > 0 && std::abs(est - last) <= rel_tol * est) return est;
        last = est;
    }
    return last;
}

inline double power_iteration_norm(const Eigen::MatrixXd& A, double rel_tol = 1e-6,
                                   int max_iters = 1000) {
    return power_iteration_norm(
        [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(A * v); },
        [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(A.transpose() * v); }, A.cols(),
        rel_tol, max_iters);
}

/// Exact spectral norm (largest singular value).
inline double spectral_norm_exact(const Eigen::MatrixXd& A) { return singular_values(A)(0); }

} // namespace kernid
