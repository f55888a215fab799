#ifndef SHRED_SVD_HPP
#define SHRED_SVD_HPP

#include "shred/types.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <random>

namespace shred {

// Rank-limited factorization X ~= U * diag(sigma) * V^T.  V is kept only when
// the caller needs coefficients; the basis itself is (U, sigma).
struct SvdResult {
    Matrix U;       // N_h x r, orthonormal columns
    Vector sigma;   // r, non-increasing
    Matrix coeffs;  // r x cols, equal to diag(sigma) * V^T
};

inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

// Thin orthonormal basis of the columns of Y.
inline Matrix orthonormalize(const Matrix& y) {
    Eigen::HouseholderQR<Matrix> qr(y);
    Matrix q = qr.householderQ() * Matrix::Identity(y.rows(), y.cols());
    return q;
}

// Randomized range finder + small dense SVD (Halko et al. style).
// Deterministic for a fixed seed.
inline SvdResult randomized_svd(const Matrix& x, int rank, int oversample = 10,
                                int power_iters = 2, std::uint64_t seed = 0) {
    if (rank < 1) throw DomainError("rank must be >= 1");
    const Eigen::Index k = rank + oversample;
    if (k > std::min(x.rows(), x.cols()))
        throw DimensionError("rank + oversample exceeds matrix dimensions");
    Matrix omega = gaussian_matrix(x.cols(), k, seed);
    Matrix q = orthonormalize(x * omega);
    for (int it = 0; it < power_iters; ++it) {
        q = orthonormalize(x.transpose() * q);
        q = orthonormalize(x * q);
    }
    Matrix b = q.transpose() * x;  // k x cols
    Eigen::BDCSVD<Matrix> svd(b, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out;
    out.U = q * svd.matrixU().leftCols(rank);
    out.sigma = svd.singularValues().head(rank);
    out.coeffs = out.sigma.asDiagonal() * svd.matrixV().leftCols(rank).transpose();
    return out;
}

// Dense truncated SVD, used as the exact reference path.
inline SvdResult dense_svd(const Matrix& x, int rank) {
    if (rank < 1 || rank > std::min(x.rows(), x.cols()))
        throw DimensionError("rank out of range for dense SVD");
    Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdResult out;
    out.U = svd.matrixU().leftCols(rank);
    out.sigma = svd.singularValues().head(rank);
    out.coeffs = out.sigma.asDiagonal() * svd.matrixV().leftCols(rank).transpose();
    return out;
}

// Streaming SVD state: maintains a rank-capped factorization of all columns
// seen so far via residual expansion and small-core re-diagonalization.
class IncrementalSvd {
   public:
    IncrementalSvd(Eigen::Index n_rows, int r_max)
        : n_rows_(n_rows), r_max_(r_max) {
        if (r_max < 1) throw DomainError("r_max must be >= 1");
    }

    void update(const Matrix& new_columns) {
        if (new_columns.rows() != n_rows_)
            throw DimensionError("incremental SVD: column height mismatch");
        if (new_columns.cols() == 0) return;
        if (u_.cols() == 0) {
            seed_from(new_columns);
            return;
        }
        const Matrix proj = u_.transpose() * new_columns;          // r x c
        Matrix residual = new_columns - u_ * proj;                 // N x c
        // Orthonormal complement of the residual; columns with negligible
        // norm after a second projection pass are dropped.
        Eigen::HouseholderQR<Matrix> qr(residual);
        Matrix qfull = qr.householderQ() * Matrix::Identity(n_rows_, residual.cols());
        Matrix rfull = qr.matrixQR()
                           .topRows(residual.cols())
                           .template triangularView<Eigen::Upper>();
        // Keep only directions carrying real residual energy.
        std::vector<Eigen::Index> keep;
        const double tol = 1e-12 * std::max(1.0, new_columns.norm());
        for (Eigen::Index i = 0; i < rfull.rows(); ++i)
            if (rfull.row(i).norm() > tol) keep.push_back(i);
        Matrix q(n_rows_, static_cast<Eigen::Index>(keep.size()));
        Matrix rkept(static_cast<Eigen::Index>(keep.size()), residual.cols());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            q.col(static_cast<Eigen::Index>(i)) = qfull.col(keep[i]);
            rkept.row(static_cast<Eigen::Index>(i)) = rfull.row(keep[i]);
        }
        const Eigen::Index r = u_.cols(), c = new_columns.cols(),
                           q_cols = q.cols();
        // Core matrix [ diag(sigma)  proj ; 0  R ] of the expanded factorization.
        Matrix core = Matrix::Zero(r + q_cols, r + c);
        core.topLeftCorner(r, r) = sigma_.asDiagonal();
        core.block(0, r, r, c) = proj;
        if (q_cols > 0) core.block(r, r, q_cols, c) = rkept;
        Eigen::BDCSVD<Matrix> svd(core, Eigen::ComputeThinU);
        Matrix expanded(n_rows_, r + q_cols);
        expanded.leftCols(r) = u_;
        if (q_cols > 0) expanded.rightCols(q_cols) = q;
        const Eigen::Index r_new =
            std::min<Eigen::Index>(r_max_, svd.singularValues().size());
        u_ = expanded * svd.matrixU().leftCols(r_new);
        sigma_ = svd.singularValues().head(r_new);
        for (Eigen::Index i = r_new; i < svd.singularValues().size(); ++i)
            discarded_energy_ += svd.singularValues()(i) * svd.singularValues()(i);
        if (++updates_since_reorth_ >= kReorthEvery) reorthogonalize();
    }

    const Matrix& basis() const { return u_; }
    const Vector& singular_values() const { return sigma_; }
    double discarded_energy() const { return discarded_energy_; }

   private:
    static constexpr int kReorthEvery = 50;

    void seed_from(const Matrix& cols) {
        Eigen::BDCSVD<Matrix> svd(cols, Eigen::ComputeThinU);
        const Eigen::Index r_new =
            std::min<Eigen::Index>(r_max_, svd.singularValues().size());
        u_ = svd.matrixU().leftCols(r_new);
        sigma_ = svd.singularValues().head(r_new);
        for (Eigen::Index i = r_new; i < svd.singularValues().size(); ++i)
            discarded_energy_ += svd.singularValues()(i) * svd.singularValues()(i);
    }

    // Modified Gram-Schmidt pass; floating drift accumulates over many updates.
    void reorthogonalize() {
        for (Eigen::Index j = 0; j < u_.cols(); ++j) {
            for (Eigen::Index i = 0; i < j; ++i)
                u_.col(j) -= u_.col(i).dot(u_.col(j)) * u_.col(i);
            u_.col(j).normalize();
        }
        updates_since_reorth_ = 0;
    }

    Eigen::Index n_rows_;
    int r_max_;
    Matrix u_;
    Vector sigma_;
    double discarded_energy_ = 0.0;
    int updates_since_reorth_ = 0;
};

// Hierarchical SVD: truncated SVD of each block, then pairwise balanced-tree
// merges of the weighted left factors [U1*S1 | U2*S2] until one basis remains.
inline SvdResult hierarchical_svd(const std::vector<Matrix>& blocks, int rank) {
    if (blocks.empty()) throw DomainError("hierarchical SVD needs at least one block");
    const Eigen::Index n_rows = blocks.front().rows();
    Eigen::Index total_cols = 0;
    for (const auto& b : blocks) {
        if (b.rows() != n_rows) throw DimensionError("hierarchical SVD: block height mismatch");
        total_cols += b.cols();
    }
    if (rank > n_rows) throw DimensionError("rank exceeds row count");

    struct Partial {
        Matrix u;
        Vector sigma;
    };
    // Intermediate stages keep extra modes beyond the requested rank so the
    // per-block truncation error does not contaminate the leading values;
    // the final truncation happens after the last merge.
    const int work_rank = 2 * rank + 10;
    std::vector<Partial> level;
    level.reserve(blocks.size());
    for (const auto& b : blocks) {
        const int r = static_cast<int>(std::min<Eigen::Index>(work_rank, std::min(b.rows(), b.cols())));
        SvdResult s = dense_svd(b, r);
        level.push_back({std::move(s.U), std::move(s.sigma)});
    }
    while (level.size() > 1) {
        std::vector<Partial> next;
        next.reserve((level.size() + 1) / 2);
        for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
            const auto& a = level[i];
            const auto& b = level[i + 1];
            Matrix merged(n_rows, a.u.cols() + b.u.cols());
            merged.leftCols(a.u.cols()) = a.u * a.sigma.asDiagonal();
            merged.rightCols(b.u.cols()) = b.u * b.sigma.asDiagonal();
            const int r = static_cast<int>(
                std::min<Eigen::Index>(work_rank, std::min(merged.rows(), merged.cols())));
            SvdResult s = dense_svd(merged, r);
            next.push_back({std::move(s.U), std::move(s.sigma)});
        }
        if (level.size() % 2 == 1) next.push_back(std::move(level.back()));
        level = std::move(next);
    }
    SvdResult out;
    const int final_r = static_cast<int>(
        std::min<Eigen::Index>(rank, level.front().sigma.size()));
    out.U = level.front().u.leftCols(final_r);
    out.sigma = level.front().sigma.head(final_r);
    // Coefficients of the original columns in the merged basis.
    out.coeffs.resize(out.U.cols(), total_cols);
    Eigen::Index col = 0;
    for (const auto& b : blocks) {
        out.coeffs.middleCols(col, b.cols()) = out.U.transpose() * b;
        col += b.cols();
    }
    return out;
}

// Relative energy content I(r) = 1 - sum_{k<=r} sigma_k^2 / sum_n sigma_n^2.
inline double energy_content(const Vector& sigma, int r) {
    if (r < 1 || r > sigma.size()) throw DomainError("rank out of range for energy content");
    const double total = sigma.squaredNorm();
    if (total == 0.0) throw DomainError("zero-energy matrix");
    const double kept = sigma.head(r).squaredNorm();
    return 1.0 - kept / total;
}

// Smallest r with I(r) <= energy_tol, clamped to r_cap.
inline int select_rank(const Vector& sigma, double energy_tol = 0.01, int r_cap = 10) {
    int r = static_cast<int>(sigma.size());
    for (int k = 1; k <= sigma.size(); ++k) {
        if (energy_content(sigma, k) <= energy_tol) {
            r = k;
            break;
        }
    }
    return std::min(r, r_cap);
}

// Canonical sign convention: in every mode the entry of maximal absolute
// value is positive.  Flipping a column of U together with the matching row
// of the coefficients leaves U*diag(sigma)*V^T unchanged.
inline void fix_signs(Matrix& u, Matrix& coeffs) {
    if (u.cols() != coeffs.rows()) throw DimensionError("fix_signs: shape mismatch");
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        Eigen::Index imax;
        u.col(j).cwiseAbs().maxCoeff(&imax);
        if (u(imax, j) < 0.0) {
            u.col(j) = -u.col(j);
            coeffs.row(j) = -coeffs.row(j);
        }
    }
}

}  // namespace shred

#endif
