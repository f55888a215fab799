#ifndef SHRED_ENSEMBLE_HPP
#define SHRED_ENSEMBLE_HPP

#include "shred/sensing.hpp"
#include "shred/types.hpp"

#include <random>

namespace shred {

// Per-case ensemble statistics: mean prediction, elementwise sample standard
// deviation, and the mean-estimator uncertainty xi_L (RMS of std/sqrt(L)).
struct EnsemblePrediction {
    Matrix mean;        // r_total x N_t
    Matrix sample_std;  // r_total x N_t
    double xi = 0.0;
    int member_count = 0;
};

// L distinct k-subsets of the pool, uniform among the non-collinear ones.
// The sequence is prefix-stable per seed: the first L' subsets of a longer
// request equal the subsets of a shorter one, so ensemble sweeps can reuse
// trained members.
inline std::vector<std::vector<int>> sample_configurations(const std::vector<Vec2>& pool,
                                                           int choose, int count,
                                                           std::uint64_t seed) {
    const int n = static_cast<int>(pool.size());
    if (choose < 1 || choose > n) throw DomainError("subset size out of range");
    std::vector<std::vector<int>> valid;
    std::vector<int> comb(choose);
    std::iota(comb.begin(), comb.end(), 0);
    while (true) {
        bool ok = true;
        if (choose == 3) {
            ok = non_collinear({pool[comb[0]], pool[comb[1]], pool[comb[2]]});
        }
        if (ok) valid.push_back(comb);
        int i = choose - 1;
        while (i >= 0 && comb[i] == n - choose + i) --i;
        if (i < 0) break;
        ++comb[i];
        for (int j = i + 1; j < choose; ++j) comb[j] = comb[j - 1] + 1;
    }
    if (static_cast<int>(valid.size()) < count)
        throw DomainError("only " + std::to_string(valid.size()) +
                          " valid sensor subsets available, requested " + std::to_string(count));
    std::mt19937_64 rng(seed);
    std::shuffle(valid.begin(), valid.end(), rng);
    valid.resize(count);
    return valid;
}

// Elementwise mean and sample standard deviation of L member predictions,
// plus xi_L: the RMS over coefficients and time of std/sqrt(L).
inline EnsemblePrediction ensemble_predict(const std::vector<Matrix>& member_predictions) {
    const int count = static_cast<int>(member_predictions.size());
    if (count < 2) throw DomainError("ensemble needs at least 2 members");
    const Eigen::Index rows = member_predictions[0].rows();
    const Eigen::Index cols = member_predictions[0].cols();
    for (const auto& p : member_predictions)
        if (p.rows() != rows || p.cols() != cols)
            throw DimensionError("ensemble member shape mismatch");
    EnsemblePrediction out;
    out.member_count = count;
    out.mean = Matrix::Zero(rows, cols);
    for (const auto& p : member_predictions) out.mean += p;
    out.mean /= static_cast<double>(count);
    Matrix var = Matrix::Zero(rows, cols);
    for (const auto& p : member_predictions) var += (p - out.mean).cwiseAbs2();
    var /= static_cast<double>(count - 1);
    out.sample_std = var.cwiseSqrt();
    out.xi = std::sqrt(var.mean() / static_cast<double>(count));
    return out;
}

// Aggregate xi over several cases (RMS, keeping units of std).
inline double aggregate_xi(const std::vector<EnsemblePrediction>& per_case) {
    if (per_case.empty()) throw DomainError("no cases to aggregate");
    double sq = 0.0;
    for (const auto& p : per_case) sq += p.xi * p.xi;
    return std::sqrt(sq / static_cast<double>(per_case.size()));
}

struct SweepRow {
    int members;
    double xi;
    double xi_normalized;
};

// Sensitivity of xi_L to the ensemble size.  `predictions[l][case]` holds the
// latent prediction of member l; L values use nested member prefixes so each
// member is trained once.
inline std::vector<SweepRow> sensitivity_sweep(
    const std::vector<std::vector<Matrix>>& predictions, const std::vector<int>& l_values) {
    if (l_values.empty()) throw DomainError("sweep needs at least one L value");
    std::vector<SweepRow> rows;
    for (int l : l_values) {
        if (l < 2 || l > static_cast<int>(predictions.size()))
            throw DomainError("sweep L value out of range: " + std::to_string(l));
        const std::size_t n_cases = predictions[0].size();
        std::vector<EnsemblePrediction> per_case;
        for (std::size_t c = 0; c < n_cases; ++c) {
            std::vector<Matrix> members;
            for (int m = 0; m < l; ++m) members.push_back(predictions[m][c]);
            per_case.push_back(ensemble_predict(members));
        }
        rows.push_back({l, aggregate_xi(per_case), 0.0});
    }
    double xi_max = 0.0;
    for (const auto& r : rows) xi_max = std::max(xi_max, r.xi);
    for (auto& r : rows) r.xi_normalized = xi_max > 0.0 ? r.xi / xi_max : 0.0;
    return rows;
}

}  // namespace shred

#endif
