#ifndef SHRED_METRICS_HPP
#define SHRED_METRICS_HPP

#include "shred/ensemble.hpp"
#include "shred/types.hpp"

#include <filesystem>
#include <fstream>

namespace shred {

// Average (over cases, then time) relative Euclidean error between columns.
// Used both for the latent error e and the full-space field error eps_2.
inline double columnwise_relative_error(const std::vector<Matrix>& pred,
                                        const std::vector<Matrix>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw DimensionError("mismatched case counts in error metric");
    double case_sum = 0.0;
    for (std::size_t c = 0; c < pred.size(); ++c) {
        if (pred[c].rows() != truth[c].rows() || pred[c].cols() != truth[c].cols())
            throw DimensionError("mismatched shapes in error metric");
        double time_sum = 0.0;
        for (Eigen::Index j = 0; j < truth[c].cols(); ++j) {
            const double denom = truth[c].col(j).norm();
            if (denom == 0.0) throw DomainError("zero-norm truth column in error metric");
            time_sum += (pred[c].col(j) - truth[c].col(j)).norm() / denom;
        }
        case_sum += time_sum / static_cast<double>(truth[c].cols());
    }
    return case_sum / static_cast<double>(pred.size());
}

// Latent test error e over the test cases (predictions vs encoded truth).
inline double latent_error(const std::vector<Matrix>& pred_latents,
                           const std::vector<Matrix>& true_latents) {
    return columnwise_relative_error(pred_latents, true_latents);
}

// Full-space relative error eps_2 for one field, in physical units.
inline double field_error(const std::vector<Matrix>& pred_fields,
                          const std::vector<Matrix>& true_fields) {
    return columnwise_relative_error(pred_fields, true_fields);
}

// Area-weighted mean over CORE nodes, one value per time step.  The grid is
// uniform, so the weights reduce to a plain average over core nodes.
inline Vector spatial_average_series(const Grid2D& grid, const Matrix& field) {
    if (field.rows() != grid.node_count()) throw DimensionError("field height != node count");
    std::vector<Eigen::Index> core;
    for (Eigen::Index k = 0; k < grid.node_count(); ++k)
        if (grid.region_label[static_cast<std::size_t>(k)] == Region::CORE) core.push_back(k);
    if (core.empty()) throw DomainError("grid has no core nodes");
    Vector out(field.cols());
    for (Eigen::Index j = 0; j < field.cols(); ++j) {
        double sum = 0.0;
        for (Eigen::Index k : core) sum += field(k, j);
        out(j) = sum / static_cast<double>(core.size());
    }
    return out;
}

namespace detail {
inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
inline std::ofstream open_csv(const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}
}  // namespace detail

// One row per field, one column per strategy (Table-2-style layout).
inline void write_field_error_table(
    const std::vector<std::string>& field_rows, const std::vector<std::string>& strategy_cols,
    const std::vector<std::vector<double>>& errors,  // [field][strategy]
    const std::filesystem::path& path) {
    auto os = detail::open_csv(path);
    os << "field";
    for (const auto& s : strategy_cols) os << ',' << s;
    os << "\n";
    for (std::size_t f = 0; f < field_rows.size(); ++f) {
        os << field_rows[f];
        for (double e : errors[f]) os << ',' << detail::fmt(e);
        os << "\n";
    }
    if (!os) throw IoError("write failed: " + path.string());
}

// Truth, ensemble mean, and +-2 std band for each latent mode over time.
inline void write_latent_band_csv(const Matrix& truth, const EnsemblePrediction& pred, double dt,
                                  const std::filesystem::path& path) {
    auto os = detail::open_csv(path);
    os << "t";
    for (Eigen::Index m = 0; m < truth.rows(); ++m)
        os << ",truth_" << m << ",mean_" << m << ",lo_" << m << ",hi_" << m;
    os << "\n";
    for (Eigen::Index j = 0; j < truth.cols(); ++j) {
        os << detail::fmt(j * dt);
        for (Eigen::Index m = 0; m < truth.rows(); ++m) {
            const double mu = pred.mean(m, j), sd = pred.sample_std(m, j);
            os << ',' << detail::fmt(truth(m, j)) << ',' << detail::fmt(mu) << ','
               << detail::fmt(mu - 2.0 * sd) << ',' << detail::fmt(mu + 2.0 * sd);
        }
        os << "\n";
    }
    if (!os) throw IoError("write failed: " + path.string());
}

// Spatial-average dynamics with a 95% interval (mean +- 1.96 * xi_L).
inline void write_average_series_csv(const Vector& truth_avg, const Vector& pred_avg, double xi,
                                     double dt, const std::filesystem::path& path) {
    auto os = detail::open_csv(path);
    os << "t,truth,pred,lo,hi\n";
    for (Eigen::Index j = 0; j < truth_avg.size(); ++j) {
        os << detail::fmt(j * dt) << ',' << detail::fmt(truth_avg(j)) << ','
           << detail::fmt(pred_avg(j)) << ',' << detail::fmt(pred_avg(j) - 1.96 * xi) << ','
           << detail::fmt(pred_avg(j) + 1.96 * xi) << "\n";
    }
    if (!os) throw IoError("write failed: " + path.string());
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows,
                            const std::filesystem::path& path) {
    auto os = detail::open_csv(path);
    os << "L,xi,xi_normalized\n";
    for (const auto& r : rows)
        os << r.members << ',' << detail::fmt(r.xi) << ',' << detail::fmt(r.xi_normalized)
           << "\n";
    if (!os) throw IoError("write failed: " + path.string());
}

// Per-node snapshot grid (mean or std field at one time), nx columns per row.
inline void write_snapshot_grid_csv(const Grid2D& grid, const Eigen::Ref<const Vector>& nodal,
                                    const std::filesystem::path& path) {
    if (nodal.size() != grid.node_count()) throw DimensionError("nodal size != node count");
    auto os = detail::open_csv(path);
    for (int j = 0; j < grid.ny; ++j) {
        for (int i = 0; i < grid.nx; ++i) {
            if (i) os << ',';
            os << detail::fmt(nodal(static_cast<Eigen::Index>(grid.index(i, j))));
        }
        os << "\n";
    }
    if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace shred

#endif
