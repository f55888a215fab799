#ifndef SHRED_SENSING_HPP
#define SHRED_SENSING_HPP

#include "shred/surrogate.hpp"
#include "shred/types.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

namespace shred {

enum class Strategy : std::uint8_t { FIXED_OUTCORE = 0, MOBILE_SENSOR = 1, MOBILE_PROBES = 2 };

inline std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::FIXED_OUTCORE: return "FIXED_OUTCORE";
        case Strategy::MOBILE_SENSOR: return "MOBILE_SENSOR";
        case Strategy::MOBILE_PROBES: return "MOBILE_PROBES";
    }
    throw DomainError("unknown strategy");
}

struct SensorConfig {
    Strategy strategy = Strategy::FIXED_OUTCORE;
    std::vector<Vec2> positions;  // fixed positions, or initial positions for mobiles
    double noise_sigma = 0.01;
    std::uint64_t seed = 0;

    int input_dim() const { return strategy == Strategy::MOBILE_PROBES ? 6 : 3; }
    FieldId measured_field() const {
        if (strategy == Strategy::FIXED_OUTCORE) return FieldId::FLUX;
        if (strategy == Strategy::MOBILE_SENSOR) return FieldId::PRECURSOR;
        throw DomainError("probes measure no field");
    }
};

// s x N_t noisy measurements plus per-particle deposition flags over time.
struct MeasurementSeries {
    Matrix values;  // s x N_t
    std::vector<std::vector<bool>> stuck_flags;  // per particle, per time step
};

struct LaggedWindows {
    std::vector<Matrix> windows;  // each (K+1) x s, one per time index
    int lag = 0;
};

// sin of the smallest angle subtended by the triple; collinear points give 0.
inline double collinearity_angle(const Vec2& a, const Vec2& b, const Vec2& c) {
    const Vec2 ab = b - a, ac = c - a;
    const double na = ab.norm(), nc = ac.norm();
    if (na == 0.0 || nc == 0.0) return 0.0;
    const double cross = ab.x() * ac.y() - ab.y() * ac.x();
    return std::abs(cross) / (na * nc);
}

inline bool non_collinear(const std::vector<Vec2>& pts, double tol = 1e-3) {
    if (pts.size() != 3) return true;
    return collinearity_angle(pts[0], pts[1], pts[2]) >= tol &&
           collinearity_angle(pts[1], pts[0], pts[2]) >= tol &&
           collinearity_angle(pts[2], pts[0], pts[1]) >= tol;
}

// n distinct reflector node positions, uniform over the region, re-sampled
// until non-collinear (fixed sensors must allow triangulation).
inline std::vector<Vec2> sample_fixed_sensors(const Grid2D& grid, int n, std::uint64_t seed) {
    std::vector<std::size_t> reflector_nodes;
    for (int j = 0; j < grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i)
            if (grid.region_label[grid.index(i, j)] == Region::REFLECTOR)
                reflector_nodes.push_back(grid.index(i, j));
    if (static_cast<int>(reflector_nodes.size()) < n)
        throw DomainError("not enough reflector nodes for " + std::to_string(n) + " sensors");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, reflector_nodes.size() - 1);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<std::size_t> chosen;
        while (static_cast<int>(chosen.size()) < n) {
            const std::size_t k = reflector_nodes[pick(rng)];
            if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) chosen.push_back(k);
        }
        std::vector<Vec2> pts;
        for (std::size_t k : chosen) {
            const int i = static_cast<int>(k % grid.nx);
            const int j = static_cast<int>(k / grid.nx);
            pts.push_back(grid.node_position(i, j));
        }
        if (n != 3 || non_collinear(pts)) return pts;
    }
    throw DomainError("could not find a non-collinear sensor triple in 100 attempts");
}

// Bilinear interpolation of nodal values at an arbitrary in-domain point.
inline double bilinear_interpolate(const Grid2D& grid, const Eigen::Ref<const Vector>& nodal,
                                   const Vec2& p) {
    if (!grid.contains(p)) throw DomainError("interpolation point outside domain");
    const double fx = (p.x() - grid.x0) / grid.dx();
    const double fy = (p.y() - grid.y0) / grid.dy();
    const int i = std::min(static_cast<int>(fx), grid.nx - 2);
    const int j = std::min(static_cast<int>(fy), grid.ny - 2);
    const double tx = fx - i, ty = fy - j;
    const double v00 = nodal(static_cast<Eigen::Index>(grid.index(i, j)));
    const double v10 = nodal(static_cast<Eigen::Index>(grid.index(i + 1, j)));
    const double v01 = nodal(static_cast<Eigen::Index>(grid.index(i, j + 1)));
    const double v11 = nodal(static_cast<Eigen::Index>(grid.index(i + 1, j + 1)));
    return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

// Point sensor reading: bilinear interpolant of the (rescaled) field times
// (1 + eps), eps ~ N(0, sigma^2).  sigma = 0 gives the exact interpolant.
inline double measure_point(const Grid2D& grid, const Eigen::Ref<const Vector>& rescaled_field,
                            const Vec2& position, double noise_sigma, std::mt19937_64& rng) {
    const double value = bilinear_interpolate(grid, rescaled_field, position);
    if (noise_sigma == 0.0) return value;
    std::normal_distribution<double> noise(0.0, noise_sigma);
    return (1.0 + noise(rng)) * value;
}

struct Trajectory {
    std::vector<Vec2> positions;    // one per time step
    std::vector<bool> stuck_flags;  // monotone: once stuck, stays stuck
    int implicit_fallbacks = 0;     // steps where fixed-point iteration failed
};

using VelocityFn = std::function<Vec2(const Vec2&, double)>;

namespace detail {
inline Vec2 project_to_boundary(const Vec2& p, double x0, double x1, double y0, double y1) {
    Vec2 q(std::clamp(p.x(), x0, x1), std::clamp(p.y(), y0, y1));
    // An interior point that drifted logically "out" maps to itself; callers
    // only project points already outside the box.
    return q;
}
}  // namespace detail

// Implicit Euler particle advection: s_{n+1} = s_n + dt * u(s_{n+1}, t_{n+1}),
// solved by fixed-point iteration.  A particle whose iterate leaves the domain
// is projected to the nearest boundary point and is stuck from then on.
inline Trajectory track_particle(const VelocityFn& velocity, double x0, double x1, double y0,
                                 double y1, const Vec2& start, double dt, int n_steps) {
    constexpr int kMaxIters = 20;
    constexpr double kTol = 1e-10;
    Trajectory traj;
    traj.positions.reserve(n_steps + 1);
    traj.stuck_flags.reserve(n_steps + 1);
    Vec2 s = start;
    bool stuck = !( s.x() >= x0 && s.x() <= x1 && s.y() >= y0 && s.y() <= y1);
    if (stuck) s = detail::project_to_boundary(s, x0, x1, y0, y1);
    traj.positions.push_back(s);
    traj.stuck_flags.push_back(stuck);
    for (int n = 0; n < n_steps; ++n) {
        if (stuck) {
            traj.positions.push_back(s);
            traj.stuck_flags.push_back(true);
            continue;
        }
        const double t_next = (n + 1) * dt;
        Vec2 iterate = s;
        bool converged = false;
        for (int it = 0; it < kMaxIters; ++it) {
            Vec2 candidate = s + dt * velocity(detail::project_to_boundary(iterate, x0, x1, y0, y1),
                                               t_next);
            if (candidate.x() < x0 || candidate.x() > x1 || candidate.y() < y0 ||
                candidate.y() > y1) {
                s = detail::project_to_boundary(candidate, x0, x1, y0, y1);
                stuck = true;
                converged = true;
                break;
            }
            const double change = (candidate - iterate).norm();
            iterate = candidate;
            if (change < kTol) {
                s = iterate;
                converged = true;
                break;
            }
        }
        if (!converged) {
            // Fall back to one explicit step; rare, but keeps the march total.
            Vec2 candidate = s + dt * velocity(s, n * dt);
            if (candidate.x() < x0 || candidate.x() > x1 || candidate.y() < y0 ||
                candidate.y() > y1) {
                candidate = detail::project_to_boundary(candidate, x0, x1, y0, y1);
                stuck = true;
            }
            s = candidate;
            ++traj.implicit_fallbacks;
        }
        traj.positions.push_back(s);
        traj.stuck_flags.push_back(stuck);
    }
    return traj;
}

// Assemble the s x N_t input series for one case under a sensing strategy.
// Field readings are noisy per Eq.-of-measure; trajectory coordinates are fed
// noiseless and normalized to [0,1] by the domain bounds.
inline MeasurementSeries build_measurements(const SurrogateConfig& cfg, const ParametricCase& c,
                                            const Grid2D& grid, const SensorConfig& sensors,
                                            double ref_min, double ref_max) {
    const Eigen::Index nt = c.n_steps();
    MeasurementSeries out;
    std::mt19937_64 rng(sensors.seed);

    auto rescaled_column = [&](FieldId f, Eigen::Index t) -> Vector {
        const auto& m = c.fields.at(f);
        return (m.col(t).array() - ref_min) / (ref_max - ref_min);
    };

    if (sensors.strategy == Strategy::FIXED_OUTCORE) {
        if (sensors.positions.size() != 3)
            throw DomainError("FIXED_OUTCORE requires exactly 3 positions");
        out.values.resize(3, nt);
        for (Eigen::Index t = 0; t < nt; ++t) {
            const Vector col = rescaled_column(FieldId::FLUX, t);
            for (int k = 0; k < 3; ++k)
                out.values(k, t) =
                    measure_point(grid, col, sensors.positions[k], sensors.noise_sigma, rng);
        }
        return out;
    }

    auto velocity = [&](const Vec2& p, double t) { return velocity_at(cfg, p, t, c.tau); };
    const int n_particles = sensors.strategy == Strategy::MOBILE_SENSOR ? 1 : 3;
    if (static_cast<int>(sensors.positions.size()) != n_particles)
        throw DomainError("wrong number of initial positions for mobile sensing");
    std::vector<Trajectory> trajs;
    for (int p = 0; p < n_particles; ++p)
        trajs.push_back(track_particle(velocity, cfg.x0, cfg.x1, cfg.y0, cfg.y1,
                                       sensors.positions[p], c.dt, static_cast<int>(nt) - 1));
    for (const auto& tr : trajs) out.stuck_flags.push_back(tr.stuck_flags);

    if (sensors.strategy == Strategy::MOBILE_SENSOR) {
        out.values.resize(3, nt);
        for (Eigen::Index t = 0; t < nt; ++t) {
            const Vector col = rescaled_column(FieldId::PRECURSOR, t);
            const Vec2& pos = trajs[0].positions[t];
            out.values(0, t) = measure_point(grid, col, pos, sensors.noise_sigma, rng);
            const Vec2 nrm = grid.normalized(pos);
            out.values(1, t) = nrm.x();
            out.values(2, t) = nrm.y();
        }
    } else {  // MOBILE_PROBES
        out.values.resize(6, nt);
        for (Eigen::Index t = 0; t < nt; ++t) {
            for (int p = 0; p < 3; ++p) {
                const Vec2 nrm = grid.normalized(trajs[p].positions[t]);
                out.values(2 * p, t) = nrm.x();
                out.values(2 * p + 1, t) = nrm.y();
            }
        }
    }
    return out;
}

// Lagged windows [y_{k-K}, ..., y_k]; windows before t_K are front-padded by
// replicating y_0, so every time index has a full (K+1) x s window.
inline LaggedWindows lag_series(const MeasurementSeries& series, int lag) {
    if (lag < 1) throw DomainError("lag must be >= 1");
    const Eigen::Index nt = series.values.cols();
    const Eigen::Index s = series.values.rows();
    LaggedWindows out;
    out.lag = lag;
    out.windows.reserve(nt);
    for (Eigen::Index k = 0; k < nt; ++k) {
        Matrix w(lag + 1, s);
        for (int step = 0; step <= lag; ++step) {
            const Eigen::Index src = std::max<Eigen::Index>(0, k - lag + step);
            w.row(step) = series.values.col(src).transpose();
        }
        out.windows.push_back(std::move(w));
    }
    return out;
}

// Measurement CSV: metadata comment lines, then one row per time step.
inline void export_measurements_csv(const MeasurementSeries& series, const SensorConfig& cfg,
                                    double dt, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "# strategy=" << strategy_name(cfg.strategy) << " sigma=" << cfg.noise_sigma
       << " seed=" << cfg.seed << "\n";
    os << "t";
    for (Eigen::Index k = 0; k < series.values.rows(); ++k) os << ",y_" << (k + 1);
    os << "\n";
    char buf[32];
    for (Eigen::Index t = 0; t < series.values.cols(); ++t) {
        std::snprintf(buf, sizeof buf, "%.17g", t * dt);
        os << buf;
        for (Eigen::Index k = 0; k < series.values.rows(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", series.values(k, t));
            os << ',' << buf;
        }
        os << "\n";
    }
    if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace shred

#endif
