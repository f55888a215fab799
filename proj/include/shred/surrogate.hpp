#ifndef SHRED_SURROGATE_HPP
#define SHRED_SURROGATE_HPP

#include "shred/types.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace shred {

// Desk-scale stand-in for the full-order model: a prescribed recirculating
// flow whose pump decays exponentially with time constant tau, coupled to
// explicit finite-difference transport of flux, temperature and precursor.
struct SurrogateConfig {
    int nx = 64, ny = 128;
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 2.0;
    double reflector_band = 0.15;

    std::vector<double> tau_list = {1.0, 2.0, 3.0, 4.0, 5.0, 6.5, 8.0, 9.0, 10.0};
    int n_steps = 200;
    double dt = 0.05;

    double u0 = 0.8;  // stream-function amplitude, peak speed ~ pi*u0

    // Scalar transport coefficients.  Strong flux diffusion keeps the core
    // tightly coupled so the pump transient shows up as an amplitude change
    // the out-core sensors can see, not just an internal shape shift.
    double diff_flux = 4.0e-3;
    double diff_temp = 4.0e-3;
    double diff_prec = 5.0e-5;
    double rho0 = 1.0;           // core reactivity rate, 1/s
    double rho_absorber = 0.3;   // extra removal in the reflector band, 1/s
    double beta_feedback = 0.1;  // flux-temperature feedback, 1/(K s)
    double t_ref = 900.0;        // feedback pivot temperature T0, K
    double t_cool = 900.0;       // coolant temperature, K
    double heat_source = 2.0;    // temperature source per unit flux, K/s
    double cooling_bg = 0.1;     // background heat-removal rate, 1/s
    double cooling_hx = 20.0;     // heat-exchanger band removal rate, 1/s
    double prec_source = 1.0;    // precursor production per unit flux, 1/s
    double prec_decay = 0.30;    // precursor decay constant lambda, 1/s
    int n_substeps = 10;          // Euler substeps per saved interval dt

    double nat_circulation = 0.05;  // pump floor, keeps late-time dynamics alive
    double steady_tol = 1.0e-8;
    int steady_max_steps = 200000;
    std::uint64_t seed = 0;

    Grid2D make_grid() const {
        return Grid2D::uniform(nx, ny, x0, x1, y0, y1, reflector_band);
    }
};

// Pump throttle: exponential decay towards a natural-circulation floor.
inline double pump_factor(double t, double tau, double floor = 0.05) {
    if (!(tau > 0.0)) throw DomainError("pump_factor: tau must be positive");
    if (t < 0.0) throw DomainError("pump_factor: t must be non-negative");
    const double e = std::exp(-t / tau);
    return e + floor * (1.0 - e);
}

namespace detail {
// Stream function psi = u0 * sin(pi x_hat) * sin(pi y_hat), normalized coords.
inline double stream_function(const SurrogateConfig& cfg, double x, double y) {
    const double xh = std::clamp((x - cfg.x0) / (cfg.x1 - cfg.x0), 0.0, 1.0);
    const double yh = std::clamp((y - cfg.y0) / (cfg.y1 - cfg.y0), 0.0, 1.0);
    return cfg.u0 * std::sin(M_PI * xh) * std::sin(M_PI * yh);
}
}  // namespace detail

// Prescribed velocity u = curl(0,0,psi) scaled by the pump factor.
// Analytically divergence-free, zero normal component on the boundary.
inline Vec2 velocity_at(const SurrogateConfig& cfg, const Vec2& p, double t, double tau) {
    if (p.x() < cfg.x0 || p.x() > cfg.x1 || p.y() < cfg.y0 || p.y() > cfg.y1)
        throw DomainError("velocity_at: position outside domain");
    const double lx = cfg.x1 - cfg.x0, ly = cfg.y1 - cfg.y0;
    const double xh = (p.x() - cfg.x0) / lx;
    const double yh = (p.y() - cfg.y0) / ly;
    const double pf = pump_factor(t, tau, cfg.nat_circulation);
    const double ux = cfg.u0 * (M_PI / ly) * std::sin(M_PI * xh) * std::cos(M_PI * yh);
    const double uy = -cfg.u0 * (M_PI / lx) * std::cos(M_PI * xh) * std::sin(M_PI * yh);
    return {pf * ux, pf * uy};
}

namespace detail {

// Finite-volume view of the node grid: node (i,j) owns a dx-by-dy cell,
// face-normal velocities come from stream-function differences at cell
// corners, so the discrete divergence telescopes to zero exactly.
struct TransportStencil {
    const SurrogateConfig& cfg;
    Grid2D grid;
    int nx, ny;
    double dx, dy;
    // Unit-pump face velocities: ue(i,j) east face of cell (i,j), vn north.
    std::vector<double> ue, vn;
    std::vector<double> reactivity;  // per node
    std::vector<double> cooling;     // per node

    explicit TransportStencil(const SurrogateConfig& c) : cfg(c), grid(c.make_grid()) {
        nx = grid.nx;
        ny = grid.ny;
        dx = grid.dx();
        dy = grid.dy();
        ue.assign(static_cast<std::size_t>(nx) * ny, 0.0);
        vn.assign(static_cast<std::size_t>(nx) * ny, 0.0);
        reactivity.resize(static_cast<std::size_t>(nx) * ny);
        cooling.resize(static_cast<std::size_t>(nx) * ny);
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const Vec2 p = grid.node_position(i, j);
                const double x_e = p.x() + 0.5 * dx;
                const double y_n = p.y() + 0.5 * dy;
                const double y_s = p.y() - 0.5 * dy;
                const double x_w = p.x() - 0.5 * dx;
                const std::size_t k = grid.index(i, j);
                ue[k] = (stream_function(cfg, x_e, y_n) - stream_function(cfg, x_e, y_s)) / dy;
                vn[k] = -(stream_function(cfg, x_e, y_n) - stream_function(cfg, x_w, y_n)) / dx;
                const bool refl = grid.region_label[k] == Region::REFLECTOR;
                reactivity[k] = refl ? cfg.rho0 - cfg.rho_absorber : cfg.rho0;
                // Heat-exchanger band: upper part of the right reflector wall.
                const Vec2 nrm = grid.normalized(p);
                const bool hx = refl && nrm.x() > 1.0 - cfg.reflector_band && nrm.y() > 0.55;
                cooling[k] = hx ? cfg.cooling_hx : cfg.cooling_bg;
            }
        }
    }

    double face_u(int i, int j) const {  // east face of (i,j); i in [-1, nx-1]
        if (i < 0) return 0.0;           // west boundary face
        return ue[grid.index(i, j)];
    }
    double face_v(int i, int j) const {  // north face of (i,j); j in [-1, ny-1]
        if (j < 0) return 0.0;
        return vn[grid.index(i, j)];
    }

    // Upwind flux-form advection of c, scaled by the pump factor; boundary
    // faces carry zero normal velocity so total mass is conserved.
    void advect(const std::vector<double>& c, double pump, std::vector<double>& out) const {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const std::size_t k = grid.index(i, j);
                const double uw = (i == 0) ? 0.0 : pump * face_u(i - 1, j);
                const double ueast = (i == nx - 1) ? 0.0 : pump * face_u(i, j);
                const double vs = (j == 0) ? 0.0 : pump * face_v(i, j - 1);
                const double vnorth = (j == ny - 1) ? 0.0 : pump * face_v(i, j);
                const double fw = uw > 0.0 ? uw * c[grid.index(i - 1, j)] : uw * c[k];
                const double fe = ueast > 0.0 ? ueast * c[k] : ueast * c[grid.index(i + 1, j)];
                const double fs = vs > 0.0 ? vs * c[grid.index(i, j - 1)] : vs * c[k];
                const double fn = vnorth > 0.0 ? vnorth * c[k] : vnorth * c[grid.index(i, j + 1)];
                out[k] = -((fe - fw) / dx + (fn - fs) / dy);
            }
        }
    }

    // 5-point Laplacian; mirror (zero-flux) closure at the boundary.
    void laplacian(const std::vector<double>& c, std::vector<double>& out) const {
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const std::size_t k = grid.index(i, j);
                const double cw = (i == 0) ? c[k] : c[grid.index(i - 1, j)];
                const double ce = (i == nx - 1) ? c[k] : c[grid.index(i + 1, j)];
                const double cs = (j == 0) ? c[k] : c[grid.index(i, j - 1)];
                const double cn = (j == ny - 1) ? c[k] : c[grid.index(i, j + 1)];
                out[k] = (cw + ce - 2.0 * c[k]) / (dx * dx) + (cs + cn - 2.0 * c[k]) / (dy * dy);
            }
        }
    }

    double max_face_speed() const {
        double m = 0.0;
        for (double u : ue) m = std::max(m, std::abs(u));
        for (double v : vn) m = std::max(m, std::abs(v));
        return m;
    }
};

struct SurrogateState {
    std::vector<double> flux, temp, prec;
};

// One explicit Euler substep of the coupled system at pump throttle `pump`.
inline void euler_substep(const TransportStencil& st, const SurrogateConfig& cfg, double pump,
                          double dt, SurrogateState& s) {
    const std::size_t n = s.flux.size();
    static thread_local std::vector<double> lap, adv;
    lap.assign(n, 0.0);
    adv.assign(n, 0.0);
    SurrogateState next = s;

    // Flux: diffusion-reaction with temperature feedback, zero at the boundary.
    st.laplacian(s.flux, lap);
    for (std::size_t k = 0; k < n; ++k) {
        const double rho = st.reactivity[k] - cfg.beta_feedback * (s.temp[k] - cfg.t_ref);
        next.flux[k] = s.flux[k] + dt * (cfg.diff_flux * lap[k] + rho * s.flux[k]);
    }
    for (int i = 0; i < st.nx; ++i) {
        next.flux[st.grid.index(i, 0)] = 0.0;
        next.flux[st.grid.index(i, st.ny - 1)] = 0.0;
    }
    for (int j = 0; j < st.ny; ++j) {
        next.flux[st.grid.index(0, j)] = 0.0;
        next.flux[st.grid.index(st.nx - 1, j)] = 0.0;
    }

    // Temperature: advection-diffusion, heated by flux, cooled towards t_cool.
    st.advect(s.temp, pump, adv);
    st.laplacian(s.temp, lap);
    for (std::size_t k = 0; k < n; ++k)
        next.temp[k] = s.temp[k] + dt * (adv[k] + cfg.diff_temp * lap[k] +
                                         cfg.heat_source * s.flux[k] -
                                         st.cooling[k] * (s.temp[k] - cfg.t_cool));

    // Precursor: advection, weak diffusion, production from flux, decay.
    st.advect(s.prec, pump, adv);
    st.laplacian(s.prec, lap);
    for (std::size_t k = 0; k < n; ++k)
        next.prec[k] = s.prec[k] + dt * (adv[k] + cfg.diff_prec * lap[k] +
                                         cfg.prec_source * s.flux[k] -
                                         cfg.prec_decay * s.prec[k]);

    s = std::move(next);
}

// Advance one saved interval cfg.dt, split into cfg.n_substeps Euler substeps.
inline void step_state(const TransportStencil& st, const SurrogateConfig& cfg, double pump,
                       SurrogateState& s) {
    const double dt = cfg.dt / cfg.n_substeps;
    for (int sub = 0; sub < cfg.n_substeps; ++sub) euler_substep(st, cfg, pump, dt, s);
}

inline void check_cfl(const TransportStencil& st, const SurrogateConfig& cfg) {
    if (cfg.n_substeps < 1) throw DomainError("n_substeps must be >= 1");
    const double dt = cfg.dt / cfg.n_substeps;
    const double speed = st.max_face_speed();
    const double adv_cfl = dt * (speed / st.dx + speed / st.dy);
    const double dmax = std::max({cfg.diff_flux, cfg.diff_temp, cfg.diff_prec});
    const double diff_cfl = dt * dmax * (2.0 / (st.dx * st.dx) + 2.0 / (st.dy * st.dy));
    if (adv_cfl > 1.0 || diff_cfl > 0.5)
        throw DomainError("CFL violation: advection " + std::to_string(adv_cfl) +
                          ", diffusion " + std::to_string(diff_cfl));
}

}  // namespace detail

// Steady state at full pump throttle, by time marching until the maximum
// relative per-step change drops below cfg.steady_tol.
inline detail::SurrogateState compute_steady_state(const SurrogateConfig& cfg) {
    detail::TransportStencil st(cfg);
    detail::check_cfl(st, cfg);
    const std::size_t n = static_cast<std::size_t>(st.nx) * st.ny;
    detail::SurrogateState s;
    s.flux.assign(n, 0.0);
    s.temp.assign(n, cfg.t_cool);
    s.prec.assign(n, 0.0);
    // Seed the flux with the core fundamental-mode shape.
    for (int j = 0; j < st.ny; ++j)
        for (int i = 0; i < st.nx; ++i) {
            const double xh = static_cast<double>(i) / (st.nx - 1);
            const double yh = static_cast<double>(j) / (st.ny - 1);
            s.flux[st.grid.index(i, j)] = std::sin(M_PI * xh) * std::sin(M_PI * yh);
        }
    for (int step = 0; step < cfg.steady_max_steps; ++step) {
        detail::SurrogateState prev = s;
        detail::step_state(st, cfg, 1.0, s);
        double rel = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            rel = std::max(rel, std::abs(s.flux[k] - prev.flux[k]) / (std::abs(prev.flux[k]) + 1e-3));
            rel = std::max(rel, std::abs(s.temp[k] - prev.temp[k]) / (std::abs(prev.temp[k]) + 1e-3));
            rel = std::max(rel, std::abs(s.prec[k] - prev.prec[k]) / (std::abs(prev.prec[k]) + 1e-3));
        }
        if (!std::isfinite(rel))
            throw Error("steady-state iteration diverged at step " + std::to_string(step));
        if (rel < cfg.steady_tol) return s;
    }
    throw Error("steady state not converged within " + std::to_string(cfg.steady_max_steps) +
                " steps");
}

// Time-march one ULOFF transient; every step is saved, column 0 being the
// steady initial condition.  Deterministic: identical inputs give identical
// output bit for bit.
inline ParametricCase simulate_case(const SurrogateConfig& cfg, double tau,
                                    const detail::SurrogateState* initial = nullptr) {
    if (!(tau > 0.0)) throw DomainError("simulate_case: tau must be positive");
    detail::TransportStencil st(cfg);
    detail::check_cfl(st, cfg);
    detail::SurrogateState s = initial ? *initial : compute_steady_state(cfg);
    const Eigen::Index n = st.grid.node_count();
    const Eigen::Index nt = cfg.n_steps;

    ParametricCase out;
    out.tau = tau;
    out.dt = cfg.dt;
    for (FieldId f : all_fields()) out.fields[f] = Matrix(n, nt);

    for (Eigen::Index step = 0; step < nt; ++step) {
        const double t = static_cast<double>(step) * cfg.dt;
        for (int j = 0; j < st.ny; ++j)
            for (int i = 0; i < st.nx; ++i) {
                const Eigen::Index k = static_cast<Eigen::Index>(st.grid.index(i, j));
                const Vec2 u = velocity_at(cfg, st.grid.node_position(i, j), t, tau);
                out.fields[FieldId::VELOCITY_X](k, step) = u.x();
                out.fields[FieldId::VELOCITY_Y](k, step) = u.y();
                out.fields[FieldId::FLUX](k, step) = s.flux[k];
                out.fields[FieldId::TEMPERATURE](k, step) = s.temp[k];
                out.fields[FieldId::PRECURSOR](k, step) = s.prec[k];
            }
        if (step + 1 < nt) {
            const double pump = pump_factor(t + cfg.dt, tau, cfg.nat_circulation);
            detail::step_state(st, cfg, pump, s);
            for (std::size_t k = 0; k < s.flux.size(); ++k)
                if (!std::isfinite(s.flux[k]) || !std::isfinite(s.temp[k]) ||
                    !std::isfinite(s.prec[k]))
                    throw Error("non-finite field at step " + std::to_string(step + 1));
        }
    }
    return out;
}

// Split sizes: validation and test get ~14.3% each (at least one case), the
// train split takes the rest.
inline std::vector<Split> assign_splits(int n_cases, std::uint64_t seed) {
    if (n_cases < 3) throw DomainError("need at least 3 cases to split");
    const int n_val = std::max(1, static_cast<int>(std::lround(0.143 * n_cases)));
    const int n_test = std::max(1, static_cast<int>(std::lround(0.143 * n_cases)));
    std::vector<int> order(n_cases);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<Split> split(n_cases, Split::TRAIN);
    for (int i = 0; i < n_val; ++i) split[order[i]] = Split::VALIDATION;
    for (int i = 0; i < n_test; ++i) split[order[n_val + i]] = Split::TEST;
    return split;
}

inline ParametricDataset generate_dataset(const SurrogateConfig& cfg) {
    if (cfg.tau_list.size() < 3) throw DomainError("generate_dataset needs >= 3 parameters");
    for (double tau : cfg.tau_list)
        if (tau < 1.0 || tau > 10.0) throw DomainError("tau outside [1, 10] s");
    ParametricDataset ds;
    ds.grid = cfg.make_grid();
    // The steady initial state does not depend on tau; compute it once.
    const detail::SurrogateState steady = compute_steady_state(cfg);
    for (double tau : cfg.tau_list) ds.cases.push_back(simulate_case(cfg, tau, &steady));
    ds.split = assign_splits(static_cast<int>(cfg.tau_list.size()), cfg.seed);
    return ds;
}

}  // namespace shred

#endif
