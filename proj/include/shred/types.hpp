#ifndef SHRED_TYPES_HPP
#define SHRED_TYPES_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace shred {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Vec2 = Eigen::Vector2d;

// Error hierarchy. Format errors carry a distinct type per failure kind so
// callers can tell a bad magic apart from a truncated payload.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};
struct BadMagicError : FormatError {
    using FormatError::FormatError;
};
struct TruncatedFileError : FormatError {
    using FormatError::FormatError;
};
struct UnsupportedVersionError : FormatError {
    using FormatError::FormatError;
};
struct DimensionError : Error {
    using Error::Error;
};
struct DomainError : Error {
    using Error::Error;
};

enum class Region : std::uint8_t { CORE = 0, REFLECTOR = 1 };

enum class FieldId : std::uint32_t {
    VELOCITY_X = 0,
    VELOCITY_Y = 1,
    TEMPERATURE = 2,
    FLUX = 3,
    PRECURSOR = 4,
};

inline const std::vector<FieldId>& all_fields() {
    static const std::vector<FieldId> v = {FieldId::VELOCITY_X, FieldId::VELOCITY_Y,
                                           FieldId::TEMPERATURE, FieldId::FLUX,
                                           FieldId::PRECURSOR};
    return v;
}

inline std::string field_name(FieldId f) {
    switch (f) {
        case FieldId::VELOCITY_X: return "VELOCITY_X";
        case FieldId::VELOCITY_Y: return "VELOCITY_Y";
        case FieldId::TEMPERATURE: return "TEMPERATURE";
        case FieldId::FLUX: return "FLUX";
        case FieldId::PRECURSOR: return "PRECURSOR";
    }
    throw DomainError("unknown field id");
}

inline FieldId field_from_name(const std::string& name) {
    for (FieldId f : all_fields())
        if (field_name(f) == name) return f;
    throw DomainError("unknown field name: " + name);
}

// Uniform tensor-product grid of nx*ny nodes.  The outer band of relative
// width `reflector_band` is tagged REFLECTOR, the interior CORE.
struct Grid2D {
    int nx = 0, ny = 0;
    double x0 = 0.0, x1 = 1.0, y0 = 0.0, y1 = 1.0;
    std::vector<Region> region_label;  // size nx*ny, node-major: idx = i + nx*j

    static Grid2D uniform(int nx, int ny, double x0, double x1, double y0, double y1,
                          double reflector_band = 0.15) {
        if (nx < 2 || ny < 2) throw DomainError("grid needs nx >= 2 and ny >= 2");
        if (!(x0 < x1) || !(y0 < y1)) throw DomainError("grid bounds must be strictly ordered");
        Grid2D g;
        g.nx = nx;
        g.ny = ny;
        g.x0 = x0;
        g.x1 = x1;
        g.y0 = y0;
        g.y1 = y1;
        g.region_label.resize(static_cast<std::size_t>(nx) * ny);
        for (int j = 0; j < ny; ++j) {
            for (int i = 0; i < nx; ++i) {
                const double xh = static_cast<double>(i) / (nx - 1);
                const double yh = static_cast<double>(j) / (ny - 1);
                const bool outer = xh < reflector_band || xh > 1.0 - reflector_band ||
                                   yh < reflector_band || yh > 1.0 - reflector_band;
                g.region_label[g.index(i, j)] = outer ? Region::REFLECTOR : Region::CORE;
            }
        }
        return g;
    }

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
    std::int64_t node_count() const { return static_cast<std::int64_t>(nx) * ny; }
    double dx() const { return (x1 - x0) / (nx - 1); }
    double dy() const { return (y1 - y0) / (ny - 1); }
    Vec2 node_position(int i, int j) const { return {x0 + i * dx(), y0 + j * dy()}; }
    bool contains(const Vec2& p) const {
        return p.x() >= x0 && p.x() <= x1 && p.y() >= y0 && p.y() <= y1;
    }
    // Normalized coordinates of a point, in [0,1]^2 inside the domain.
    Vec2 normalized(const Vec2& p) const {
        return {(p.x() - x0) / (x1 - x0), (p.y() - y0) / (y1 - y0)};
    }
};

// All field snapshots over time for one parameter value; matrices are
// N_h x N_t, one column per saved time step.
struct ParametricCase {
    double tau = 0.0;  // pump decay constant, seconds
    double dt = 0.0;   // save interval, seconds
    std::map<FieldId, Matrix> fields;

    std::int64_t n_nodes() const {
        return fields.empty() ? 0 : fields.begin()->second.rows();
    }
    std::int64_t n_steps() const {
        return fields.empty() ? 0 : fields.begin()->second.cols();
    }

    void validate() const {
        if (fields.empty()) throw DomainError("case has no fields");
        const auto nh = n_nodes();
        const auto nt = n_steps();
        if (nt < 2) throw DomainError("case needs N_t >= 2");
        for (const auto& [f, m] : fields) {
            if (m.rows() != nh || m.cols() != nt)
                throw DimensionError("field " + field_name(f) + " shape mismatch");
            if (!m.allFinite())
                throw DomainError("non-finite entry in field " + field_name(f));
        }
    }
};

enum class Split : std::uint8_t { TRAIN = 0, VALIDATION = 1, TEST = 2 };

inline std::string split_name(Split s) {
    switch (s) {
        case Split::TRAIN: return "TRAIN";
        case Split::VALIDATION: return "VALIDATION";
        case Split::TEST: return "TEST";
    }
    throw DomainError("unknown split");
}

struct ParametricDataset {
    Grid2D grid;
    std::vector<ParametricCase> cases;
    std::vector<Split> split;  // one tag per case

    std::vector<int> case_indices(Split s) const {
        std::vector<int> out;
        for (std::size_t i = 0; i < cases.size(); ++i)
            if (split[i] == s) out.push_back(static_cast<int>(i));
        return out;
    }
};

}  // namespace shred

#endif
