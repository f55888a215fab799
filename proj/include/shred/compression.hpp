#ifndef SHRED_COMPRESSION_HPP
#define SHRED_COMPRESSION_HPP

#include "shred/snapshot_io.hpp"
#include "shred/svd.hpp"
#include "shred/types.hpp"

#include <filesystem>
#include <fstream>

namespace shred {

// Per-field orthonormal modes plus the min/max rescaling reference taken from
// the t=0 steady state of the TRAIN split.
struct SVDBasis {
    FieldId field = FieldId::FLUX;
    Matrix U;      // N_h x r
    Vector sigma;  // r
    double ref_min = 0.0;
    double ref_max = 1.0;

    int rank() const { return static_cast<int>(U.cols()); }
};

// Concatenated per-field latent coefficients for one case: r_total x N_t,
// with each field occupying a contiguous row range.
struct LatentSeries {
    Matrix coeffs;  // r_total x N_t
    std::vector<std::pair<FieldId, std::pair<int, int>>> offsets;  // field -> (start, length)

    int r_total() const { return static_cast<int>(coeffs.rows()); }
    std::pair<int, int> range_of(FieldId f) const {
        for (const auto& [fid, rng] : offsets)
            if (fid == f) return rng;
        throw DomainError("field not present in latent series: " + field_name(f));
    }
};

inline Matrix rescale_matrix(const Matrix& x, double ref_min, double ref_max) {
    if (!(ref_max > ref_min)) throw DomainError("constant reference field");
    return (x.array() - ref_min) / (ref_max - ref_min);
}

inline Matrix unscale_matrix(const Matrix& x, double ref_min, double ref_max) {
    if (!(ref_max > ref_min)) throw DomainError("constant reference field");
    return x.array() * (ref_max - ref_min) + ref_min;
}

inline Matrix rescale_field(const ParametricCase& c, FieldId field, double ref_min,
                            double ref_max) {
    return rescale_matrix(c.fields.at(field), ref_min, ref_max);
}

// Reference extrema of a field at t=0, over the given split.  The surrogate
// shares its steady initial state across cases, but the scan covers every
// split member anyway.
inline std::pair<double, double> reference_extrema(const ParametricDataset& ds, FieldId field,
                                                   Split which = Split::TRAIN) {
    const auto idx = ds.case_indices(which);
    if (idx.empty()) throw DomainError("empty split for reference extrema");
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int i : idx) {
        const auto col = ds.cases[i].fields.at(field).col(0);
        lo = std::min(lo, col.minCoeff());
        hi = std::max(hi, col.maxCoeff());
    }
    if (!(hi > lo)) throw DomainError("constant reference field: " + field_name(field));
    return {lo, hi};
}

// Rescaled snapshots of every case in a split, concatenated in tau order then
// time order: column p*N_t + j is case p at time j.
inline Matrix stack_cases(const ParametricDataset& ds, FieldId field, Split which,
                          double ref_min, double ref_max) {
    const auto idx = ds.case_indices(which);
    if (idx.empty()) throw DomainError("empty split in stack_cases");
    const auto nh = ds.cases[idx[0]].n_nodes();
    const auto nt = ds.cases[idx[0]].n_steps();
    Matrix out(nh, nt * static_cast<Eigen::Index>(idx.size()));
    for (std::size_t p = 0; p < idx.size(); ++p)
        out.middleCols(static_cast<Eigen::Index>(p) * nt, nt) =
            rescale_field(ds.cases[idx[p]], field, ref_min, ref_max);
    return out;
}

// V = U^T X on rescaled data.
inline Matrix encode(const SVDBasis& basis, const Matrix& rescaled_snapshots) {
    if (rescaled_snapshots.rows() != basis.U.rows())
        throw DimensionError("encode: snapshot height does not match basis");
    return basis.U.transpose() * rescaled_snapshots;
}

// X_hat = unscale(U V), back in physical units.
inline Matrix decode(const SVDBasis& basis, const Matrix& coeffs) {
    if (coeffs.rows() != basis.U.cols())
        throw DimensionError("decode: coefficient rows do not match basis rank");
    return unscale_matrix(basis.U * coeffs, basis.ref_min, basis.ref_max);
}

// Encode a full case into the per-field concatenated latent layout.
inline LatentSeries encode_case(const std::vector<SVDBasis>& bases, const ParametricCase& c) {
    LatentSeries out;
    int r_total = 0;
    for (const auto& b : bases) r_total += b.rank();
    out.coeffs.resize(r_total, c.n_steps());
    int start = 0;
    for (const auto& b : bases) {
        const Matrix rescaled = rescale_field(c, b.field, b.ref_min, b.ref_max);
        out.coeffs.middleRows(start, b.rank()) = encode(b, rescaled);
        out.offsets.push_back({b.field, {start, b.rank()}});
        start += b.rank();
    }
    return out;
}

// SHRDBASE binary basis file: magic, version, field id, N_h, r, rescale
// params, then sigma and U (column-major), all little-endian f64.
namespace detail {
inline constexpr char kBasisMagic[8] = {'S', 'H', 'R', 'D', 'B', 'A', 'S', 'E'};
inline constexpr std::uint32_t kBasisVersion = 1;
}  // namespace detail

inline void write_basis_file(const SVDBasis& b, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(detail::kBasisMagic, 8);
    detail::write_le<std::uint32_t>(os, detail::kBasisVersion);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(b.field));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(b.U.rows()));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(b.U.cols()));
    detail::write_le<double>(os, b.ref_min);
    detail::write_le<double>(os, b.ref_max);
    os.write(reinterpret_cast<const char*>(b.sigma.data()),
             static_cast<std::streamsize>(sizeof(double) * b.sigma.size()));
    os.write(reinterpret_cast<const char*>(b.U.data()),
             static_cast<std::streamsize>(sizeof(double) * b.U.size()));
    if (!os) throw IoError("write failed: " + path.string());
}

inline SVDBasis read_basis_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kBasisMagic, 8) != 0)
        throw BadMagicError("bad magic in " + path.string());
    const auto version = detail::read_le<std::uint32_t>(is);
    if (version != detail::kBasisVersion)
        throw UnsupportedVersionError("unsupported basis version " + std::to_string(version));
    SVDBasis b;
    b.field = static_cast<FieldId>(detail::read_le<std::uint32_t>(is));
    const auto nh = detail::read_le<std::uint64_t>(is);
    const auto r = detail::read_le<std::uint64_t>(is);
    b.ref_min = detail::read_le<double>(is);
    b.ref_max = detail::read_le<double>(is);
    b.sigma.resize(static_cast<Eigen::Index>(r));
    is.read(reinterpret_cast<char*>(b.sigma.data()),
            static_cast<std::streamsize>(sizeof(double) * r));
    b.U.resize(static_cast<Eigen::Index>(nh), static_cast<Eigen::Index>(r));
    is.read(reinterpret_cast<char*>(b.U.data()),
            static_cast<std::streamsize>(sizeof(double) * b.U.size()));
    if (!is) throw TruncatedFileError("truncated basis file: " + path.string());
    return b;
}

}  // namespace shred

#endif
