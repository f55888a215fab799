#ifndef SHRED_SNAPSHOT_IO_HPP
#define SHRED_SNAPSHOT_IO_HPP

#include "shred/types.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

namespace shred {

// SHRDSNAP binary snapshot format, little-endian throughout:
//   8-byte magic "SHRDSNAP"
//   u32 version (currently 1), u64 N_h, u64 N_t, f64 dt, f64 tau,
//   u32 field count, then per field { u32 name length, UTF-8 name }
//   then per field N_h*N_t f64 values, column-major (one time step per column).

namespace detail {

inline constexpr char kSnapshotMagic[8] = {'S', 'H', 'R', 'D', 'S', 'N', 'A', 'P'};
inline constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void write_le(std::ostream& os, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    // Little-endian host assumed (x86/aarch64); byte order is part of the format.
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
    T value{};
    is.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!is) throw TruncatedFileError("truncated file while reading header");
    return value;
}

}  // namespace detail

inline void write_snapshot_file(const ParametricCase& c, const std::filesystem::path& path) {
    c.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os.write(detail::kSnapshotMagic, 8);
    detail::write_le<std::uint32_t>(os, detail::kSnapshotVersion);
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(c.n_nodes()));
    detail::write_le<std::uint64_t>(os, static_cast<std::uint64_t>(c.n_steps()));
    detail::write_le<double>(os, c.dt);
    detail::write_le<double>(os, c.tau);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(c.fields.size()));
    for (const auto& [f, m] : c.fields) {
        const std::string name = field_name(f);
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    for (const auto& [f, m] : c.fields) {
        // Eigen matrices are column-major by default; dump the buffer directly.
        os.write(reinterpret_cast<const char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * m.size()));
    }
    if (!os) throw IoError("write failed: " + path.string());
}

inline ParametricCase read_snapshot_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, detail::kSnapshotMagic, 8) != 0)
        throw BadMagicError("bad magic in " + path.string());
    const auto version = detail::read_le<std::uint32_t>(is);
    if (version != detail::kSnapshotVersion)
        throw UnsupportedVersionError("unsupported snapshot version " + std::to_string(version));
    ParametricCase c;
    const auto nh = detail::read_le<std::uint64_t>(is);
    const auto nt = detail::read_le<std::uint64_t>(is);
    c.dt = detail::read_le<double>(is);
    c.tau = detail::read_le<double>(is);
    const auto nfields = detail::read_le<std::uint32_t>(is);
    std::vector<FieldId> order;
    for (std::uint32_t k = 0; k < nfields; ++k) {
        const auto len = detail::read_le<std::uint32_t>(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        if (!is) throw TruncatedFileError("truncated field name in " + path.string());
        order.push_back(field_from_name(name));
    }
    // The payload size is fully determined by the header; reject mismatches.
    const auto header_end = is.tellg();
    is.seekg(0, std::ios::end);
    const auto file_size = is.tellg();
    is.seekg(header_end);
    const std::uint64_t expected =
        static_cast<std::uint64_t>(header_end) + nfields * nh * nt * sizeof(double);
    if (static_cast<std::uint64_t>(file_size) != expected)
        throw TruncatedFileError("payload size mismatch in " + path.string() + ": expected " +
                                 std::to_string(expected) + " bytes, file has " +
                                 std::to_string(static_cast<std::uint64_t>(file_size)));
    for (FieldId f : order) {
        Matrix m(static_cast<Eigen::Index>(nh), static_cast<Eigen::Index>(nt));
        is.read(reinterpret_cast<char*>(m.data()),
                static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!is) throw TruncatedFileError("truncated payload in " + path.string());
        c.fields[f] = std::move(m);
    }
    return c;
}

}  // namespace shred

#endif
