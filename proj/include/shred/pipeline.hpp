#ifndef SHRED_PIPELINE_HPP
#define SHRED_PIPELINE_HPP

#include "shred/config.hpp"
#include "shred/ensemble.hpp"
#include "shred/metrics.hpp"
#include "shred/net.hpp"
#include "shred/surrogate.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace shred {

// Thrown when a subcommand needs artifacts an earlier stage has not produced;
// the message names the subcommand to run.
struct MissingArtifactError : Error {
    using Error::Error;
};

namespace detail {

// Atomic file write: produce the content under a temporary name, then rename.
template <typename Fn>
void atomic_write(const std::filesystem::path& path, Fn&& writer) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    writer(tmp);
    std::filesystem::rename(tmp, path);
}

// Raw little-endian matrix blob for intermediate latent predictions.
inline void write_matrix_blob(const Matrix& m, const std::filesystem::path& path) {
    atomic_write(path, [&](const std::filesystem::path& tmp) {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open for writing: " + tmp.string());
        write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.rows()));
        write_le<std::uint64_t>(os, static_cast<std::uint64_t>(m.cols()));
        os.write(reinterpret_cast<const char*>(m.data()),
                 static_cast<std::streamsize>(sizeof(double) * m.size()));
        if (!os) throw IoError("write failed: " + tmp.string());
    });
}

inline Matrix read_matrix_blob(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    const auto rows = read_le<std::uint64_t>(is);
    const auto cols = read_le<std::uint64_t>(is);
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw TruncatedFileError("truncated matrix blob: " + path.string());
    return m;
}

// Stable seed derivation: master seed mixed with a textual tag (FNV-1a).
inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
    std::uint64_t h = 1469598103934665603ull ^ master;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Run fn(0..n-1) over a bounded pool of `jobs` worker threads.  Results must
// be written to per-index slots; the caller merges in index order, so the
// outcome is independent of scheduling.
template <typename Fn>
void parallel_for(int jobs, int n, Fn&& fn) {
    if (n <= 0) return;
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next(0);
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr first_error;
    for (int w = 0; w < jobs; ++w) {
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

struct PipelineOptions {
    std::filesystem::path config_path;
    std::filesystem::path workspace_root;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::vector<std::string> overrides;
};

// Config-driven orchestration over a per-experiment workspace directory.
// Artifacts are keyed by config hash + seed, so changed configurations land
// in fresh, append-only subdirectories.
class Pipeline {
public:
    Pipeline(Config cfg, std::filesystem::path workspace_root, std::uint64_t seed, int jobs)
        : cfg_(std::move(cfg)), seed_(seed), jobs_(std::max(1, jobs)) {
        dir_ = workspace_root / (cfg_.hash_hex() + "-" + std::to_string(seed_));
    }

    static Pipeline from_options(const PipelineOptions& opt) {
        Config cfg = Config::parse_file(opt.config_path);
        for (const auto& o : opt.overrides) cfg.set_override(o);
        return Pipeline(std::move(cfg), opt.workspace_root, opt.seed, opt.jobs);
    }

    const std::filesystem::path& directory() const { return dir_; }
    const Config& config() const { return cfg_; }

    void run(const std::string& subcommand) {
        if (subcommand == "generate") generate();
        else if (subcommand == "compress") compress();
        else if (subcommand == "train") train_members();
        else if (subcommand == "reconstruct") reconstruct();
        else if (subcommand == "evaluate") evaluate();
        else if (subcommand == "sweep") sweep();
        else if (subcommand == "all") {
            generate();
            compress();
            train_members();
            reconstruct();
            evaluate();
        } else {
            throw DomainError("unknown subcommand: " + subcommand);
        }
    }

    // ---- stage: generate -------------------------------------------------

    SurrogateConfig surrogate_config() const {
        SurrogateConfig sc;
        sc.nx = static_cast<int>(cfg_.get_int("surrogate.nx", sc.nx));
        sc.ny = static_cast<int>(cfg_.get_int("surrogate.ny", sc.ny));
        sc.n_steps = static_cast<int>(cfg_.get_int("surrogate.n_steps", sc.n_steps));
        sc.dt = cfg_.get_double("surrogate.dt", sc.dt);
        sc.reflector_band = cfg_.get_double("surrogate.reflector_band", sc.reflector_band);
        sc.u0 = cfg_.get_double("surrogate.u0", sc.u0);
        sc.steady_tol = cfg_.get_double("surrogate.steady_tol", sc.steady_tol);
        if (cfg_.has("surrogate.tau_list")) {
            sc.tau_list = cfg_.get_double_list("surrogate.tau_list");
        } else if (cfg_.has("surrogate.n_cases")) {
            // Evenly spaced pump time constants across the ULOFF range.
            const int n = static_cast<int>(cfg_.get_int("surrogate.n_cases"));
            if (n < 3) throw ConfigError("surrogate.n_cases must be >= 3");
            sc.tau_list.clear();
            for (int k = 0; k < n; ++k)
                sc.tau_list.push_back(1.0 + 9.0 * k / (n - 1));
        }
        sc.seed = detail::derive_seed(seed_, "surrogate");
        return sc;
    }

    void generate() {
        ensure_workspace();
        const SurrogateConfig sc = surrogate_config();
        ParametricDataset ds = generate_dataset(sc);
        const auto dir = snapshots_dir();
        std::filesystem::create_directories(dir);
        std::ostringstream manifest;
        for (std::size_t c = 0; c < ds.cases.size(); ++c) {
            const std::string name = case_file_name(static_cast<int>(c));
            detail::atomic_write(dir / name, [&](const std::filesystem::path& tmp) {
                write_snapshot_file(ds.cases[c], tmp);
            });
            manifest << name << " split=" << split_name(ds.split[c])
                     << " tau=" << detail::fmt(ds.cases[c].tau) << "\n";
        }
        detail::atomic_write(dir / "manifest.txt", [&](const std::filesystem::path& tmp) {
            std::ofstream os(tmp);
            os << manifest.str();
            if (!os) throw IoError("write failed: " + tmp.string());
        });
    }

    ParametricDataset load_dataset() const {
        const auto manifest = snapshots_dir() / "manifest.txt";
        if (!std::filesystem::exists(manifest))
            throw MissingArtifactError("no snapshot manifest in " + snapshots_dir().string() +
                                       "; run the `generate` subcommand first");
        ParametricDataset ds;
        ds.grid = surrogate_config().make_grid();
        std::ifstream is(manifest);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            std::istringstream ls(line);
            std::string name, split_kv, tau_kv;
            ls >> name >> split_kv >> tau_kv;
            ds.cases.push_back(read_snapshot_file(snapshots_dir() / name));
            const std::string sname = split_kv.substr(split_kv.find('=') + 1);
            if (sname == "TRAIN") ds.split.push_back(Split::TRAIN);
            else if (sname == "VALIDATION") ds.split.push_back(Split::VALIDATION);
            else if (sname == "TEST") ds.split.push_back(Split::TEST);
            else throw FormatError("bad split tag in manifest: " + sname);
        }
        if (ds.cases.empty()) throw FormatError("empty snapshot manifest: " + manifest.string());
        return ds;
    }

    // ---- stage: compress -------------------------------------------------

    void compress() {
        const ParametricDataset ds = load_dataset();
        const double energy_tol = cfg_.get_double("compression.energy_tol", 0.01);
        const int r_cap = static_cast<int>(cfg_.get_int("compression.r_cap", 10));
        const std::string algo = cfg_.get_string("compression.algorithm", "randomized");
        std::filesystem::create_directories(basis_dir());

        const auto fields = all_fields();
        std::vector<SVDBasis> bases(fields.size());
        detail::parallel_for(jobs_, static_cast<int>(fields.size()), [&](int fi) {
            const FieldId f = fields[static_cast<std::size_t>(fi)];
            const auto [lo, hi] = reference_extrema(ds, f, Split::TRAIN);
            const Matrix stacked = stack_cases(ds, f, Split::TRAIN, lo, hi);
            const int probe_rank = std::min<int>(
                r_cap + 5, static_cast<int>(std::min(stacked.rows(), stacked.cols())));
            SvdResult svd;
            if (algo == "randomized") {
                svd = randomized_svd(stacked, probe_rank, 10, 2,
                                     detail::derive_seed(seed_, "svd." + field_name(f)));
            } else if (algo == "dense") {
                svd = dense_svd(stacked, probe_rank);
            } else {
                throw ConfigError("compression.algorithm must be randomized or dense, got '" +
                                  algo + "'");
            }
            const int r = select_rank(svd.sigma, energy_tol, r_cap);
            SVDBasis b;
            b.field = f;
            b.U = svd.U.leftCols(r);
            b.sigma = svd.sigma.head(r);
            b.ref_min = lo;
            b.ref_max = hi;
            Matrix coeffs = svd.coeffs.topRows(r);
            fix_signs(b.U, coeffs);
            bases[static_cast<std::size_t>(fi)] = std::move(b);
        });
        for (const auto& b : bases)
            detail::atomic_write(basis_dir() / (field_name(b.field) + ".basis"),
                                 [&](const std::filesystem::path& tmp) { write_basis_file(b, tmp); });
    }

    std::vector<SVDBasis> load_bases() const {
        std::vector<SVDBasis> bases;
        for (FieldId f : all_fields()) {
            const auto path = basis_dir() / (field_name(f) + ".basis");
            if (!std::filesystem::exists(path))
                throw MissingArtifactError("missing basis " + path.string() +
                                           "; run the `compress` subcommand first");
            bases.push_back(read_basis_file(path));
        }
        return bases;
    }

    // ---- stage: train ----------------------------------------------------

    std::vector<Strategy> strategies() const {
        const std::string raw =
            cfg_.get_string("sensing.strategies", "FIXED_OUTCORE,MOBILE_SENSOR,MOBILE_PROBES");
        std::vector<Strategy> out;
        std::istringstream is(raw);
        std::string item;
        while (std::getline(is, item, ',')) {
            const auto b = item.find_first_not_of(" \t");
            if (b == std::string::npos) continue;
            const auto e = item.find_last_not_of(" \t");
            const std::string name = item.substr(b, e - b + 1);
            if (name == "FIXED_OUTCORE") out.push_back(Strategy::FIXED_OUTCORE);
            else if (name == "MOBILE_SENSOR") out.push_back(Strategy::MOBILE_SENSOR);
            else if (name == "MOBILE_PROBES") out.push_back(Strategy::MOBILE_PROBES);
            else throw ConfigError("unknown sensing strategy: " + name);
        }
        if (out.empty()) throw ConfigError("sensing.strategies is empty");
        return out;
    }

    int member_count() const {
        return static_cast<int>(cfg_.get_int("ensemble.members", 10));
    }

    // Candidate position pool per strategy: reflector nodes for fixed flux
    // sensors; core sub-regions for the mobile strategies (right-hand band as
    // a downcomer analogue, bottom band for the probes).
    std::vector<Vec2> position_pool(Strategy strategy, const Grid2D& grid) const {
        const std::uint64_t pool_seed =
            detail::derive_seed(seed_, "pool." + strategy_name(strategy));
        if (strategy == Strategy::FIXED_OUTCORE) {
            // Ten well-spread reflector positions; the ensemble draws triples.
            std::vector<Vec2> pool;
            std::mt19937_64 rng(pool_seed);
            for (int attempt = 0; attempt < 1000 && pool.size() < 10; ++attempt) {
                const auto triple = sample_fixed_sensors(grid, 3, rng());
                for (const auto& p : triple) {
                    bool dup = false;
                    for (const auto& q : pool) dup = dup || (q - p).norm() < 1e-12;
                    if (!dup && pool.size() < 10) pool.push_back(p);
                }
            }
            if (pool.size() < 10) throw DomainError("could not build a 10-position sensor pool");
            return pool;
        }
        std::vector<Vec2> candidates;
        for (int j = 0; j < grid.ny; ++j) {
            for (int i = 0; i < grid.nx; ++i) {
                if (grid.region_label[grid.index(i, j)] != Region::CORE) continue;
                const Vec2 p = grid.node_position(i, j);
                const Vec2 n = grid.normalized(p);
                const bool ok = strategy == Strategy::MOBILE_SENSOR
                                    ? n.x() > 0.6  // downcomer-analogue band
                                    : n.y() < 0.4;  // bottom core band
                if (ok) candidates.push_back(p);
            }
        }
        if (candidates.size() < 10) throw DomainError("core sub-region too small for sensor pool");
        std::mt19937_64 rng(pool_seed);
        std::shuffle(candidates.begin(), candidates.end(), rng);
        candidates.resize(10);
        return candidates;
    }

    std::vector<SensorConfig> member_sensor_configs(Strategy strategy, const Grid2D& grid,
                                                    int count) const {
        const std::vector<Vec2> pool = position_pool(strategy, grid);
        const int choose = strategy == Strategy::MOBILE_SENSOR ? 1 : 3;
        const auto subsets =
            sample_configurations(pool, choose, count,
                                  detail::derive_seed(seed_, "members." + strategy_name(strategy)));
        const double sigma = cfg_.get_double("sensing.noise_sigma", 0.01);
        std::vector<SensorConfig> out;
        for (int l = 0; l < count; ++l) {
            SensorConfig sc;
            sc.strategy = strategy;
            for (int k : subsets[static_cast<std::size_t>(l)]) sc.positions.push_back(pool[k]);
            sc.noise_sigma = sigma;
            sc.seed = 0;  // per-case seeds derived in measurements_for
            out.push_back(std::move(sc));
        }
        return out;
    }

    MeasurementSeries measurements_for(const SurrogateConfig& sc, const ParametricDataset& ds,
                                       const SensorConfig& sensors, Strategy strategy, int member,
                                       int case_index, double ref_min, double ref_max,
                                       int rep = 0) const {
        SensorConfig per_case = sensors;
        std::string tag = "noise." + strategy_name(strategy) + "." + std::to_string(member) +
                          "." + std::to_string(case_index);
        if (rep > 0) tag += "." + std::to_string(rep);
        per_case.seed = detail::derive_seed(seed_, tag);
        return build_measurements(sc, ds.cases[static_cast<std::size_t>(case_index)], ds.grid,
                                  per_case, ref_min, ref_max);
    }

    TrainConfig train_config(Strategy strategy, int member) const {
        TrainConfig tc;
        tc.learning_rate = cfg_.get_double("train.learning_rate", tc.learning_rate);
        tc.batch_size = static_cast<int>(cfg_.get_int("train.batch_size", tc.batch_size));
        tc.max_epochs = static_cast<int>(cfg_.get_int("train.max_epochs", tc.max_epochs));
        tc.patience = static_cast<int>(cfg_.get_int("train.patience", tc.patience));
        tc.clip_norm = cfg_.get_double("train.clip_norm", tc.clip_norm);
        tc.seed = detail::derive_seed(
            seed_, "train." + strategy_name(strategy) + "." + std::to_string(member));
        return tc;
    }

    int lag() const { return static_cast<int>(cfg_.get_int("sensing.lag", 50)); }

    void train_members() {
        const ParametricDataset ds = load_dataset();
        const std::vector<SVDBasis> bases = load_bases();
        const SurrogateConfig sc = surrogate_config();
        const int count = member_count();
        const int k_lag = lag();
        const int stride = static_cast<int>(cfg_.get_int("train.window_stride", 1));
        const int hidden = static_cast<int>(cfg_.get_int("train.hidden", 64));
        const int dec1 = static_cast<int>(cfg_.get_int("train.dec1", 350));
        const int dec2 = static_cast<int>(cfg_.get_int("train.dec2", 400));
        const double dropout = cfg_.get_double("train.dropout", 0.1);
        const int reps = static_cast<int>(cfg_.get_int("train.noise_reps", 1));
        if (stride < 1) throw ConfigError("train.window_stride must be >= 1");
        if (reps < 1) throw ConfigError("train.noise_reps must be >= 1");

        // Latent targets are shared across members of every strategy.
        std::vector<LatentSeries> latents;
        for (const auto& c : ds.cases) latents.push_back(encode_case(bases, c));
        const int r_total = latents[0].r_total();

        for (Strategy strategy : strategies()) {
            const auto sensors = member_sensor_configs(strategy, ds.grid, count);
            const auto dir = models_dir(strategy);
            std::filesystem::create_directories(dir);
            const auto [ref_min, ref_max] =
                strategy == Strategy::MOBILE_PROBES
                    ? std::pair<double, double>{0.0, 1.0}
                    : reference_extrema(ds, sensors[0].measured_field(), Split::TRAIN);

            detail::parallel_for(jobs_, count, [&](int member) {
                // Several noise realizations per case teach the network to
                // average measurement noise instead of memorizing it.
                std::vector<TrainSample> train_set, val_set;
                auto collect = [&](Split split, std::vector<TrainSample>& out) {
                    for (int ci : ds.case_indices(split)) {
                        for (int rep = 0; rep < reps; ++rep) {
                            const MeasurementSeries series = measurements_for(
                                sc, ds, sensors[static_cast<std::size_t>(member)], strategy,
                                member, ci, ref_min, ref_max, rep);
                            const LaggedWindows wins = lag_series(series, k_lag);
                            for (std::size_t k = 0; k < wins.windows.size();
                                 k += static_cast<std::size_t>(stride)) {
                                TrainSample sample;
                                sample.window = wins.windows[k];
                                sample.target =
                                    latents[static_cast<std::size_t>(ci)].coeffs.col(
                                        static_cast<Eigen::Index>(k));
                                out.push_back(std::move(sample));
                            }
                        }
                    }
                };
                collect(Split::TRAIN, train_set);
                collect(Split::VALIDATION, val_set);
                ShredModel model = init_model(
                    sensors[static_cast<std::size_t>(member)].input_dim(), k_lag, r_total,
                    detail::derive_seed(seed_, "init." + strategy_name(strategy) + "." +
                                                   std::to_string(member)),
                    hidden, dec1, dec2, dropout);
                train(model, train_set, val_set, train_config(strategy, member));
                detail::atomic_write(dir / member_file_name(member),
                                     [&](const std::filesystem::path& tmp) {
                                         write_model_file(model, tmp);
                                     });
                // Sensor positions sidecar so reconstruction replays the
                // exact member configuration.
                detail::atomic_write(
                    dir / sensor_file_name(member), [&](const std::filesystem::path& tmp) {
                        std::ofstream os(tmp);
                        os << "x,y\n";
                        for (const auto& p :
                             sensors[static_cast<std::size_t>(member)].positions)
                            os << detail::fmt(p.x()) << ',' << detail::fmt(p.y()) << "\n";
                        if (!os) throw IoError("write failed: " + tmp.string());
                    });
            });
        }
        write_latent_layout(latents[0]);
    }

    // ---- stage: reconstruct ------------------------------------------------

    int trained_member_count(Strategy strategy) const {
        int count = 0;
        while (std::filesystem::exists(models_dir(strategy) / member_file_name(count))) ++count;
        if (count == 0)
            throw MissingArtifactError("no trained models in " + models_dir(strategy).string() +
                                       "; run the `train` subcommand first");
        return count;
    }

    SensorConfig load_member_sensors(Strategy strategy, int member) const {
        const auto path = models_dir(strategy) / sensor_file_name(member);
        std::ifstream is(path);
        if (!is)
            throw MissingArtifactError("missing sensor sidecar " + path.string() +
                                       "; run the `train` subcommand first");
        SensorConfig sc;
        sc.strategy = strategy;
        sc.noise_sigma = cfg_.get_double("sensing.noise_sigma", 0.01);
        std::string line;
        std::getline(is, line);  // header
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto comma = line.find(',');
            sc.positions.push_back(
                {std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
        }
        return sc;
    }

    void reconstruct() {
        const ParametricDataset ds = load_dataset();
        const std::vector<SVDBasis> bases = load_bases();
        const SurrogateConfig sc = surrogate_config();
        for (Strategy strategy : strategies()) {
            const int count = trained_member_count(strategy);
            const auto out_dir = recon_dir(strategy);
            std::filesystem::create_directories(out_dir);
            std::vector<SensorConfig> sensors;
            std::vector<ShredModel> models;
            for (int m = 0; m < count; ++m) {
                sensors.push_back(load_member_sensors(strategy, m));
                models.push_back(read_model_file(models_dir(strategy) / member_file_name(m)));
            }
            const auto [ref_min, ref_max] =
                strategy == Strategy::MOBILE_PROBES
                    ? std::pair<double, double>{0.0, 1.0}
                    : reference_extrema(ds, sensors[0].measured_field(), Split::TRAIN);

            std::vector<std::pair<Split, std::string>> splits = {{Split::VALIDATION, "val"},
                                                                 {Split::TEST, "test"}};
            for (const auto& [split, tag] : splits) {
                const auto cases = ds.case_indices(split);
                detail::parallel_for(
                    jobs_, count * static_cast<int>(cases.size()), [&](int task) {
                        const int m = task / static_cast<int>(cases.size());
                        const int c = task % static_cast<int>(cases.size());
                        const MeasurementSeries series =
                            measurements_for(sc, ds, sensors[static_cast<std::size_t>(m)],
                                             strategy, m, cases[static_cast<std::size_t>(c)],
                                             ref_min, ref_max);
                        const Matrix latent =
                            predict_latent(models[static_cast<std::size_t>(m)], series);
                        detail::write_matrix_blob(latent,
                                                  out_dir / latent_file_name(tag, c, m));
                    });
            }
        }
    }

    Matrix load_latent(Strategy strategy, const std::string& tag, int case_pos, int member) const {
        const auto path = recon_dir(strategy) / latent_file_name(tag, case_pos, member);
        if (!std::filesystem::exists(path))
            throw MissingArtifactError("missing latent prediction " + path.string() +
                                       "; run the `reconstruct` subcommand first");
        return detail::read_matrix_blob(path);
    }

    // ---- stage: evaluate ---------------------------------------------------

    void evaluate() {
        const ParametricDataset ds = load_dataset();
        const std::vector<SVDBasis> bases = load_bases();
        const auto test_cases = ds.case_indices(Split::TEST);
        if (test_cases.empty()) throw DomainError("dataset has no test cases");
        std::filesystem::create_directories(eval_dir());

        std::vector<LatentSeries> truth;
        for (const auto& c : ds.cases) truth.push_back(encode_case(bases, c));

        const auto strategy_list = strategies();
        std::vector<std::string> strategy_cols;
        for (Strategy s : strategy_list) strategy_cols.push_back(strategy_name(s));
        std::vector<std::string> field_rows;
        for (FieldId f : all_fields()) field_rows.push_back(field_name(f));
        std::vector<std::vector<double>> table(field_rows.size(),
                                               std::vector<double>(strategy_cols.size(), 0.0));

        std::ostringstream summary;
        summary << "strategy,latent_error,xi\n";

        for (std::size_t si = 0; si < strategy_list.size(); ++si) {
            const Strategy strategy = strategy_list[si];
            const int count = trained_member_count(strategy);

            std::vector<EnsemblePrediction> per_case;
            std::vector<Matrix> pred_latents, true_latents;
            for (std::size_t c = 0; c < test_cases.size(); ++c) {
                std::vector<Matrix> members;
                for (int m = 0; m < count; ++m)
                    members.push_back(load_latent(strategy, "test", static_cast<int>(c), m));
                per_case.push_back(count >= 2 ? ensemble_predict(members)
                                              : single_member(members[0]));
                pred_latents.push_back(per_case.back().mean);
                true_latents.push_back(truth[static_cast<std::size_t>(test_cases[c])].coeffs);
            }
            const double e = latent_error(pred_latents, true_latents);
            const double xi = aggregate_xi(per_case);
            summary << strategy_name(strategy) << ',' << detail::fmt(e) << ',' << detail::fmt(xi)
                    << "\n";

            // Per-field full-space errors in physical units.
            for (std::size_t fi = 0; fi < all_fields().size(); ++fi) {
                const FieldId f = all_fields()[fi];
                const auto& basis = bases[fi];
                const auto range = truth[0].range_of(f);
                std::vector<Matrix> pred_fields, true_fields;
                for (std::size_t c = 0; c < test_cases.size(); ++c) {
                    pred_fields.push_back(
                        decode(basis, pred_latents[c].middleRows(range.first, range.second)));
                    true_fields.push_back(
                        ds.cases[static_cast<std::size_t>(test_cases[c])].fields.at(f));
                }
                table[fi][si] = field_error(pred_fields, true_fields);
            }

            // Figure-style artifacts for the first test case.
            const int c0 = test_cases[0];
            const double dt = ds.cases[static_cast<std::size_t>(c0)].dt;
            detail::atomic_write(
                eval_dir() / ("latent_band_" + strategy_name(strategy) + ".csv"),
                [&](const std::filesystem::path& tmp) {
                    write_latent_band_csv(truth[static_cast<std::size_t>(c0)].coeffs,
                                          per_case[0], dt, tmp);
                });
            for (FieldId f : {FieldId::TEMPERATURE, FieldId::FLUX, FieldId::PRECURSOR}) {
                const std::size_t fi = field_index(f);
                const auto range = truth[0].range_of(f);
                const Matrix pred_field =
                    decode(bases[fi], per_case[0].mean.middleRows(range.first, range.second));
                const Vector truth_avg = spatial_average_series(
                    ds.grid, ds.cases[static_cast<std::size_t>(c0)].fields.at(f));
                const Vector pred_avg = spatial_average_series(ds.grid, pred_field);
                detail::atomic_write(
                    eval_dir() / ("avg_" + field_name(f) + "_" + strategy_name(strategy) + ".csv"),
                    [&](const std::filesystem::path& tmp) {
                        write_average_series_csv(truth_avg, pred_avg, per_case[0].xi, dt, tmp);
                    });
            }
            // Per-node ensemble mean/std of the flux at the final time step.
            {
                const std::size_t fi = field_index(FieldId::FLUX);
                const auto range = truth[0].range_of(FieldId::FLUX);
                const Eigen::Index t_last = per_case[0].mean.cols() - 1;
                std::vector<Matrix> member_nodes;
                for (int m = 0; m < count; ++m) {
                    const Matrix lat = load_latent(strategy, "test", 0, m);
                    member_nodes.push_back(decode(
                        bases[fi], lat.block(range.first, t_last, range.second, 1)));
                }
                const EnsemblePrediction node_stats =
                    count >= 2 ? ensemble_predict(member_nodes) : single_member(member_nodes[0]);
                detail::atomic_write(
                    eval_dir() / ("flux_mean_" + strategy_name(strategy) + ".csv"),
                    [&](const std::filesystem::path& tmp) {
                        write_snapshot_grid_csv(ds.grid, node_stats.mean.col(0), tmp);
                    });
                detail::atomic_write(
                    eval_dir() / ("flux_std_" + strategy_name(strategy) + ".csv"),
                    [&](const std::filesystem::path& tmp) {
                        write_snapshot_grid_csv(ds.grid, node_stats.sample_std.col(0), tmp);
                    });
            }
        }

        detail::atomic_write(eval_dir() / "field_errors.csv",
                             [&](const std::filesystem::path& tmp) {
                                 write_field_error_table(field_rows, strategy_cols, table, tmp);
                             });
        detail::atomic_write(eval_dir() / "summary.csv", [&](const std::filesystem::path& tmp) {
            std::ofstream os(tmp);
            os << summary.str();
            if (!os) throw IoError("write failed: " + tmp.string());
        });
    }

    // ---- stage: sweep ------------------------------------------------------

    void sweep() {
        const auto l_cfg = cfg_.has("ensemble.sweep_l")
                               ? cfg_.get_int_list("ensemble.sweep_l")
                               : std::vector<std::int64_t>{2, 4, 6, 8, 10, 20, 30};
        std::vector<int> l_values(l_cfg.begin(), l_cfg.end());
        const std::string sname = cfg_.get_string("ensemble.sweep_strategy", "FIXED_OUTCORE");
        Strategy strategy = Strategy::FIXED_OUTCORE;
        if (sname == "MOBILE_SENSOR") strategy = Strategy::MOBILE_SENSOR;
        else if (sname == "MOBILE_PROBES") strategy = Strategy::MOBILE_PROBES;
        else if (sname != "FIXED_OUTCORE") throw ConfigError("unknown sweep strategy: " + sname);

        const ParametricDataset ds = load_dataset();
        const auto val_cases = ds.case_indices(Split::VALIDATION);
        const int count = trained_member_count(strategy);
        const int need = *std::max_element(l_values.begin(), l_values.end());
        if (count < need)
            throw MissingArtifactError(
                "sweep needs " + std::to_string(need) + " trained members but only " +
                std::to_string(count) +
                " exist; rerun the `train` subcommand with ensemble.members >= " +
                std::to_string(need));

        // predictions[member][case] on the validation split.
        std::vector<std::vector<Matrix>> predictions(static_cast<std::size_t>(count));
        for (int m = 0; m < count; ++m)
            for (std::size_t c = 0; c < val_cases.size(); ++c)
                predictions[static_cast<std::size_t>(m)].push_back(
                    load_latent(strategy, "val", static_cast<int>(c), m));
        const auto rows = sensitivity_sweep(predictions, l_values);
        std::filesystem::create_directories(eval_dir());
        detail::atomic_write(eval_dir() / "sweep.csv", [&](const std::filesystem::path& tmp) {
            write_sweep_csv(rows, tmp);
        });
    }

    // ---- workspace layout ---------------------------------------------------

    std::filesystem::path snapshots_dir() const { return dir_ / "snapshots"; }
    std::filesystem::path basis_dir() const { return dir_ / "basis"; }
    std::filesystem::path models_dir(Strategy s) const {
        return dir_ / "models" / strategy_name(s);
    }
    std::filesystem::path recon_dir(Strategy s) const {
        return dir_ / "reconstruct" / strategy_name(s);
    }
    std::filesystem::path eval_dir() const { return dir_ / "evaluate"; }

private:
    static std::string case_file_name(int c) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "case_%03d.snap", c);
        return buf;
    }
    static std::string member_file_name(int m) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "member_%03d.modl", m);
        return buf;
    }
    static std::string sensor_file_name(int m) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "sensors_%03d.csv", m);
        return buf;
    }
    static std::string latent_file_name(const std::string& tag, int case_pos, int member) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%s_case%03d_member%03d.lat", tag.c_str(), case_pos,
                      member);
        return buf;
    }
    static std::size_t field_index(FieldId f) {
        const auto& fields = all_fields();
        for (std::size_t i = 0; i < fields.size(); ++i)
            if (fields[i] == f) return i;
        throw DomainError("unknown field");
    }
    static EnsemblePrediction single_member(const Matrix& m) {
        EnsemblePrediction p;
        p.mean = m;
        p.sample_std = Matrix::Zero(m.rows(), m.cols());
        p.xi = 0.0;
        p.member_count = 1;
        return p;
    }

    void ensure_workspace() const {
        std::filesystem::create_directories(dir_);
        const auto prov = dir_ / "provenance.txt";
        if (std::filesystem::exists(prov)) return;
        detail::atomic_write(prov, [&](const std::filesystem::path& tmp) {
            std::ofstream os(tmp);
            os << "config_hash=" << cfg_.hash_hex() << "\n";
            os << "seed=" << seed_ << "\n";
            for (const auto& [k, v] : cfg_.entries()) os << k << "=" << v << "\n";
            if (!os) throw IoError("write failed: " + tmp.string());
        });
    }

    void write_latent_layout(const LatentSeries& layout) const {
        detail::atomic_write(basis_dir() / "latent_layout.csv",
                             [&](const std::filesystem::path& tmp) {
                                 std::ofstream os(tmp);
                                 os << "field,start,length\n";
                                 for (const auto& [f, rng] : layout.offsets)
                                     os << field_name(f) << ',' << rng.first << ','
                                        << rng.second << "\n";
                                 if (!os) throw IoError("write failed: " + tmp.string());
                             });
    }

    Config cfg_;
    std::filesystem::path dir_;
    std::uint64_t seed_ = 0;
    int jobs_ = 1;
};

}  // namespace shred

#endif
