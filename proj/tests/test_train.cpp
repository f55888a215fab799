#include "shred/net.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace shred;

namespace {

// Toy task: the target is an affine function of the last window row, so a
// short training run must drive the validation loss close to zero.
std::vector<TrainSample> affine_samples(int n, int lag, int s, int r, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix a = gaussian_matrix(r, s, 4242);
    Vector c(r);
    for (int k = 0; k < r; ++k) c(k) = 0.3 * (k + 1);
    std::vector<TrainSample> out;
    for (int i = 0; i < n; ++i) {
        TrainSample sample;
        sample.window.resize(lag + 1, s);
        for (Eigen::Index u = 0; u < sample.window.rows(); ++u)
            for (Eigen::Index v = 0; v < sample.window.cols(); ++v)
                sample.window(u, v) = dist(rng);
        sample.target = a * sample.window.row(lag).transpose() + c;
        out.push_back(std::move(sample));
    }
    return out;
}

TrainConfig quick_config(std::uint64_t seed = 0) {
    TrainConfig cfg;
    cfg.max_epochs = 60;
    cfg.patience = 60;
    cfg.batch_size = 16;
    cfg.learning_rate = 3e-3;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("training learns an affine map of the last window row") {
    const int lag = 4, s = 2, r = 3;
    auto train_set = affine_samples(256, lag, s, r, 1);
    auto val_set = affine_samples(64, lag, s, r, 2);
    ShredModel model = init_model(s, lag, r, 3, 16, 24, 24, 0.0);
    const TrainHistory hist = train(model, train_set, val_set, quick_config());
    REQUIRE(hist.val_loss.back() < 1e-2);
    REQUIRE(*std::min_element(hist.val_loss.begin(), hist.val_loss.end()) < 1e-2);

    // Inference error on held-out data, in raw target units.
    auto test_set = affine_samples(32, lag, s, r, 3);
    double err = 0.0, norm = 0.0;
    for (const auto& sample : test_set) {
        const Vector raw =
            forward(model, sample.window).cwiseProduct(model.target_std) + model.target_mean;
        err += (raw - sample.target).squaredNorm();
        norm += sample.target.squaredNorm();
    }
    REQUIRE(std::sqrt(err / norm) < 0.2);
}

TEST_CASE("training is deterministic per seed") {
    const int lag = 3, s = 2, r = 2;
    auto train_set = affine_samples(64, lag, s, r, 5);
    auto val_set = affine_samples(16, lag, s, r, 6);
    TrainConfig cfg = quick_config(9);
    cfg.max_epochs = 8;

    ShredModel m1 = init_model(s, lag, r, 7, 8, 12, 12, 0.1);
    ShredModel m2 = init_model(s, lag, r, 7, 8, 12, 12, 0.1);
    const TrainHistory h1 = train(m1, train_set, val_set, cfg);
    const TrainHistory h2 = train(m2, train_set, val_set, cfg);
    REQUIRE(h1.train_loss == h2.train_loss);
    REQUIRE(h1.val_loss == h2.val_loss);
    REQUIRE(h1.best_epoch == h2.best_epoch);
    bool identical = true;
    std::vector<std::pair<double*, std::int64_t>> v1, v2;
    m1.for_each_param([&](const std::string&, double* p, std::int64_t n) { v1.push_back({p, n}); });
    m2.for_each_param([&](const std::string&, double* p, std::int64_t n) { v2.push_back({p, n}); });
    for (std::size_t k = 0; k < v1.size(); ++k)
        identical = identical && std::memcmp(v1[k].first, v2[k].first, v1[k].second * 8) == 0;
    REQUIRE(identical);
}

TEST_CASE("patience zero stops after the first non-improving epoch") {
    const int lag = 3, s = 2, r = 2;
    auto train_set = affine_samples(64, lag, s, r, 5);
    auto val_set = affine_samples(16, lag, s, r, 6);
    TrainConfig cfg = quick_config(1);
    cfg.max_epochs = 200;
    cfg.patience = 0;
    ShredModel model = init_model(s, lag, r, 7, 8, 12, 12, 0.1);
    const TrainHistory hist = train(model, train_set, val_set, cfg);
    // The run ends one epoch after the best epoch (or at the cap).
    REQUIRE(static_cast<int>(hist.val_loss.size()) <= hist.best_epoch + 2);
}

TEST_CASE("the restored model achieves the best recorded validation loss") {
    const int lag = 3, s = 2, r = 2;
    auto train_set = affine_samples(96, lag, s, r, 11);
    auto val_set = affine_samples(24, lag, s, r, 12);
    TrainConfig cfg = quick_config(2);
    cfg.max_epochs = 25;
    ShredModel model = init_model(s, lag, r, 13, 8, 12, 12, 0.1);
    const TrainHistory hist = train(model, train_set, val_set, cfg);
    const double best = *std::min_element(hist.val_loss.begin(), hist.val_loss.end());
    REQUIRE(hist.val_loss[hist.best_epoch] == best);

    // Recompute the validation loss of the restored parameters by hand.
    double total = 0.0;
    for (const auto& sample : val_set) {
        const Vector std_target =
            (sample.target - model.target_mean).cwiseQuotient(model.target_std);
        total += (forward(model, sample.window) - std_target).squaredNorm() / r;
    }
    REQUIRE(total / val_set.size() == Catch::Approx(best).epsilon(1e-10));
}

TEST_CASE("target standardization stats are the training-split moments") {
    const int lag = 2, s = 2, r = 2;
    auto train_set = affine_samples(50, lag, s, r, 21);
    auto val_set = affine_samples(10, lag, s, r, 22);
    TrainConfig cfg = quick_config(3);
    cfg.max_epochs = 1;
    ShredModel model = init_model(s, lag, r, 23, 8, 12, 12, 0.0);
    train(model, train_set, val_set, cfg);

    Vector mean = Vector::Zero(r);
    for (const auto& sample : train_set) mean += sample.target;
    mean /= static_cast<double>(train_set.size());
    Vector var = Vector::Zero(r);
    for (const auto& sample : train_set) var += (sample.target - mean).cwiseAbs2();
    var /= static_cast<double>(train_set.size());
    REQUIRE((model.target_mean - mean).norm() < 1e-12);
    REQUIRE((model.target_std - var.cwiseSqrt()).norm() < 1e-12);

    // Round trip: standardize then de-standardize recovers the raw target.
    const Vector t = train_set[0].target;
    const Vector round =
        ((t - model.target_mean).cwiseQuotient(model.target_std))
            .cwiseProduct(model.target_std) +
        model.target_mean;
    REQUIRE((round - t).norm() < 1e-12);
}

TEST_CASE("predict_latent shapes and de-standardizes") {
    const int lag = 4, s = 2, r = 3;
    auto train_set = affine_samples(256, lag, s, r, 31);
    auto val_set = affine_samples(64, lag, s, r, 32);
    ShredModel model = init_model(s, lag, r, 33, 16, 24, 24, 0.0);
    train(model, train_set, val_set, quick_config(4));

    // Build a measurement series whose lagged tail windows match the task.
    MeasurementSeries series;
    series.values = gaussian_matrix(s, 40, 35);
    const Matrix latent = predict_latent(model, series);
    REQUIRE(latent.rows() == r);
    REQUIRE(latent.cols() == 40);

    // Beyond the warm-up region the prediction should track the affine truth.
    Matrix a = gaussian_matrix(r, s, 4242);
    Vector c(r);
    for (int k = 0; k < r; ++k) c(k) = 0.3 * (k + 1);
    double err = 0.0, norm = 0.0;
    for (Eigen::Index t = lag; t < 40; ++t) {
        const Vector truth = a * series.values.col(t) + c;
        err += (latent.col(t) - truth).squaredNorm();
        norm += truth.squaredNorm();
    }
    REQUIRE(std::sqrt(err / norm) < 0.25);

    MeasurementSeries wrong;
    wrong.values = gaussian_matrix(s + 1, 40, 36);
    REQUIRE_THROWS_AS(predict_latent(model, wrong), DimensionError);
}

TEST_CASE("invalid training configurations are rejected") {
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    REQUIRE_THROWS_AS(cfg.validate(), DomainError);
    cfg = TrainConfig{};
    cfg.batch_size = -1;
    REQUIRE_THROWS_AS(cfg.validate(), DomainError);
    cfg = TrainConfig{};
    REQUIRE_NOTHROW(cfg.validate());

    ShredModel model = init_model(2, 2, 2, 0, 4, 6, 6, 0.0);
    std::vector<TrainSample> empty;
    auto some = affine_samples(4, 2, 2, 2, 1);
    REQUIRE_THROWS_AS(train(model, empty, some, TrainConfig{}), DomainError);
    REQUIRE_THROWS_AS(train(model, some, empty, TrainConfig{}), DomainError);
}

TEST_CASE("model checkpoints round-trip bit for bit") {
    const int lag = 3, s = 2, r = 2;
    auto train_set = affine_samples(32, lag, s, r, 41);
    auto val_set = affine_samples(8, lag, s, r, 42);
    TrainConfig cfg = quick_config(5);
    cfg.max_epochs = 3;
    ShredModel model = init_model(s, lag, r, 43, 8, 12, 12, 0.1);
    train(model, train_set, val_set, cfg);

    const auto path = std::filesystem::temp_directory_path() / "shred_model_roundtrip.bin";
    write_model_file(model, path);
    ShredModel loaded = read_model_file(path);
    REQUIRE(loaded.s == model.s);
    REQUIRE(loaded.lag == model.lag);
    REQUIRE(loaded.r_total == model.r_total);
    REQUIRE(loaded.dropout == model.dropout);
    std::vector<std::pair<double*, std::int64_t>> v1, v2;
    model.for_each_param([&](const std::string&, double* p, std::int64_t n) { v1.push_back({p, n}); });
    loaded.for_each_param([&](const std::string&, double* p, std::int64_t n) { v2.push_back({p, n}); });
    for (std::size_t k = 0; k < v1.size(); ++k)
        REQUIRE(std::memcmp(v1[k].first, v2[k].first, v1[k].second * 8) == 0);
    REQUIRE(loaded.target_mean == model.target_mean);
    REQUIRE(loaded.target_std == model.target_std);

    // Predictions from the loaded model are bitwise identical.
    const Matrix w = gaussian_matrix(lag + 1, s, 50);
    REQUIRE(forward(model, w) == forward(loaded, w));

    // Corrupt the magic and expect the specific error.
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    REQUIRE_THROWS_AS(read_model_file(path), BadMagicError);
    std::filesystem::remove(path);
}
