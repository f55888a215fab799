#include "shred/metrics.hpp"
#include "shred/svd.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <sstream>

using namespace shred;

namespace {

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("exact predictions have zero error") {
    const Matrix a = gaussian_matrix(5, 8, 1);
    REQUIRE(columnwise_relative_error({a}, {a}) == 0.0);
}

TEST_CASE("a uniform 4.6 percent inflation reads back as 0.046") {
    const Matrix truth = gaussian_matrix(6, 10, 2);
    const Matrix pred = 1.046 * truth;
    REQUIRE(columnwise_relative_error({pred}, {truth}) ==
            Catch::Approx(0.046).epsilon(1e-12));
}

TEST_CASE("the metric matches a plain loop recomputation") {
    std::vector<Matrix> pred, truth;
    for (int c = 0; c < 3; ++c) {
        truth.push_back(gaussian_matrix(4, 7, 10 + c));
        pred.push_back(truth.back() + 0.1 * gaussian_matrix(4, 7, 20 + c));
    }
    double case_sum = 0.0;
    for (int c = 0; c < 3; ++c) {
        double t_sum = 0.0;
        for (int j = 0; j < 7; ++j)
            t_sum += (pred[c].col(j) - truth[c].col(j)).norm() / truth[c].col(j).norm();
        case_sum += t_sum / 7.0;
    }
    REQUIRE(columnwise_relative_error(pred, truth) ==
            Catch::Approx(case_sum / 3.0).margin(1e-14));
}

TEST_CASE("the metric is invariant to a global rescale of both arguments") {
    const Matrix truth = gaussian_matrix(5, 6, 3);
    const Matrix pred = truth + 0.05 * gaussian_matrix(5, 6, 4);
    const double base = columnwise_relative_error({pred}, {truth});
    REQUIRE(columnwise_relative_error({(1e6 * pred).eval()}, {(1e6 * truth).eval()}) ==
            Catch::Approx(base).epsilon(1e-12));
}

TEST_CASE("degenerate metric inputs are rejected") {
    const Matrix a = gaussian_matrix(3, 3, 5);
    REQUIRE_THROWS_AS(columnwise_relative_error({}, {}), DimensionError);
    REQUIRE_THROWS_AS(columnwise_relative_error({a}, {a, a}), DimensionError);
    const Matrix b = gaussian_matrix(4, 3, 6);
    REQUIRE_THROWS_AS(columnwise_relative_error({a}, {b}), DimensionError);
    Matrix z = a;
    z.col(1).setZero();
    REQUIRE_THROWS_AS(columnwise_relative_error({a}, {z}), DomainError);
}

TEST_CASE("decoding truncated coefficients cannot beat the SVD bound") {
    // eps_2 of the rank-r reconstruction is bounded below by the optimal
    // truncation error, and should be close to it in Frobenius terms.
    const Matrix x = gaussian_matrix(40, 25, 7) +
                     5.0 * gaussian_matrix(40, 1, 8) * gaussian_matrix(1, 25, 9);
    const SvdResult full = dense_svd(x, 25);
    const int r = 3;
    const Matrix approx = full.U.leftCols(r) * full.coeffs.topRows(r);
    const double err = field_error({approx}, {x});
    REQUIRE(err > 0.0);
    // Columnwise relative error of the best rank-r approximation stays below
    // the global relative Frobenius tail only up to column weighting; check
    // against a loose multiple instead.
    const double tail = std::sqrt(full.sigma.tail(25 - r).squaredNorm()) /
                        std::sqrt(full.sigma.squaredNorm());
    REQUIRE(err < 5.0 * tail);
}

TEST_CASE("spatial averages agree with hand-built fields") {
    const Grid2D grid = Grid2D::uniform(10, 12, 0, 1, 0, 1, 0.2);
    std::vector<Eigen::Index> core;
    for (Eigen::Index k = 0; k < grid.node_count(); ++k)
        if (grid.region_label[static_cast<std::size_t>(k)] == Region::CORE) core.push_back(k);
    REQUIRE(!core.empty());

    // Constant field: the average is the constant at every step.
    Matrix constant = Matrix::Constant(grid.node_count(), 4, 3.5);
    REQUIRE((spatial_average_series(grid, constant) - Vector::Constant(4, 3.5)).norm() < 1e-14);

    // Random field: compare against a direct loop.
    const Matrix random = gaussian_matrix(static_cast<int>(grid.node_count()), 3, 11);
    const Vector avg = spatial_average_series(grid, random);
    for (int j = 0; j < 3; ++j) {
        double sum = 0.0;
        for (Eigen::Index k : core) sum += random(k, j);
        REQUIRE(avg(j) == Catch::Approx(sum / core.size()).margin(1e-13));
    }

    const Matrix wrong = gaussian_matrix(7, 3, 12);
    REQUIRE_THROWS_AS(spatial_average_series(grid, wrong), DimensionError);
}

TEST_CASE("field error table CSV has the strategy-by-field layout") {
    const auto path = std::filesystem::temp_directory_path() / "shred_table.csv";
    // Dyadic values survive the round trip through decimal text exactly.
    write_field_error_table({"FLUX", "TEMPERATURE"}, {"FIXED_OUTCORE", "MOBILE_SENSOR"},
                            {{0.25, 0.5}, {0.75, 0.125}}, path);
    const std::string text = slurp(path);
    REQUIRE(text == "field,FIXED_OUTCORE,MOBILE_SENSOR\nFLUX,0.25,0.5\nTEMPERATURE,0.75,0.125\n");
    std::filesystem::remove(path);
}

TEST_CASE("latent band CSV carries truth, mean, and a 2-sigma band") {
    Matrix truth(1, 2);
    truth << 1.0, 2.0;
    EnsemblePrediction pred;
    pred.mean = Matrix::Constant(1, 2, 1.5);
    pred.sample_std = Matrix::Constant(1, 2, 0.25);
    pred.xi = 0.1;
    const auto path = std::filesystem::temp_directory_path() / "shred_band.csv";
    write_latent_band_csv(truth, pred, 0.5, path);
    const std::string text = slurp(path);
    REQUIRE(text ==
            "t,truth_0,mean_0,lo_0,hi_0\n"
            "0,1,1.5,1,2\n"
            "0.5,2,1.5,1,2\n");
    std::filesystem::remove(path);
}

TEST_CASE("average-series CSV uses the 1.96 xi interval") {
    Vector truth(2), pred(2);
    truth << 1.0, 2.0;
    pred << 1.1, 1.9;
    const auto path = std::filesystem::temp_directory_path() / "shred_avg.csv";
    write_average_series_csv(truth, pred, 0.1, 1.0, path);
    const std::string text = slurp(path);
    std::istringstream is(text);
    std::string line;
    std::getline(is, line);
    REQUIRE(line == "t,truth,pred,lo,hi");
    std::getline(is, line);
    // Parse the fields numerically: lo = 1.1 - 1.96*0.1, hi = 1.1 + 1.96*0.1.
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    double t, tr, pr, lo, hi;
    fields >> t >> tr >> pr >> lo >> hi;
    REQUIRE(t == 0.0);
    REQUIRE(tr == Catch::Approx(1.0).margin(1e-15));
    REQUIRE(pr == Catch::Approx(1.1).margin(1e-15));
    REQUIRE(lo == Catch::Approx(1.1 - 1.96 * 0.1).margin(1e-15));
    REQUIRE(hi == Catch::Approx(1.1 + 1.96 * 0.1).margin(1e-15));
    std::filesystem::remove(path);
}

TEST_CASE("sweep and snapshot CSVs are deterministic") {
    const auto p1 = std::filesystem::temp_directory_path() / "shred_sweep1.csv";
    const auto p2 = std::filesystem::temp_directory_path() / "shred_sweep2.csv";
    const std::vector<SweepRow> rows = {{2, 0.7790, 1.0}, {10, 0.4060, 0.52}};
    write_sweep_csv(rows, p1);
    write_sweep_csv(rows, p2);
    REQUIRE(slurp(p1) == slurp(p2));
    REQUIRE(slurp(p1).rfind("L,xi,xi_normalized\n", 0) == 0);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);

    const Grid2D grid = Grid2D::uniform(3, 2, 0, 1, 0, 1);
    Vector nodal(6);
    nodal << 1, 2, 3, 4, 5, 6;
    const auto p3 = std::filesystem::temp_directory_path() / "shred_grid.csv";
    write_snapshot_grid_csv(grid, nodal, p3);
    REQUIRE(slurp(p3) == "1,2,3\n4,5,6\n");
    Vector bad(5);
    REQUIRE_THROWS_AS(write_snapshot_grid_csv(grid, bad, p3), DimensionError);
    std::filesystem::remove(p3);
}
