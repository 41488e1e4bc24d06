#include "binn/linalg.hpp"
#include "binn/pde.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace binn;
using namespace binn::pde;

namespace {

constexpr double kCenter = 0.0736713512667;

SolveSpec mesh(int m) {
    SolveSpec s;
    s.m = m;
    return s;
}

double center_error(int m) { return std::abs(solve_constant(1.0, mesh(m)).at(m / 2, m / 2) - kCenter); }

}  // namespace

TEST(Coefficient, ZeroXiIsConstantTwo) {
    KLCoefficient c;
    for (double x : {0.0, 0.13, 0.5, 1.0})
        for (double y : {0.0, 0.71, 1.0}) EXPECT_EQ(c(x, y), 2.0);
    EXPECT_EQ(nodal_coefficient(c, 8), Mat::Constant(9, 9, 2.0));
}

TEST(Coefficient, NodalMatchesPointwise) {
    KLCoefficient c = sample_xi(3, 0);
    Mat U = nodal_coefficient(c, 10);
    for (int i = 0; i <= 10; i += 3)
        for (int j = 0; j <= 10; j += 2) EXPECT_NEAR(U(i, j), c(i / 10.0, j / 10.0), 1e-13);
}

TEST(Coefficient, SamplingDeterministicAndFlatLayout) {
    KLCoefficient a = sample_xi(11, 4), b = sample_xi(11, 4), c = sample_xi(11, 5), d = sample_xi(11, 4, 1);
    EXPECT_EQ(a.xi, b.xi);
    EXPECT_NE(a.xi, c.xi);
    EXPECT_NE(a.xi, d.xi);
    Vec f = a.flat();
    EXPECT_EQ(f(0 * kModes + 3), a.xi(0, 3));
    EXPECT_EQ(f(2 * kModes + 1), a.xi(2, 1));
    EXPECT_EQ(KLCoefficient::from_flat(f).xi, a.xi);
    Mat A = amplitudes(f);
    EXPECT_DOUBLE_EQ(A(2 * kModes + 1, 0), a.xi(2, 1) / (27.0 + 8.0));
    EXPECT_LE((amplitudes_inverse(A) - Mat(f)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Coefficient, SampleMeanWithinThreeSigma) {
    constexpr double pi = std::numbers::pi;
    const double x1 = 0.3, x2 = 0.7;
    double var = 0.0;
    for (int i = 1; i <= kModes; ++i)
        for (int j = 1; j <= kModes; ++j) {
            double w = KLCoefficient::weight(i, j) * std::cos(i * pi * x1) * std::cos(j * pi * x2);
            var += w * w;
        }
    const int K = 2000;
    double mean = 0.0;
    for (int k = 0; k < K; ++k) mean += sample_xi(17, static_cast<std::uint64_t>(k))(x1, x2);
    mean /= K;
    EXPECT_LE(std::abs(mean - 2.0), 3.0 * std::sqrt(var / K));
}

TEST(Solver, CenterValueAgainstSeries) {
    EXPECT_NEAR(series_oracle(0.5, 0.5), kCenter, 1e-10);
    const double h = 1.0 / 50;
    Solution s = solve_constant(1.0, mesh(50));
    EXPECT_LE(std::abs(s.at(25, 25) - kCenter), 5 * h * h);
    EXPECT_LE(s.residual, 1e-10);
}

TEST(Solver, SecondOrderConvergence) {
    std::vector<double> hs, errs;
    for (int m : {16, 32, 64}) {
        hs.push_back(std::log(1.0 / m));
        errs.push_back(std::log(center_error(m)));
    }
    double order = fit_slope(hs, errs);
    EXPECT_GE(order, 1.8);
    EXPECT_LE(order, 2.2);
}

TEST(Solver, ScalesInverselyWithConstantCoefficient) {
    Solution one = solve_constant(1.0, mesh(20)), two = solve_constant(2.0, mesh(20));
    EXPECT_LE((2.0 * two.y - one.y).cwiseAbs().maxCoeff(), 1e-10 * one.y.maxCoeff());
}

TEST(Solver, BoundaryZeroInteriorPositive) {
    Solution s = solve(sample_xi(5, 2), mesh(24));
    for (int i = 0; i <= 24; ++i) {
        EXPECT_EQ(s.at(0, i), 0.0);
        EXPECT_EQ(s.at(24, i), 0.0);
        EXPECT_EQ(s.at(i, 0), 0.0);
        EXPECT_EQ(s.at(i, 24), 0.0);
    }
    for (int i = 1; i < 24; ++i)
        for (int j = 1; j < 24; ++j) EXPECT_GT(s.at(i, j), 0.0);
    EXPECT_GT(s.energy, 0.0);
}

TEST(Solver, AssembledMatrixSymmetric) {
    Mat U = nodal_coefficient(sample_xi(6, 1), 12);
    Mat A = Mat(assemble(U));
    EXPECT_EQ((A - A.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GT(A.diagonal().minCoeff(), 0.0);
    EXPECT_DOUBLE_EQ(harmonic(1.0, 3.0), 1.5);
}

TEST(Solver, LargerCoefficientLowersSolution) {
    Mat U = nodal_coefficient(sample_xi(8, 3), 20);
    SolveSpec s = mesh(20);
    Solution a = solve_nodal(U, s);
    Mat V = U;
    V.array() += 0.5;
    Solution b = solve_nodal(V, s);
    EXPECT_GE((a.y - b.y).minCoeff(), -1e-14);
    EXPECT_GT(a.at(10, 10), b.at(10, 10));
}

TEST(Solver, RejectsBadInput) {
    SolveSpec s = mesh(8);
    EXPECT_THROW(solve_nodal(Mat::Constant(9, 9, 1e-4), s), Error);
    EXPECT_THROW(solve_nodal(Mat::Constant(8, 9, 1.0), s), Error);
    EXPECT_THROW(solve_constant(1.0, mesh(1)), Error);
    EXPECT_THROW(series_oracle(0.5, 0.5, 10), Error);
}

TEST(Oracle, SymmetricAndZeroOnBoundary) {
    EXPECT_NEAR(series_oracle(0.2, 0.7), series_oracle(0.7, 0.2), 1e-15);
    EXPECT_NEAR(series_oracle(0.2, 0.7), series_oracle(0.8, 0.3), 1e-14);
    EXPECT_NEAR(series_oracle(0.0, 0.4), 0.0, 1e-15);
    EXPECT_NEAR(series_oracle(0.4, 1.0), 0.0, 1e-13);
}

TEST(Dataset, GenerateDeterministicAcrossThreads) {
    SolveSpec s = mesh(16);
    PairDataset a = generate(12, 21, s, 1), b = generate(12, 21, s, 3);
    EXPECT_EQ(a.xi, b.xi);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(a.rejections, b.rejections);
    EXPECT_EQ(a.xi.rows(), kXiDim);
    EXPECT_EQ(a.y.rows(), s.nodes());
    EXPECT_EQ(a.xi.col(4), sample_xi(21, 4).flat());
}

TEST(Dataset, SaveLoadRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "binn_test_pde";
    std::filesystem::create_directories(dir);
    PairDataset a = generate(5, 2, mesh(10), 1);
    a.save(dir / "ds.json");
    nlohmann::json j = io::read_json(dir / "ds.json");
    EXPECT_EQ(j.at("M").get<long>(), 5);
    EXPECT_EQ(j.at("seed").get<std::uint64_t>(), 2u);
    PairDataset b = PairDataset::load(dir / "ds.json");
    EXPECT_EQ(a.xi, b.xi);
    EXPECT_EQ(a.y, b.y);
    EXPECT_EQ(b.m, 10);
    std::filesystem::remove_all(dir);
}
