#include <catch_amalgamated.hpp>

#include "mindlink/cca.hpp"
#include "mindlink/fbcca.hpp"
#include "support.hpp"

using namespace mindlink;
using Catch::Matchers::WithinAbs;

TEST_CASE("a set is perfectly correlated with itself") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = oracle::random_matrix(4, 300, s);
    CHECK_THAT(cca_max_corr(x, x), WithinAbs(1.0, 1e-9));
  }
}

TEST_CASE("a sinusoid lies in the span of its reference set") {
  const auto ref = build_references(10.0, 4, 250.0, 500);
  Eigen::MatrixXd x(1, 500);
  for (Eigen::Index k = 0; k < 500; ++k) x(0, k) = std::sin(2.0 * oracle::kPi * 10.0 * k / 250.0);
  CHECK_THAT(cca_max_corr(x, ref.signals), WithinAbs(1.0, 1e-6));
  Eigen::MatrixXd shifted(1, 500);
  for (Eigen::Index k = 0; k < 500; ++k) shifted(0, k) = 3.0 * std::sin(2.0 * oracle::kPi * 20.0 * k / 250.0 + 0.7) + 2.0;
  CHECK_THAT(cca_max_corr(shifted, ref.signals), WithinAbs(1.0, 1e-6));
}

TEST_CASE("largest canonical correlation agrees with an angle-grid search") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto x = oracle::random_matrix(2, 200, 100 + s);
    Eigen::MatrixXd y = oracle::random_matrix(2, 200, 200 + s);
    y.row(0) += 0.8 * x.row(1);  // give the pair some structure
    const double grid = oracle::grid_cca_2x2(x, y);
    INFO("seed " << s << " grid " << grid);
    CHECK_THAT(cca_max_corr(x, y), WithinAbs(grid, 1e-3));
  }
}

TEST_CASE("canonical correlation is invariant to invertible mixing within each set") {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto x = oracle::random_matrix(3, 250, 300 + s);
    Eigen::MatrixXd y = oracle::random_matrix(4, 250, 400 + s);
    y.row(2) += x.row(0) - 0.5 * x.row(2);
    Eigen::MatrixXd mx = oracle::random_matrix(3, 3, 500 + s) + 3.0 * Eigen::MatrixXd::Identity(3, 3);
    Eigen::MatrixXd my = oracle::random_matrix(4, 4, 600 + s) + 3.0 * Eigen::MatrixXd::Identity(4, 4);
    REQUIRE(std::abs(mx.determinant()) > 1e-3);
    REQUIRE(std::abs(my.determinant()) > 1e-3);
    CHECK_THAT(cca_max_corr(mx * x, my * y), WithinAbs(cca_max_corr(x, y), 1e-9));
  }
}

TEST_CASE("correlations stay within [0, 1]") {
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto x = oracle::random_matrix(1 + s % 4, 60, 700 + s);
    const auto y = oracle::random_matrix(1 + (s / 4) % 5, 60, 800 + s);
    const double r = cca_max_corr(x, y);
    CHECK(r >= 0.0);
    CHECK(r <= 1.0);
  }
}

TEST_CASE("rank-deficient sets are truncated rather than inflating the correlation") {
  const auto x = oracle::random_matrix(2, 200, 900);
  Eigen::MatrixXd dup(3, 200);
  dup.row(0) = x.row(0);
  dup.row(1) = x.row(1);
  dup.row(2) = 2.0 * x.row(0) - x.row(1);  // linear combination
  const auto y = oracle::random_matrix(2, 200, 901);
  CHECK_THAT(cca_max_corr(dup, y), WithinAbs(cca_max_corr(x, y), 1e-9));
  CHECK(centered_row_basis(dup).cols() == 2);
}

TEST_CASE("degenerate and mismatched inputs are rejected") {
  Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(2, 100, 4.0);
  const auto y = oracle::random_matrix(2, 100, 1);
  CHECK_THROWS_AS(cca_max_corr(flat, y), DegenerateInput);
  CHECK_THROWS_AS(cca_max_corr(y, flat), DegenerateInput);
  CHECK_THROWS_AS(cca_max_corr(oracle::random_matrix(2, 100, 2), oracle::random_matrix(2, 99, 3)), InvalidArgument);
  CHECK_THROWS_AS(cca_max_corr(oracle::random_matrix(8, 9, 2), oracle::random_matrix(2, 9, 3)), InvalidArgument);
  CHECK_NOTHROW(cca_max_corr(oracle::random_matrix(8, 10, 2), oracle::random_matrix(2, 10, 3)));
}
