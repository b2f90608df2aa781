#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "gpsdrf/numkit.hpp"
#include "oracles.hpp"

using namespace gpsdrf;

TEST_CASE("solve_spd identity and diagonal") {
  Mat id = Mat::Identity(2, 2);
  Vec b(2);
  b << 3, 5;
  Vec x = solve_spd(id, b);
  CHECK(x[0] == doctest::Approx(3).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(5).epsilon(1e-14));

  Mat d(2, 2);
  d << 2, 0, 0, 4;
  Vec b2(2);
  b2 << 2, 8;
  Vec x2 = solve_spd(d, b2);
  CHECK(x2[0] == doctest::Approx(1).epsilon(1e-14));
  CHECK(x2[1] == doctest::Approx(2).epsilon(1e-14));
}

TEST_CASE("solve_spd matches Gauss-Jordan oracle on random SPD systems") {
  Rng rng(99);
  for (int rep = 0; rep < 20; ++rep) {
    const int k = 5;
    Mat m(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) m(i, j) = rng.normal();
    Mat a = m * m.transpose() + 0.5 * Mat::Identity(k, k);
    Vec b(k);
    for (int i = 0; i < k; ++i) b[i] = rng.normal();

    Vec x = solve_spd(a, b);
    oracle::Matrix ao(k, std::vector<double>(k));
    std::vector<double> bo(k);
    for (int i = 0; i < k; ++i) {
      bo[i] = b[i];
      for (int j = 0; j < k; ++j) ao[i][j] = a(i, j);
    }
    auto xo = oracle::gauss_jordan_solve(ao, bo);
    for (int i = 0; i < k; ++i)
      CHECK(std::fabs(x[i] - xo[i]) <= 1e-10 * (1.0 + std::fabs(xo[i])));
  }
}

TEST_CASE("solve_spd recovers x up to condition 1e8 and keeps small residual") {
  Rng rng(5);
  for (double cond : {1e2, 1e5, 1e8}) {
    const int k = 6;
    Mat m(k, k);
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < k; ++j) m(i, j) = rng.normal();
    Eigen::HouseholderQR<Mat> qr(m);
    Mat q = qr.householderQ();
    Vec ev(k);
    for (int i = 0; i < k; ++i)
      ev[i] = std::pow(cond, -static_cast<double>(i) / (k - 1));
    Mat a = q * ev.asDiagonal() * q.transpose();
    Vec x_true(k);
    for (int i = 0; i < k; ++i) x_true[i] = rng.normal();
    Vec b = a * x_true;
    Vec x = solve_spd(a, b);
    CHECK((x - x_true).norm() <= 1e-8 * x_true.norm());
    CHECK((a * x - b).norm() <= 1e-8 * b.norm());
  }
}

TEST_CASE("solve_spd rejects singular and indefinite input with rcond") {
  Mat a(2, 2);
  a << 1, 1, 1, 1;
  Vec b(2);
  b << 1, 1;
  CHECK_THROWS_AS(solve_spd(a, b), SingularMatrix);
  try {
    solve_spd(a, b);
  } catch (const SingularMatrix& e) {
    CHECK(e.rcond < 1e-12);
  }
  Mat neg(2, 2);
  neg << 1, 0, 0, -1;
  CHECK_THROWS_AS(solve_spd(neg, b), SingularMatrix);
}

TEST_CASE("normal_pdf closed-form values") {
  CHECK(normal_pdf(0, 0, 1) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
  CHECK(normal_pdf(2.5, 2.5, 4.0) ==
        doctest::Approx(1.0 / std::sqrt(2.0 * M_PI * 4.0)).epsilon(1e-15));
  // standardization identity
  CHECK(normal_pdf(3, 1, 4) ==
        doctest::Approx(normal_pdf((3.0 - 1.0) / 2.0, 0, 1) / 2.0).epsilon(1e-14));
  CHECK_THROWS_AS(normal_pdf(0, 0, 0), NonPositiveVariance);
  CHECK_THROWS_AS(normal_pdf(0, 0, -1), NonPositiveVariance);
}

TEST_CASE("normal_pdf integrates to one") {
  for (auto [mu, s2] : {std::pair{0.0, 1.0}, {1.5, 0.25}, {-3.0, 9.0}}) {
    double sd = std::sqrt(s2);
    double v = oracle::integrate([&](double x) { return normal_pdf(x, mu, s2); },
                                 mu - 10 * sd, mu + 10 * sd, 1e-12);
    CHECK(std::fabs(v - 1.0) <= 1e-9);
  }
}

TEST_CASE("normal_cdf reference points and symmetry") {
  CHECK(normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::fabs(normal_cdf(1.959963984540054) - 0.975) <= 1e-12);
  for (double x : {-7.5, -3.0, -0.4, 0.3, 2.2, 6.0})
    CHECK(std::fabs(normal_cdf(x) - (1.0 - normal_cdf(-x))) <= 1e-14);
}

TEST_CASE("normal_cdf agrees with series oracle") {
  for (double x = -8.0; x <= 8.0; x += 0.25)
    CHECK(std::fabs(normal_cdf(x) - oracle::normal_cdf_series(x)) <= 1e-12);
}

TEST_CASE("quantiles follow the (k-1)/(n-1) interpolation convention") {
  CHECK(quantiles({1, 2, 3, 4, 5}, {0, 0.5, 1}) == std::vector<double>{1, 3, 5});
  CHECK(quantiles({1, 2, 3, 4}, {0.5})[0] == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(quantiles({7}, {0, 1}) == std::vector<double>{7, 7});
  CHECK_THROWS_AS(quantiles({}, {0.5}), EmptyInput);
  CHECK_THROWS_AS(quantiles({1.0}, {0.7, 0.3}), std::invalid_argument);
  CHECK_THROWS_AS(quantiles({1.0}, {1.5}), std::invalid_argument);
}

TEST_CASE("quantiles are monotone in probs and affine-equivariant") {
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    std::vector<double> values(30);
    for (auto& v : values) v = rng.normal();
    std::vector<double> probs = {0, 0.1, 0.25, 0.5, 0.8, 0.95, 1};
    auto q = quantiles(values, probs);
    for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i] >= q[i - 1]);

    const double a = 2.5, b = -1.0;
    std::vector<double> scaled(values);
    for (auto& v : scaled) v = a * v + b;
    auto qs = quantiles(scaled, probs);
    for (std::size_t i = 0; i < q.size(); ++i)
      CHECK(qs[i] == doctest::Approx(a * q[i] + b).epsilon(1e-12));
  }
}

TEST_CASE("rng determinism and ranges") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(123), d(124);
  bool differ = false;
  for (int i = 0; i < 10; ++i) differ |= (c.next_u64() != d.next_u64());
  CHECK(differ);

  Rng r(9);
  for (int i = 0; i < 1000; ++i) {
    double u = r.uniform01();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    CHECK(r.next_below(13) < 13);
  }
}

TEST_CASE("rng normal moments are sane") {
  Rng r(202);
  const int n = 200000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    double z = r.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.01);
  CHECK(std::fabs(sumsq / n - 1.0) < 0.02);
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t tag = 0; tag < 1000; ++tag) seen.insert(derive_seed(42, tag));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("mvn_sample covariance, determinism, degenerate input") {
  Mat cov = Mat::Identity(2, 2);
  Vec mean = Vec::Zero(2);
  Rng rng(55);
  const Eigen::Index count = 40000;
  Mat draws = mvn_sample(rng, mean, cov, count);
  Mat centered = draws.rowwise() - draws.colwise().mean();
  Mat sample_cov = centered.transpose() * centered / double(count - 1);
  const double tol = 4.0 / std::sqrt(double(count));
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      CHECK(std::fabs(sample_cov(i, j) - cov(i, j)) <= tol);

  Rng r1(7), r2(7);
  Mat d1 = mvn_sample(r1, mean, cov, 10);
  Mat d2 = mvn_sample(r2, mean, cov, 10);
  CHECK((d1 - d2).cwiseAbs().maxCoeff() == 0.0);

  Mat empty = mvn_sample(r1, mean, cov, 0);
  CHECK(empty.rows() == 0);

  Mat bad(2, 2);
  bad << 1, 2, 2, 1;  // indefinite
  CHECK_THROWS_AS(mvn_sample(r1, mean, bad, 3), SingularMatrix);
}

TEST_CASE("parallel_for visits every index once and propagates errors") {
  for (int threads : {1, 2, 5}) {
    std::vector<int> hits(1000, 0);
    parallel_for(1000, threads, [&](std::size_t i) { hits[i]++; });
    CHECK(std::accumulate(hits.begin(), hits.end(), 0) == 1000);
    CHECK(*std::min_element(hits.begin(), hits.end()) == 1);
  }
  CHECK_THROWS_AS(parallel_for(10, 3,
                               [](std::size_t i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
