#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dsta/enhancement.hpp"
#include "dsta/rng.hpp"

using namespace dsta;

namespace {

Mat random_mat(Rng& rng, std::size_t r, std::size_t c) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.normal();
  return m;
}

EnhancementParams zero_params(std::size_t n, std::size_t d, double sigma = 2.0) {
  EnhancementParams p;
  p.W_pos = Mat(n, n);
  p.b_pos.assign(n, 0.0);
  p.sigma = sigma;
  p.fcn_W = Mat(d, d);
  p.fcn_b.assign(d, 0.0);
  return p;
}

}  // namespace

TEST_CASE("feature similarity of orthonormal columns is the identity") {
  Mat x(3, 3);
  x(0, 0) = 1.0;
  x(1, 1) = 1.0;
  x(2, 2) = 1.0;
  const Mat phi = feature_similarity(x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(phi(i, j) == Catch::Approx(i == j ? 1.0 : 0.0).margin(1e-15));

  const Mat zero = feature_similarity(Mat(4, 2));
  for (double v : zero.data) CHECK(v == 0.0);
}

TEST_CASE("feature similarity matches the dot-product oracle and is exactly symmetric") {
  Rng rng(30);
  const Mat x = random_mat(rng, 3, 4);  // D=3, N=4
  const Mat phi = feature_similarity(x);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      double expected = 0.0;
      for (std::size_t t = 0; t < 3; ++t) expected += x(t, i) * x(t, j);
      CHECK(phi(i, j) == Catch::Approx(expected).margin(1e-12));
      CHECK(phi(i, j) == phi(j, i));  // exact
    }
  }
}

TEST_CASE("temporal similarity hand cases") {
  EnhancementParams p = zero_params(2, 1, 1.0);
  const Mat zero = temporal_similarity(p, 2);
  for (double v : zero.data) CHECK(v == 0.0);

  for (double& v : p.W_pos.data) v = 1.0;
  const Mat psi = temporal_similarity(p, 2);
  CHECK(psi(0, 0) == Catch::Approx(1.0).margin(1e-15));
  CHECK(psi(0, 1) == Catch::Approx(std::exp(-1.0)).margin(1e-15));
  CHECK(psi(0, 1) == Catch::Approx(0.367879).margin(1e-6));
  CHECK(psi(1, 0) == Catch::Approx(std::exp(-1.0)).margin(1e-15));
  CHECK(psi(1, 1) == Catch::Approx(1.0).margin(1e-15));

  EnhancementParams q = zero_params(2, 1);
  q.b_pos = {1.0, 2.0};
  const Mat broadcast = temporal_similarity(q, 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(broadcast(i, 0) == Catch::Approx(1.0).margin(1e-15));
    CHECK(broadcast(i, 1) == Catch::Approx(2.0).margin(1e-15));
  }
}

TEST_CASE("nonpositive sigma is rejected") {
  EnhancementParams p = zero_params(2, 1);
  p.sigma = 0.0;
  CHECK_THROWS_AS(temporal_similarity(p, 2), Error);
  p.sigma = -1.0;
  try {
    temporal_similarity(p, 2);
    FAIL("expected invalid-parameter error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_parameter);
  }
}

TEST_CASE("contribution rows are pmfs") {
  const Mat uniform = contribution(Mat(3, 3), Mat(3, 3));
  for (double v : uniform.data) CHECK(v == Catch::Approx(1.0 / 3.0).margin(1e-15));

  Mat dominant(2, 2);
  dominant(0, 0) = 20.0;  // one dominant entry
  const Mat c = contribution(dominant, Mat(2, 2));
  CHECK(c(0, 0) > 0.999);

  Rng rng(31);
  const Mat phi = random_mat(rng, 4, 4);
  const Mat psi = random_mat(rng, 4, 4);
  const Mat out = contribution(phi, psi);
  for (std::size_t i = 0; i < 4; ++i) {
    VecD row(4);
    for (std::size_t j = 0; j < 4; ++j) row[j] = phi(i, j) + psi(i, j);
    const VecD expected = softmax_row(row);
    double sum = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      CHECK(out(i, j) == Catch::Approx(expected[j]).margin(1e-12));
      CHECK(out(i, j) >= 0.0);
      sum += out(i, j);
    }
    CHECK(std::abs(sum - 1.0) <= 1e-10);
  }
}

TEST_CASE("zero FCN makes enhancement the identity") {
  Rng rng(32);
  const Mat x = random_mat(rng, 4, 3);
  EnhancementParams p = zero_params(3, 4);
  Mat c = contribution(feature_similarity(x), temporal_similarity(p, 3));
  const Mat xhat = enhance(x, c, p);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(xhat.data[i] == x.data[i]);  // exact
}

TEST_CASE("identity contribution with identity FCN doubles the features") {
  Rng rng(33);
  const Mat x = random_mat(rng, 3, 4);
  EnhancementParams p = zero_params(4, 3);
  for (std::size_t i = 0; i < 3; ++i) p.fcn_W(i, i) = 1.0;
  Mat c(4, 4);
  for (std::size_t i = 0; i < 4; ++i) c(i, i) = 1.0;
  const Mat xhat = enhance(x, c, p);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(xhat.data[i] == Catch::Approx(2.0 * x.data[i]).margin(1e-12));
}

TEST_CASE("enhance matches an independent matrix-chain oracle") {
  Rng rng(34);
  const std::size_t d = 5, n = 4;
  const Mat x = random_mat(rng, d, n);
  EnhancementParams p = zero_params(n, d);
  for (double& v : p.fcn_W.data) v = rng.normal();
  for (double& v : p.fcn_b) v = rng.normal();
  for (double& v : p.W_pos.data) v = rng.normal();
  for (double& v : p.b_pos) v = rng.normal();

  const Mat c = contribution(feature_similarity(x), temporal_similarity(p, n));
  const Mat xhat = enhance(x, c, p);

  // Straight loops: Xhat[i][m] = sum_j W[i][j] * (sum_t x[j][t] c[t][m]) + b[i] + x[i][m].
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t m = 0; m < n; ++m) {
      double acc = p.fcn_b[i] + x(i, m);
      for (std::size_t j = 0; j < d; ++j) {
        double pooled = 0.0;
        for (std::size_t t = 0; t < n; ++t) pooled += x(j, t) * c(t, m);
        acc += p.fcn_W(i, j) * pooled;
      }
      CHECK(xhat(i, m) == Catch::Approx(acc).margin(1e-10));
    }
  }
}

TEST_CASE("heads are enhanced independently") {
  Rng rng(35);
  const Mat xa = random_mat(rng, 3, 4);
  const Mat xb = random_mat(rng, 3, 4);
  EnhancementParams p = zero_params(4, 3);
  for (double& v : p.fcn_W.data) v = rng.normal();
  const Mat psi = temporal_similarity(p, 4);

  auto run = [&](const Mat& x) {
    return enhance(x, contribution(feature_similarity(x), psi), p);
  };
  // Processing order cannot matter: recompute in both orders.
  const Mat a1 = run(xa), b1 = run(xb);
  const Mat b2 = run(xb), a2 = run(xa);
  CHECK(a1.data == a2.data);
  CHECK(b1.data == b2.data);
}
