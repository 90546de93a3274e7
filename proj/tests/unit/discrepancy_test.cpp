#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcml/discrepancy.hpp"
#include "rcml/rng.hpp"
#include "test_util.hpp"

using namespace rcml;

namespace {

Matrix random_rows(Index n, Index d, std::uint64_t seed, double shift = 0.0) {
  Rng rng(seed);
  Matrix m(n, d);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < d; ++j) m(i, j) = rng.normal() + shift;
  }
  return m;
}

// Direct transcription of the biased squared-MMD definition: every kernel
// term spelled out, no sharing of the Gram blocks.
double naive_mmd(const Matrix& p, const Matrix& q, const std::vector<double>& sigmas) {
  const Index m = p.rows();
  const Index h = q.rows();
  double s_pp = 0.0, s_pq = 0.0, s_qq = 0.0;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) s_pp += rbf_kernel(p.row(i), p.row(j), sigmas);
  }
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < h; ++j) s_pq += rbf_kernel(p.row(i), q.row(j), sigmas);
  }
  for (Index i = 0; i < h; ++i) {
    for (Index j = 0; j < h; ++j) s_qq += rbf_kernel(q.row(i), q.row(j), sigmas);
  }
  const double md = static_cast<double>(m), hd = static_cast<double>(h);
  const double raw = s_pp / (md * md) - 2.0 * s_pq / (md * hd) + s_qq / (hd * hd);
  return std::max(0.0, raw);
}

}  // namespace

TEST_CASE("kernel config validation and factories") {
  KernelConfig cfg;
  CHECK(cfg.adaptive());
  CHECK_NOTHROW(cfg.validate());

  const KernelConfig fixed = KernelConfig::fixed({0.5, 2.0});
  CHECK(!fixed.adaptive());
  CHECK(fixed.sigmas == std::vector<double>{0.5, 2.0});

  const KernelConfig scaled = KernelConfig::median_adaptive({1.0, 3.0});
  CHECK(scaled.adaptive());
  CHECK(scaled.median_scales == std::vector<double>{1.0, 3.0});

  KernelConfig bad;
  bad.sigmas = {1.0, 0.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad.sigmas.clear();
  bad.median_scales = {1.0, -2.0};
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("rbf kernel closed-form values") {
  RowVector a(1), b(1);
  a << 0.0;
  b << 1.0;
  CHECK(rbf_kernel(a, a, {1.0}) == 1.0);
  CHECK(rbf_kernel(a, b, {1.0}) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));
  // Mixture averages the per-bandwidth kernels.
  const double mix = rbf_kernel(a, b, {1.0, 2.0});
  CHECK(mix == doctest::Approx(0.5 * (std::exp(-0.5) + std::exp(-0.125))).epsilon(1e-15));

  RowVector c(2);
  c << 0.0, 0.0;
  CHECK_THROWS_AS(rbf_kernel(a, c, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(rbf_kernel(a, b, {}), std::invalid_argument);
}

TEST_CASE("median heuristic takes the lower median pairwise distance") {
  Matrix p1(1, 1), q1(1, 1);
  p1 << 0.0;
  q1 << 2.0;
  CHECK(median_heuristic(p1, q1) == 2.0);

  // Stacked points 0, 1, 3 give distances {1, 2, 3}; the median is 2.
  Matrix p2(2, 1), q2(1, 1);
  p2 << 0.0, 1.0;
  q2 << 3.0;
  CHECK(median_heuristic(p2, q2) == 2.0);

  // Four points 0, 1, 3, 7: distances {1, 2, 3, 4, 6, 7}, lower median 3.
  Matrix p3(2, 1), q3(2, 1);
  p3 << 0.0, 1.0;
  q3 << 3.0, 7.0;
  CHECK(median_heuristic(p3, q3) == 3.0);

  // Coincident points and single-point stacks fall back to 1.
  Matrix same(2, 1);
  same << 5.0, 5.0;
  CHECK(median_heuristic(same, same) == 1.0);
  Matrix lone(1, 2);
  lone << 1.0, 2.0;
  Matrix none(0, 2);
  CHECK(median_heuristic(lone, none) == 1.0);
}

TEST_CASE("resolve_sigmas honors fixed bandwidths and scales the median") {
  Matrix p(1, 1), q(1, 1);
  p << 0.0;
  q << 2.0;

  const KernelConfig fixed = KernelConfig::fixed({0.3, 0.7});
  CHECK(resolve_sigmas(p, q, fixed) == std::vector<double>{0.3, 0.7});

  const KernelConfig adaptive = KernelConfig::median_adaptive({0.5, 1.0, 2.0});
  CHECK(resolve_sigmas(p, q, adaptive) == std::vector<double>{1.0, 2.0, 4.0});
}

TEST_CASE("one-point batches reduce mmd to a closed form") {
  Matrix p(1, 1), q(1, 1);
  p << 0.0;
  q << 1.0;
  const MmdResult r = mmd_sq(p, q, KernelConfig::fixed({1.0}));
  // k(p,p) + k(q,q) - 2 k(p,q) = 2 - 2 exp(-1/2).
  CHECK(r.value == doctest::Approx(2.0 - 2.0 * std::exp(-0.5)).epsilon(1e-12));
  CHECK(r.sigmas == std::vector<double>{1.0});
}

TEST_CASE("identical batches give exactly zero with zero gradients") {
  const Matrix p = random_rows(6, 3, 77);
  const MmdResult r = mmd_sq(p, p, KernelConfig::median_adaptive());
  CHECK(r.value == 0.0);
  CHECK(all_zero(r.grad_p));
  CHECK(all_zero(r.grad_q));
}

TEST_CASE("mmd is symmetric in its arguments") {
  const Matrix p = random_rows(5, 4, 10);
  const Matrix q = random_rows(5, 4, 11, 0.5);
  const KernelConfig cfg = KernelConfig::fixed({0.8, 1.6});
  const MmdResult ab = mmd_sq(p, q, cfg);
  const MmdResult ba = mmd_sq(q, p, cfg);
  CHECK(ab.value == doctest::Approx(ba.value).epsilon(1e-12));
  for (Index i = 0; i < ab.grad_p.rows(); ++i) {
    for (Index j = 0; j < ab.grad_p.cols(); ++j) {
      CHECK(ab.grad_p(i, j) == doctest::Approx(ba.grad_q(i, j)).epsilon(1e-12));
      CHECK(ab.grad_q(i, j) == doctest::Approx(ba.grad_p(i, j)).epsilon(1e-12));
    }
  }
}

TEST_CASE("mmd stays nonnegative on random batches") {
  Rng meta(5);
  for (int rep = 0; rep < 50; ++rep) {
    const Index rows_p = 1 + static_cast<Index>(meta.below(8));
    const Index rows_q = 1 + static_cast<Index>(meta.below(8));
    const Index dim = 1 + static_cast<Index>(meta.below(4));
    const Matrix p = random_rows(rows_p, dim, meta.next_u64());
    const Matrix q = random_rows(rows_q, dim, meta.next_u64());
    CHECK(mmd_sq(p, q, KernelConfig::median_adaptive()).value >= 0.0);
  }
}

TEST_CASE("mmd agrees with a naive per-pair transcription") {
  Rng meta(31);
  for (int rep = 0; rep < 30; ++rep) {
    // Independent batch sizes cover the unequal-size estimator as well.
    const Index rows_p = 1 + static_cast<Index>(meta.below(16));
    const Index rows_q = 1 + static_cast<Index>(meta.below(8));
    const Index dim = 1 + static_cast<Index>(meta.below(8));
    const Matrix p = random_rows(rows_p, dim, meta.next_u64());
    const Matrix q = random_rows(rows_q, dim, meta.next_u64(), 0.3);
    const KernelConfig cfg = (rep % 2 == 0) ? KernelConfig::fixed({0.5, 1.0, 2.0})
                                            : KernelConfig::median_adaptive();
    const std::vector<double> sigmas = resolve_sigmas(p, q, cfg);
    const MmdResult r = mmd_sq(p, q, cfg);
    CHECK(r.sigmas == sigmas);
    CHECK(std::abs(r.value - naive_mmd(p, q, sigmas)) <= 1e-12);
  }
}

TEST_CASE("mmd gradients match finite differences with frozen bandwidths") {
  Rng meta(13);
  for (int rep = 0; rep < 10; ++rep) {
    const Index rows_p = 2 + static_cast<Index>(meta.below(7));
    const Index rows_q = 2 + static_cast<Index>(meta.below(7));
    const Index dim = 1 + static_cast<Index>(meta.below(4));
    // Separated batches keep the estimate clear of the zero clamp.
    Matrix p = random_rows(rows_p, dim, meta.next_u64());
    Matrix q = random_rows(rows_q, dim, meta.next_u64(), 2.5);
    const KernelConfig cfg = KernelConfig::fixed(resolve_sigmas(p, q, KernelConfig::median_adaptive()));

    const MmdResult r = mmd_sq(p, q, cfg);
    REQUIRE(r.value > 1e-4);

    const double step = 1e-4;
    const auto check_grad = [&](Matrix& target, const Matrix& analytic) {
      for (Index i = 0; i < target.rows(); ++i) {
        for (Index j = 0; j < target.cols(); ++j) {
          const double saved = target(i, j);
          target(i, j) = saved + step;
          const double hi = mmd_sq(p, q, cfg).value;
          target(i, j) = saved - step;
          const double lo = mmd_sq(p, q, cfg).value;
          target(i, j) = saved;
          const double fd = (hi - lo) / (2.0 * step);
          const double a = analytic(i, j);
          CHECK(std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-10}) <= 1e-5);
        }
      }
    };
    check_grad(p, r.grad_p);
    check_grad(q, r.grad_q);
  }
}

TEST_CASE("mmd grows as the batches separate") {
  const Index m = 64;
  const Matrix base = random_rows(m, 3, 400);
  const KernelConfig cfg = KernelConfig::fixed({1.0});
  double prev = -1.0;
  for (double delta : {0.5, 1.0, 2.0}) {
    Matrix shifted = base;
    shifted.col(0).array() += delta;
    const double value = mmd_sq(base, shifted, cfg).value;
    CHECK(value > prev);
    prev = value;
  }
}

TEST_CASE("mmd accepts unequal batch sizes and rejects bad shapes") {
  const Matrix p = random_rows(3, 2, 1);
  const Matrix q = random_rows(4, 2, 2);
  const MmdResult r = mmd_sq(p, q, KernelConfig::median_adaptive());
  CHECK(std::abs(r.value - naive_mmd(p, q, r.sigmas)) <= 1e-12);
  CHECK(r.grad_p.rows() == 3);
  CHECK(r.grad_q.rows() == 4);

  CHECK_THROWS_AS(mmd_sq(p, random_rows(3, 3, 2), KernelConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(mmd_sq(Matrix(0, 2), Matrix(0, 2), KernelConfig{}), std::invalid_argument);
  CHECK_THROWS_AS(mmd_sq(p, Matrix(0, 2), KernelConfig{}), std::invalid_argument);
}

TEST_CASE("disparity and consistency are the same estimator by role") {
  const Matrix a = random_rows(4, 3, 21);
  const Matrix b = random_rows(4, 3, 22, 1.0);
  const KernelConfig cfg = KernelConfig::fixed({1.0});
  CHECK(disparity_loss(a, b, cfg).value == mmd_sq(a, b, cfg).value);
  CHECK(consistency_loss(a, b, cfg).value == mmd_sq(a, b, cfg).value);
}
