#include "dfd/error.hpp"
#include "dfd/losses.hpp"
#include "dfd/manifold.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace dfd;

namespace {

struct Case {
  Matrix x;
  std::vector<int> y;
};

Case random_case(std::mt19937_64& rng, bool unit) {
  const int b = gen::uniform_int(rng, 3, 16);
  const int d = gen::uniform_int(rng, 2, 16);
  Case c{unit ? gen::unit_rows(rng, b, d) : gen::gaussian(rng, b, d), gen::labels(rng, b)};
  return c;
}

}  // namespace

TEST_CASE("hand-computed values") {
  // Two same-class unit vectors at right angles: |x - y| = sqrt(2).
  Matrix x(3, 2);
  x << 1, 0, 0, 1, -1, 0;
  const std::vector<int> y{0, 0, 1};
  CHECK(alignment_loss(x, y, 2.0) == doctest::Approx(2.0));
  CHECK(alignment_loss(x, y, 1.0) == doctest::Approx(std::sqrt(2.0)));
  // Pairs: (0,1) d2=2, (0,2) d2=4, (1,2) d2=2.
  CHECK(uniformity_loss(x, 2.0) == doctest::Approx(std::log((2 * std::exp(-4.0) + std::exp(-8.0)) / 3.0)));

  Matrix logits(2, 2);
  logits << 0, 0, 1, 3;
  CHECK(cross_entropy(logits, std::vector<int>{1, 0}) ==
        doctest::Approx((std::log(2.0) + std::log(1.0 + std::exp(2.0))) / 2.0));
}

TEST_CASE("loss values match brute-force oracles") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = random_case(rng, trial % 2 == 0);
    const double alpha = trial % 3 == 0 ? 1.0 : 2.0;
    const double t = gen::uniform(rng, 0.5, 3.0);
    const double tau = gen::uniform(rng, 0.05, 1.0);
    CHECK(alignment_loss(c.x, c.y, alpha) == doctest::Approx(oracle::alignment(c.x, c.y, alpha)).epsilon(1e-10));
    CHECK(uniformity_loss(c.x, t) == doctest::Approx(oracle::uniformity(c.x, t)).epsilon(1e-10));
    CHECK(supcon_loss(c.x, c.y, tau) == doctest::Approx(oracle::supcon(c.x, c.y, tau)).epsilon(1e-10));
    const Matrix logits = gen::gaussian(rng, static_cast<int>(c.x.rows()), 2, 3.0);
    CHECK(cross_entropy(logits, c.y) == doctest::Approx(oracle::cross_entropy(logits, c.y)).epsilon(1e-12));
  }
}

TEST_CASE("analytic gradients match central differences") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const auto c = random_case(rng, true);
    const double tau = gen::uniform(rng, 0.1, 1.0);
    {
      const auto g = alignment_loss_with_grad(c.x, c.y, 2.0);
      const Matrix n = oracle::numeric_grad([&](const Matrix& m) { return alignment_loss(m, c.y, 2.0); }, c.x);
      CHECK(oracle::relative_error(g.grad, n) < 1e-6);
    }
    {
      const auto g = uniformity_loss_with_grad(c.x, 2.0);
      const Matrix n = oracle::numeric_grad([&](const Matrix& m) { return uniformity_loss(m, 2.0); }, c.x);
      CHECK(oracle::relative_error(g.grad, n) < 1e-6);
    }
    {
      const auto g = supcon_loss_with_grad(c.x, c.y, tau);
      const Matrix n = oracle::numeric_grad([&](const Matrix& m) { return supcon_loss(m, c.y, tau); }, c.x);
      CHECK(oracle::relative_error(g.grad, n) < 1e-5);
    }
    {
      const Matrix logits = gen::gaussian(rng, static_cast<int>(c.x.rows()), 2);
      const auto g = cross_entropy_with_grad(logits, c.y);
      const Matrix n = oracle::numeric_grad([&](const Matrix& m) { return cross_entropy(m, c.y); }, logits);
      CHECK(oracle::relative_error(g.grad, n) < 1e-6);
    }
  }
}

TEST_CASE("alignment is zero for collapsed classes and uniformity is minimal when spread") {
  Matrix x(4, 2);
  x << 1, 0, 1, 0, -1, 0, -1, 0;
  CHECK(alignment_loss(x, std::vector<int>{0, 0, 1, 1}, 2.0) == 0.0);
  Matrix spread(4, 2);
  spread << 1, 0, 0, 1, -1, 0, 0, -1;
  CHECK(uniformity_loss(spread, 2.0) < uniformity_loss(x, 2.0));
}

TEST_CASE("undefined terms") {
  Matrix x(2, 3);
  x.setRandom();
  const std::vector<int> mixed{0, 1};
  CHECK_THROWS_AS(alignment_loss(x, mixed, 2.0), UndefinedTermError);
  CHECK_THROWS_AS(supcon_loss(x, mixed, 0.1), UndefinedTermError);
  CHECK_THROWS_AS(uniformity_loss(x.topRows(1), 2.0), UndefinedTermError);
  CHECK_THROWS_AS(cross_entropy(Matrix(0, 2), std::vector<int>{}), InputError);
  CHECK_THROWS_AS(cross_entropy(Matrix::Zero(2, 2), std::vector<int>{0, 2}), InputError);
  CHECK_THROWS_AS(cross_entropy(Matrix::Zero(2, 2), std::vector<int>{0}), ShapeError);
}

TEST_CASE("composite weights terms and skips undefined ones") {
  std::mt19937_64 rng(3);
  const Matrix x = gen::unit_rows(rng, 2, 4);
  const Matrix logits = gen::gaussian(rng, 2, 2);
  const std::vector<int> y{0, 1};
  LossWeights w;
  w.alignment = 0.1;
  w.uniformity = 0.1;
  const auto b = composite(logits, x, y, w);
  CHECK(b.skipped == std::vector<std::string>{"alignment"});
  CHECK(b.per_term.count("alignment") == 0);
  CHECK(b.total == doctest::Approx(oracle::cross_entropy(logits, y) + 0.1 * oracle::uniformity(x, 2.0)));

  LossWeights only_align;
  only_align.ce = 0.0;
  only_align.alignment = 1.0;
  CHECK_THROWS_AS(composite(logits, x, y, only_align), UndefinedTermError);

  LossWeights bad;
  bad.ce = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  LossWeights none;
  none.ce = 0.0;
  CHECK_THROWS_AS(none.validate(), ConfigError);
}

TEST_CASE("zero-weight terms are not evaluated") {
  // A single row makes uniformity undefined; with weight zero it is not even tried.
  const Matrix x = Matrix::Identity(1, 3);
  const auto b = composite(Matrix::Zero(1, 2), x, std::vector<int>{1}, LossWeights{});
  CHECK(b.skipped.empty());
  CHECK(b.per_term.size() == 1);
  CHECK(b.total == doctest::Approx(std::log(2.0)));
}

TEST_CASE("composite graph node gradients") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = gen::uniform_int(rng, 3, 10);
    const Matrix x0 = gen::unit_rows(rng, n, 5);
    const Matrix l0 = gen::gaussian(rng, n, 2);
    const auto y = gen::labels(rng, n);
    LossWeights w;
    w.alignment = 0.3;
    w.uniformity = 0.2;
    w.supcon = 0.5;
    ag::Var x = ag::leaf(x0, true), l = ag::leaf(l0, true);
    LossBreakdown bd;
    ag::backward(composite_loss(l, x, y, w, &bd));
    CHECK(bd.total == doctest::Approx(composite(l0, x0, y, w).total).epsilon(1e-14));
    const Matrix nx = oracle::numeric_grad([&](const Matrix& m) { return composite(l0, m, y, w).total; }, x0);
    const Matrix nl = oracle::numeric_grad([&](const Matrix& m) { return composite(m, x0, y, w).total; }, l0);
    CHECK(oracle::relative_error(x.grad(), nx) < 1e-5);
    CHECK(oracle::relative_error(l.grad(), nl) < 1e-6);
  }
}
