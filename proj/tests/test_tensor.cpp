#include "doctest.h"
#include "lyt/ops.hpp"
#include "lyt/tensor.hpp"

using namespace lyt;

TEST_CASE("tensor construction and accessors") {
  Tensor t = Tensor::zeros({2, 3});
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(t.size() == 6);
  CHECK_FALSE(t.needs_grad());

  Tensor u = Tensor::from({1, 2, 3, 4}, {2, 2});
  CHECK(u.data()[3] == 4.0);
  CHECK_THROWS_AS(Tensor::from({1, 2, 3}, {2, 2}), DimensionError);
  CHECK_THROWS_AS(u.item(), DimensionError);
  CHECK(Tensor::scalar(7.5).item() == 7.5);
}

TEST_CASE("backward through a simple chain accumulates correct gradients") {
  // L = sum((x*x) + 3x) over x = (1, -2): dL/dx = 2x + 3 = (5, -1)
  Tensor x = Tensor::from({1.0, -2.0}, {1, 2}, true);
  Tensor loss = sum_all(add(mul(x, x), scale(x, 3.0)));
  CHECK(loss.item() == doctest::Approx(1.0 + 3.0 + 4.0 - 6.0));
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(5.0));
  CHECK(x.grad()[1] == doctest::Approx(-1.0));
}

TEST_CASE("gradients accumulate across backward calls until zero_grad") {
  Tensor x = Tensor::from({2.0}, {1, 1}, true);
  sum_all(mul(x, x)).backward();
  sum_all(mul(x, x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(8.0));  // 2 * (2x)
  x.zero_grad();
  CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("a tensor used twice in one graph receives summed gradient") {
  // L = sum(x*x) where both factors are the same node: dL/dx = 2x
  Tensor x = Tensor::from({3.0}, {1, 1}, true);
  Tensor loss = sum_all(mul(x, x));
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("NoGrad suppresses graph construction") {
  Tensor x = Tensor::from({1.0, 2.0}, {1, 2}, true);
  {
    NoGrad guard;
    Tensor y = mul(x, x);
    CHECK_FALSE(y.needs_grad());
  }
  Tensor y = mul(x, x);
  CHECK(y.needs_grad());
}

TEST_CASE("backward requires a scalar tracked output") {
  Tensor x = Tensor::from({1.0, 2.0}, {1, 2}, true);
  Tensor y = mul(x, x);
  CHECK_THROWS_AS(y.backward(), ContractError);
  Tensor c = Tensor::from({1.0}, {1, 1}, false);
  CHECK_THROWS_AS(c.backward(), ContractError);
}

TEST_CASE("ops on untracked inputs build no tape") {
  Tensor a = Tensor::from({1.0, 2.0}, {1, 2});
  Tensor b = Tensor::from({3.0, 4.0}, {1, 2});
  Tensor c = add(a, b);
  CHECK_FALSE(c.needs_grad());
  CHECK(c.data()[0] == 4.0);
  CHECK(c.data()[1] == 6.0);
}
