#include <doctest.h>

#include <algorithm>
#include <array>

#include "support.hpp"
#include "treegcn/error.hpp"

using namespace treegcn;
using testing::away_from_zero;
using testing::random_tensor;

namespace {

template <class F>
ErrorKind error_kind(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kContract;
}

std::vector<double> values(const Tensor& t) { return {t.data().begin(), t.data().end()}; }

}  // namespace

TEST_CASE("matmul hand examples") {
  Tape tape;
  const Tensor eye = Tensor::matrix(2, 2, {1, 0, 0, 1});
  const Tensor m = Tensor::matrix(2, 2, {1, 2, 3, 4});
  CHECK(values(matmul(tape, eye, m)) == std::vector<double>{1, 2, 3, 4});
  const Tensor out = matmul(tape, Tensor::matrix(1, 2, {1, 2}), Tensor::matrix(2, 1, {3, 4}));
  CHECK(out.shape() == Shape{1, 1});
  CHECK(out.item() == 11.0);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tape tape;
  try {
    matmul(tape, Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("leaky_relu definition") {
  Tape tape;
  const Tensor out = leaky_relu(tape, Tensor({3}, {-1, 0, 2}), 0.2);
  CHECK(out.data()[0] == doctest::Approx(-0.2).epsilon(1e-15));
  CHECK(out.data()[1] == 0.0);
  CHECK(out.data()[2] == 2.0);
  const Tensor pos({4}, {0, 1, 2.5, 7});
  CHECK(values(leaky_relu(tape, pos, 0.2)) == values(pos));
  CHECK(error_kind([&] { leaky_relu(tape, pos, 1.5); }) == ErrorKind::kContract);
}

TEST_CASE("group_max hand examples and errors") {
  Tape tape;
  const Tensor x = Tensor::matrix(2, 2, {1, 5, 3, 2});
  CHECK(values(group_max(tape, x, 2)) == std::vector<double>{3, 5});
  CHECK(values(group_max(tape, x, 1)) == values(x));
  CHECK(error_kind([&] { group_max(tape, Tensor::zeros({3, 2}), 2); }) == ErrorKind::kShape);
}

TEST_CASE("group_max tie routes gradient to the lowest row") {
  Tape tape;
  Tensor x = Tensor::matrix(3, 1, {2, 2, 1}, true);
  tape.backward(reduce_sum(tape, group_max(tape, x, 3)));
  CHECK(std::vector<double>(x.grad().begin(), x.grad().end()) == std::vector<double>{1, 0, 0});
}

TEST_CASE("group_max is invariant to every permutation inside a block") {
  Rng rng(11);
  for (std::size_t block : {2u, 3u, 4u}) {
    const Tensor x = random_tensor(rng, {block * 2, 3}, false);
    Tape tape;
    const auto reference = values(group_max(tape, x, block));
    std::vector<std::size_t> perm(block);
    for (std::size_t i = 0; i < block; ++i) perm[i] = i;
    do {
      std::vector<double> permuted(x.data().begin(), x.data().end());
      for (std::size_t r = 0; r < block; ++r) {
        for (std::size_t c = 0; c < 3; ++c) permuted[r * 3 + c] = x.data()[perm[r] * 3 + c];
      }
      CHECK(values(group_max(tape, Tensor({block * 2, 3}, permuted), block)) == reference);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("pairwise_sqdist examples") {
  Tape tape;
  CHECK(pairwise_sqdist(tape, Tensor::matrix(1, 3, {0, 0, 0}), Tensor::matrix(1, 3, {1, 0, 0})).item() == 1.0);
  Rng rng(3);
  const Tensor x = random_tensor(rng, {5, 3}, false);
  const Tensor d = pairwise_sqdist(tape, x, x);
  for (std::size_t i = 0; i < 5; ++i) CHECK(d.at(i, i) == 0.0);
  CHECK(error_kind([&] { pairwise_sqdist(tape, Tensor::zeros({2, 2}), Tensor::zeros({2, 3})); }) == ErrorKind::kShape);
}

TEST_CASE("reduce_sum gradient is all ones") {
  Tape tape;
  Rng rng(4);
  Tensor x = random_tensor(rng, {3, 4});
  tape.backward(reduce_sum(tape, x));
  for (double g : x.grad()) CHECK(g == 1.0);
}

TEST_CASE("shape errors on structural ops") {
  Tape tape;
  CHECK(error_kind([&] { add(tape, Tensor::zeros({2, 2}), Tensor::zeros({2, 3})); }) == ErrorKind::kShape);
  CHECK(error_kind([&] { mul(tape, Tensor::zeros({2, 2}), Tensor::zeros({4})); }) == ErrorKind::kShape);
  CHECK(error_kind([&] { reshape(tape, Tensor::zeros({2, 2}), {3}); }) == ErrorKind::kShape);
  CHECK(error_kind([&] { concat_rows(tape, {Tensor::zeros({2, 2}), Tensor::zeros({1, 3})}); }) == ErrorKind::kShape);
  CHECK(error_kind([&] { concat_cols(tape, {Tensor::zeros({2, 2}), Tensor::zeros({3, 2})}); }) == ErrorKind::kShape);
  CHECK(error_kind([&] { add_row_bias(tape, Tensor::zeros({2, 2}), Tensor::zeros({3})); }) == ErrorKind::kShape);
  CHECK(error_kind([&] { Tensor({0, 2}, {}); }) == ErrorKind::kShape);
}

TEST_CASE("backward contract") {
  Rng rng(5);
  Tensor x = random_tensor(rng, {4});
  {
    Tape tape;
    tape.backward(reduce_sum(tape, x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  {
    Tape tape;
    const Tensor loss = reduce_sum(tape, x);
    tape.backward(loss);
    CHECK(error_kind([&] { tape.backward(loss); }) == ErrorKind::kContract);
  }
  {
    Tape tape;
    const Tensor y = scale(tape, x, 2.0);
    CHECK(error_kind([&] { tape.backward(y); }) == ErrorKind::kContract);
  }
}

TEST_CASE("inference tape records nothing") {
  Rng rng(6);
  Tensor x = random_tensor(rng, {2, 2});
  Tape tape = Tape::inference();
  const Tensor y = matmul(tape, x, x);
  CHECK(tape.size() == 0);
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite_diff_check examples") {
  Rng rng(7);
  const Tensor x = random_tensor(rng, {3, 3});
  const double quad = finite_diff_check([](Tape& t, const Tensor& v) { return reduce_sum(t, mul(t, v, v)); }, x, 1e-5);
  CHECK(quad <= 1e-6);
  const Tensor w = random_tensor(rng, {3, 2}, false);
  const double linear =
      finite_diff_check([&](Tape& t, const Tensor& v) { return reduce_sum(t, matmul(t, v, w)); }, x, 1e-5);
  CHECK(linear <= 1e-8);
  CHECK(error_kind([&] {
          finite_diff_check([](Tape& t, const Tensor& v) { return reduce_sum(t, v); }, x, 0.0);
        }) == ErrorKind::kContract);
  const Tensor huge({1}, {1e308});
  CHECK(error_kind([&] {
          finite_diff_check([](Tape& t, const Tensor& v) { return reduce_sum(t, mul(t, v, v)); }, huge, 1e-5);
        }) == ErrorKind::kNumeric);
}

// Every differentiable op against central differences on 10 seeds.
TEST_CASE("finite differences for every op") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CAPTURE(seed);
    Rng rng(100 + seed);
    const double tol = 1e-4, h = 1e-5;
    Tensor a = random_tensor(rng, {3, 4}), b = random_tensor(rng, {4, 2});
    std::vector<Tensor> ab{a, b};
    CHECK(finite_diff_check([&](Tape& t) { return reduce_sum(t, mul(t, matmul(t, a, b), matmul(t, a, b))); }, ab, h) <= tol);

    Tensor c = random_tensor(rng, {3, 4});
    std::vector<Tensor> ac{a, c};
    CHECK(finite_diff_check([&](Tape& t) { return reduce_sum(t, mul(t, add(t, a, c), c)); }, ac, h) <= tol);

    Tensor bias = random_tensor(rng, {4});
    std::vector<Tensor> abias{a, bias};
    CHECK(finite_diff_check([&](Tape& t) {
            const Tensor y = add_row_bias(t, a, bias);
            return reduce_sum(t, mul(t, y, y));
          }, abias, h) <= tol);

    CHECK(finite_diff_check([](Tape& t, const Tensor& v) { return reduce_sum(t, mul(t, scale(t, v, -1.7), v)); }, a,
                            h) <= tol);

    const Tensor kinkless = away_from_zero(rng, {4, 3});
    CHECK(finite_diff_check([](Tape& t, const Tensor& v) {
            const Tensor y = leaky_relu(t, v, 0.2);
            return reduce_sum(t, mul(t, y, y));
          }, kinkless, h) <= tol);

    // Distinct values spaced well beyond the step keep every block maximum unique.
    std::vector<double> spaced(12);
    for (std::size_t i = 0; i < spaced.size(); ++i) spaced[i] = 0.1 * static_cast<double>(i) - 0.5;
    rng.shuffle(spaced);
    const Tensor unique_max({6, 2}, spaced, true);
    CHECK(finite_diff_check([](Tape& t, const Tensor& v) {
            const Tensor y = group_max(t, v, 3);
            return reduce_sum(t, mul(t, y, y));
          }, unique_max, h) <= tol);

    Tensor r1 = random_tensor(rng, {2, 3}), r2 = random_tensor(rng, {3, 3});
    std::vector<Tensor> rows{r1, r2};
    CHECK(finite_diff_check([&](Tape& t) {
            const Tensor y = concat_rows(t, {r1, r2, r1});
            return reduce_sum(t, mul(t, y, y));
          }, rows, h) <= tol);

    Tensor c1 = random_tensor(rng, {3, 2}), c2 = random_tensor(rng, {3, 1});
    std::vector<Tensor> cols{c1, c2};
    CHECK(finite_diff_check([&](Tape& t) {
            const Tensor y = concat_cols(t, {c2, c1, c2});
            return reduce_sum(t, mul(t, y, y));
          }, cols, h) <= tol);

    CHECK(finite_diff_check([](Tape& t, const Tensor& v) {
            const Tensor y = repeat_rows(t, v, 3);
            return reduce_sum(t, mul(t, y, y));
          }, r1, h) <= tol);

    CHECK(finite_diff_check([](Tape& t, const Tensor& v) {
            const Tensor y = reshape(t, v, {2, 6});
            return reduce_sum(t, mul(t, y, y));
          }, a, h) <= tol);

    Tensor p = random_tensor(rng, {4, 3}), q = random_tensor(rng, {5, 3});
    std::vector<Tensor> pq{p, q};
    CHECK(finite_diff_check([&](Tape& t) {
            const Tensor d = pairwise_sqdist(t, p, q);
            return reduce_sum(t, mul(t, d, d));
          }, pq, h) <= tol);

    Tensor x = random_tensor(rng, {3, 4}), w = random_tensor(rng, {4, 5});
    std::vector<Tensor> xw{x, w};
    CHECK(finite_diff_check([&](Tape& t) { return reduce_sum(t, leaky_relu(t, matmul(t, x, w), 0.2)); }, xw, h) <= tol);
  }
}

TEST_CASE("gradients are linear in the loss") {
  Rng rng(21);
  Tensor x = random_tensor(rng, {3, 3}), w = random_tensor(rng, {3, 3});
  auto l1 = [&](Tape& t) { return reduce_sum(t, leaky_relu(t, matmul(t, x, w), 0.2)); };
  auto l2 = [&](Tape& t) { return reduce_sum(t, mul(t, x, x)); };
  auto grads_of = [&](auto&& loss) {
    x.zero_grad();
    Tape t;
    t.backward(loss(t));
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  const auto g1 = grads_of(l1), g2 = grads_of(l2);
  const auto both = grads_of([&](Tape& t) { return add(t, l1(t), l2(t)); });
  for (std::size_t i = 0; i < both.size(); ++i) CHECK(both[i] == doctest::Approx(g1[i] + g2[i]).epsilon(1e-14));
}

TEST_CASE("forward evaluation is bit-identical across runs") {
  Rng rng(22);
  const Tensor x = random_tensor(rng, {8, 3}, false), w = random_tensor(rng, {3, 16}, false);
  auto run = [&] {
    Tape t = Tape::inference();
    return values(group_max(t, leaky_relu(t, matmul(t, x, w), 0.2), 4));
  };
  CHECK(run() == run());
}
