#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mprl/error.hpp"
#include "mprl/grad_check.hpp"
#include "mprl/rng.hpp"
#include "mprl/tape.hpp"
#include "mprl/tensor.hpp"

using namespace mprl;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = scale * rng.gauss();
  return t;
}

}  // namespace

TEST_CASE("matmul: identity and hand-computed products") {
  Tape tape;
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
  Tensor out = tape.matmul(eye, b);
  CHECK(out.values()[0] == 3.0);
  CHECK(out.values()[1] == 4.0);
  CHECK(out.values()[2] == 5.0);
  CHECK(out.values()[3] == 6.0);

  Tensor row = Tensor::from({1, 2}, {1, 2});
  Tensor col = Tensor::from({2, 1}, {3, 4});
  CHECK(tape.matmul(row, col).item() == doctest::Approx(11.0));
}

TEST_CASE("matmul: shape mismatch raises a dimension error") {
  Tape tape;
  Tensor a({2, 3});
  Tensor b({2, 2});
  CHECK_THROWS_AS(tape.matmul(a, b), Error);
  try {
    tape.matmul(a, b);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Dimension);
  }
}

TEST_CASE("matmul: gradients match finite differences on a random 3x4 * 4x2 case") {
  Rng rng(42);
  Tensor a = random_tensor({3, 4}, rng);
  Tensor b = random_tensor({4, 2}, rng);

  double err_a = grad_check(
      [&](Tape& t, Tensor& x) { return t.sum(t.mul(t.matmul(x, b), t.matmul(x, b))); }, a);
  CHECK(err_a < 1e-6);

  double err_b = grad_check(
      [&](Tape& t, Tensor& x) { return t.sum(t.mul(t.matmul(a, x), t.matmul(a, x))); }, b);
  CHECK(err_b < 1e-6);
}

TEST_CASE("matmul_transb gradients") {
  Rng rng(7);
  Tensor a = random_tensor({3, 5}, rng);
  Tensor b = random_tensor({4, 5}, rng);
  double err = grad_check(
      [&](Tape& t, Tensor& x) {
        Tensor p = t.matmul_transb(x, b);
        return t.sum(t.mul(p, p));
      },
      a);
  CHECK(err < 1e-6);
}

TEST_CASE("softmax_rows: uniform logits, stability, normalization") {
  Tape tape;
  Tensor zeros({1, 5});
  Tensor out = tape.softmax_rows(zeros);
  for (double v : out.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));

  Tensor spike = Tensor::from({1, 2}, {1000.0, 0.0});
  Tensor s = tape.softmax_rows(spike);
  CHECK(s.values()[0] == doctest::Approx(1.0));
  CHECK(s.values()[1] == doctest::Approx(0.0));
  CHECK(std::isfinite(s.values()[0]));

  Rng rng(3);
  Tensor x = random_tensor({4, 7}, rng, 2.0);
  Tensor y = tape.softmax_rows(x);
  for (int i = 0; i < 4; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < 7; ++j) {
      double v = y.values()[static_cast<size_t>(i * 7 + j)];
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      row_sum += v;
    }
    CHECK(std::abs(row_sum - 1.0) < 1e-9);
  }
}

TEST_CASE("softmax_rows backward matches finite differences") {
  Rng rng(11);
  Tensor x = random_tensor({3, 6}, rng);
  Tensor weights = random_tensor({3, 6}, rng);
  double err = grad_check(
      [&](Tape& t, Tensor& in) { return t.sum(t.mul(t.softmax_rows(in), weights)); }, x);
  CHECK(err < 1e-6);
}

TEST_CASE("causal softmax: zero above the diagonal, rows sum to one, gradients") {
  Rng rng(13);
  Tensor scores = random_tensor({5, 5}, rng);
  Tape tape;
  Tensor probs = tape.causal_softmax_rows(scores);
  for (int i = 0; i < 5; ++i) {
    double row_sum = 0.0;
    for (int j = 0; j < 5; ++j) {
      double v = probs.values()[static_cast<size_t>(i * 5 + j)];
      if (j > i) CHECK(v == 0.0);
      row_sum += v;
    }
    CHECK(row_sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  Tensor weights = random_tensor({5, 5}, rng);
  double err = grad_check(
      [&](Tape& t, Tensor& in) { return t.sum(t.mul(t.causal_softmax_rows(in), weights)); },
      scores);
  CHECK(err < 1e-6);
}

TEST_CASE("cross_entropy: uniform logits give ln(c); full mask gives zero") {
  Tape tape;
  Tensor logits({3, 5});
  std::vector<int> targets{1, 2, 3};
  std::vector<uint8_t> one_on{0, 1, 0};
  CHECK(tape.cross_entropy(logits, targets, one_on).item() ==
        doctest::Approx(std::log(5.0)).epsilon(1e-12));

  std::vector<uint8_t> all_off{0, 0, 0};
  CHECK(tape.cross_entropy(logits, targets, all_off).item() == 0.0);
}

TEST_CASE("cross_entropy: out-of-range target raises an index error") {
  Tape tape;
  Tensor logits({2, 4});
  std::vector<int> targets{1, 9};
  try {
    tape.cross_entropy(logits, targets);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Index);
  }
}

TEST_CASE("cross_entropy gradient matches finite differences on a random 4x10 case") {
  Rng rng(17);
  Tensor logits = random_tensor({4, 10}, rng, 1.5);
  std::vector<int> targets{3, 0, 9, 5};
  std::vector<uint8_t> mask{1, 1, 0, 1};
  double err = grad_check(
      [&](Tape& t, Tensor& x) { return t.cross_entropy(x, targets, mask); }, logits);
  CHECK(err < 1e-5);
}

TEST_CASE("backward: sum gives all-ones gradient; repeated calls accumulate") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  Tape tape;
  Tensor root = tape.sum(x);
  x.ensure_grad();
  x.zero_grad();
  tape.backward(root);
  for (double g : x.grad()) CHECK(g == 1.0);
  tape.backward(root);
  for (double g : x.grad()) CHECK(g == 2.0);
}

TEST_CASE("backward: non-scalar root is a contract error") {
  Tensor x = Tensor::from({2}, {1, 2});
  Tape tape;
  Tensor y = tape.scale(x, 2.0);
  try {
    tape.backward(y);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Contract);
  }
}

TEST_CASE("backward through a matmul chain matches finite differences") {
  Rng rng(23);
  Tensor a = random_tensor({2, 3}, rng);
  Tensor b = random_tensor({3, 4}, rng);
  Tensor c = random_tensor({4, 2}, rng);
  double err = grad_check(
      [&](Tape& t, Tensor& x) { return t.sum(t.matmul(t.matmul(a, x), c)); }, b);
  CHECK(err < 1e-6);
}

TEST_CASE("shared subexpressions accumulate: x+x equals 2x in gradient") {
  Tensor x1 = Tensor::from({4}, {1, -2, 3, 0.5});
  Tensor x2 = Tensor::from({4}, {1, -2, 3, 0.5});

  Tape t1;
  Tensor r1 = t1.sum(t1.add(x1, x1));  // x used twice
  x1.ensure_grad();
  x1.zero_grad();
  t1.backward(r1);

  Tape t2;
  Tensor r2 = t2.sum(t2.scale(x2, 2.0));  // single node
  x2.ensure_grad();
  x2.zero_grad();
  t2.backward(r2);

  CHECK(r1.item() == r2.item());
  for (int i = 0; i < 4; ++i)
    CHECK(x1.grad()[static_cast<size_t>(i)] == x2.grad()[static_cast<size_t>(i)]);
}

TEST_CASE("mul(x, x) gradient is 2x") {
  Tensor x = Tensor::from({3}, {1.0, -2.0, 0.25});
  Tape tape;
  Tensor root = tape.sum(tape.mul(x, x));
  x.ensure_grad();
  x.zero_grad();
  tape.backward(root);
  for (int i = 0; i < 3; ++i)
    CHECK(x.grad()[static_cast<size_t>(i)] ==
          doctest::Approx(2.0 * x.values()[static_cast<size_t>(i)]).epsilon(1e-12));
}

TEST_CASE("grad_check: sum of squares, cross entropy, constants") {
  Tensor x = Tensor::from({3}, {1, 2, 3});
  double err = grad_check([](Tape& t, Tensor& in) { return t.sum(t.mul(in, in)); }, x);
  CHECK(err < 1e-7);

  Rng rng(29);
  Tensor logits = random_tensor({3, 8}, rng);
  std::vector<int> targets{1, 4, 7};
  double ce_err = grad_check(
      [&](Tape& t, Tensor& in) { return t.cross_entropy(in, targets); }, logits);
  CHECK(ce_err < 1e-5);

  Tensor y = Tensor::from({4}, {1, 2, 3, 4});
  double const_err =
      grad_check([](Tape& t, Tensor&) { return t.sum(Tensor::from({1}, {5.0})); }, y);
  CHECK(const_err == 0.0);
}

TEST_CASE("remaining primitives pass grad_check at model-like shapes") {
  Rng rng(31);

  SUBCASE("elementwise add / mul / scale") {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor other = random_tensor({4, 6}, rng);
    CHECK(grad_check([&](Tape& t, Tensor& in) { return t.sum(t.mul(t.add(in, other), other)); },
                     x) < 1e-4);
    CHECK(grad_check([&](Tape& t, Tensor& in) { return t.sum(t.scale(in, -1.7)); }, x) < 1e-4);
  }

  SUBCASE("add_rowwise bias broadcast") {
    Tensor x = random_tensor({5, 4}, rng);
    Tensor bias = random_tensor({4}, rng);
    Tensor weights = random_tensor({5, 4}, rng);
    CHECK(grad_check(
              [&](Tape& t, Tensor& in) { return t.sum(t.mul(t.add_rowwise(x, in), weights)); },
              bias) < 1e-4);
  }

  SUBCASE("layer norm: input, gain, and bias") {
    Tensor x = random_tensor({3, 8}, rng);
    Tensor gain = random_tensor({8}, rng, 0.5);
    for (double& g : gain.values()) g += 1.0;
    Tensor bias = random_tensor({8}, rng, 0.1);
    Tensor weights = random_tensor({3, 8}, rng);
    auto f_of = [&](Tensor& gn) {
      return [&, gn](Tape& t, Tensor& in) mutable {
        return t.sum(t.mul(t.layer_norm(in, gain, bias), weights));
      };
    };
    CHECK(grad_check(f_of(gain), x) < 1e-4);
    CHECK(grad_check(
              [&](Tape& t, Tensor& g) { return t.sum(t.mul(t.layer_norm(x, g, bias), weights)); },
              gain) < 1e-4);
    CHECK(grad_check(
              [&](Tape& t, Tensor& b) { return t.sum(t.mul(t.layer_norm(x, gain, b), weights)); },
              bias) < 1e-4);
  }

  SUBCASE("gelu") {
    Tensor x = random_tensor({4, 4}, rng, 2.0);
    Tensor weights = random_tensor({4, 4}, rng);
    CHECK(grad_check([&](Tape& t, Tensor& in) { return t.sum(t.mul(t.gelu(in), weights)); }, x) <
          1e-4);
  }

  SUBCASE("embedding lookup") {
    Tensor table = random_tensor({6, 3}, rng);
    std::vector<int> ids{0, 5, 2, 5};  // repeated id exercises scatter-add
    Tensor weights = random_tensor({4, 3}, rng);
    CHECK(grad_check(
              [&](Tape& t, Tensor& tb) { return t.sum(t.mul(t.embedding(tb, ids), weights)); },
              table) < 1e-4);
  }

  SUBCASE("slice and concat") {
    Tensor x = random_tensor({4, 6}, rng);
    CHECK(grad_check(
              [&](Tape& t, Tensor& in) {
                Tensor left = t.slice_cols(in, 0, 3);
                Tensor right = t.slice_cols(in, 3, 6);
                Tensor joined = t.concat_cols({right, left});
                return t.sum(t.mul(joined, joined));
              },
              x) < 1e-4);
    CHECK(grad_check(
              [&](Tape& t, Tensor& in) {
                Tensor rows = t.slice_rows(in, 1, 3);
                return t.sum(t.mul(rows, rows));
              },
              x) < 1e-4);
  }

  SUBCASE("gather_logprobs, weighted_sum, hinge, mse_rows") {
    Tensor logits = random_tensor({5, 7}, rng);
    std::vector<int> rows{0, 2, 2, 4};
    std::vector<int> classes{1, 6, 0, 3};
    std::vector<double> weights{0.5, -1.25, 2.0, 0.75};
    CHECK(grad_check(
              [&](Tape& t, Tensor& in) {
                return t.weighted_sum(t.gather_logprobs(in, rows, classes), weights);
              },
              logits) < 1e-4);

    Tensor pos = Tensor::from({1}, {0.8});
    Tensor neg = Tensor::from({1}, {-0.8});
    CHECK(grad_check([&](Tape& t, Tensor& s) { return t.hinge(t.scale(s, 1.0)); }, pos) < 1e-8);
    Tape tape;
    Tensor clamped = tape.hinge(neg);
    CHECK(clamped.item() == 0.0);
    neg.ensure_grad();
    neg.zero_grad();
    tape.backward(clamped);
    CHECK(neg.grad()[0] == 0.0);

    Tensor pred = random_tensor({6, 1}, rng);
    std::vector<int> sel{1, 3, 5};
    std::vector<double> targets{0.0, 1.0, 0.5};
    CHECK(grad_check([&](Tape& t, Tensor& in) { return t.mse_rows(in, sel, targets); }, pred) <
          1e-4);
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), Error);
  Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK_FALSE(t.has_grad());
  t.ensure_grad();
  CHECK(t.grad().size() == 6);
}

TEST_CASE("rng: determinism and uniformity basics") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng c(5);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) mean += c.uniform01();
  mean /= n;
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));

  Rng d(9);
  for (int i = 0; i < 1000; ++i) {
    uint64_t v = d.below(7);
    CHECK(v < 7);
  }
}
