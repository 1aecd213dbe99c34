#include <cmath>
#include <cstring>

#include "doctest.h"

#include "cts/common/error.hpp"
#include "cts/nn/adam.hpp"
#include "cts/nn/checkpoint.hpp"
#include "cts/nn/gradcheck.hpp"
#include "cts/nn/loss.hpp"
#include "cts/nn/mlp.hpp"

using namespace cts;
using namespace cts::nn;

namespace {

double squared_loss(const Mat<double>& y, const Mat<double>& target) { return (y - target).squaredNorm(); }

}  // namespace

TEST_CASE("forward basics") {
  Mlp<double> zero({3, 4, 2}, true, false, 0.0);
  Mat<double> x = Mat<double>::Random(3, 5);
  CHECK(zero.forward(x, false, nullptr, nullptr).isZero());

  Mlp<double> id({1, 1}, true, true, 0.0);
  id.layers()[0].weight(0, 0) = 1.0;
  Mat<double> one = Mat<double>::Ones(1, 1);
  CHECK(id.forward(one, false, nullptr, nullptr)(0, 0) == doctest::Approx(1.0507009873554805).epsilon(1e-12));
  CHECK(id.forward(-one, false, nullptr, nullptr)(0, 0) ==
        doctest::Approx(kSeluLambda * kSeluAlpha * (std::exp(-1.0) - 1.0)));

  Rng rng(1);
  Mlp<float> net({6, 8, 8, 3}, true, false, 0.25);
  net.init(rng);
  Mat<float> xf = Mat<float>::Random(6, 4);
  CHECK(net.forward(xf, false, &rng, nullptr) == net.forward(xf, false, &rng, nullptr));
  CHECK_THROWS_AS(net.forward(Mat<float>::Zero(5, 1), false, nullptr, nullptr), DimensionMismatch);
}

TEST_CASE("gradients match central differences") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed);
    const std::size_t in = 1 + rng.index(8), h1 = 1 + rng.index(8), h2 = 1 + rng.index(8), out = 1 + rng.index(8);
    const double dropout = seed % 2 ? 0.25 : 0.0;
    Mlp<double> net({in, h1, h2, out}, true, seed % 3 == 0, dropout);
    net.init(rng);
    // Non-zero biases keep dropped-out inputs off the SELU kink at 0.
    for (auto& l : net.layers())
      for (Eigen::Index k = 0; k < l.bias.size(); ++k) l.bias.data()[k] = rng.normal(0.0, 0.5);
    Mat<double> x(static_cast<Eigen::Index>(in), 3), t(static_cast<Eigen::Index>(out), 3);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
    for (Eigen::Index k = 0; k < t.size(); ++k) t.data()[k] = rng.normal();

    // Reseeding the dropout stream keeps the mask fixed across evaluations.
    const std::uint64_t mask_seed = seed + 1000;
    Rng mask_rng(mask_seed);
    Mlp<double>::Cache cache;
    const auto y = net.forward(x, true, &mask_rng, &cache);
    net.zero_grad();
    net.backward(cache, 2.0 * (y - t));
    std::vector<Param<double>> params;
    net.collect(params);
    const auto r = gradient_check(params, [&] {
      Rng again(mask_seed);
      return squared_loss(net.forward(x, true, &again, nullptr), t);
    });
    worst = std::max(worst, r.max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("closed-form gradients") {
  Rng rng(5);
  Mlp<double> lin({3, 2}, false, false, 0.0);
  lin.init(rng);
  Mat<double> x = Mat<double>::Random(3, 1), y = Mat<double>::Random(2, 1);
  Mlp<double>::Cache cache;
  const auto out = lin.forward(x, false, nullptr, &cache);
  lin.zero_grad();
  lin.backward(cache, 2.0 * (out - y));
  const Mat<double> analytic = 2.0 * (lin.layers()[0].weight * x + lin.layers()[0].bias - y) * x.transpose();
  CHECK((lin.layers()[0].grad_weight - analytic).norm() < 1e-12);

  // A constant loss has zero gradient everywhere.
  lin.zero_grad();
  lin.backward(cache, Mat<double>::Zero(2, 1));
  CHECK(lin.layers()[0].grad_weight.isZero());
}

TEST_CASE("dropout preserves the expectation") {
  Rng rng(2);
  Mlp<double> net({4, 16, 1}, true, false, 0.25);
  net.init(rng);
  Mat<double> x(4, 1);
  x << 0.5, -0.2, 1.0, 0.3;
  const double eval = net.forward(x, false, nullptr, nullptr)(0, 0);
  double sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += net.forward(x, true, &rng, nullptr)(0, 0);
  CHECK(std::abs(sum / n - eval) <= 0.02 * std::abs(eval));
}

TEST_CASE("adam") {
  SUBCASE("zero gradients leave parameters unchanged") {
    Mat<double> w = Mat<double>::Random(2, 2), g = Mat<double>::Zero(2, 2);
    const Mat<double> before = w;
    Adam<double> opt;
    opt.step({{&w, &g}});
    CHECK(w == before);
  }
  SUBCASE("global norm clipping") {
    Mat<double> w = Mat<double>::Zero(1, 2), g(1, 2);
    g << 6.0, 8.0;  // norm 10
    Adam<double> opt;
    CHECK(opt.step({{&w, &g}}) == doctest::Approx(10.0));
    CHECK(g(0, 0) == doctest::Approx(0.6));
    CHECK(g(0, 1) == doctest::Approx(0.8));
  }
  SUBCASE("one scalar step by hand") {
    Mat<double> w(1, 1), g(1, 1);
    w << 1.0;
    g << 0.5;
    Adam<double> opt({.lr = 0.1, .clip_norm = 0.0});
    opt.step({{&w, &g}});
    // m = 0.05, v = 0.00025; corrected: 0.5 and 0.25.
    const double expected = 1.0 - 0.1 * 0.5 / (std::sqrt(0.25) + 1e-8);
    CHECK(w(0, 0) == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("non-finite gradient") {
    Mat<double> w = Mat<double>::Zero(1, 1), g(1, 1);
    g << NAN;
    Adam<double> opt;
    CHECK_THROWS_AS(opt.step({{&w, &g}}), NonFiniteGradient);
  }
}

TEST_CASE("losses") {
  CHECK(huber(0.5, 0.0) == doctest::Approx(0.125));
  CHECK(huber(3.0, 0.0) == doctest::Approx(2.5));
  CHECK(huber_grad(3.0, 0.0) == 1.0);
  CHECK(bce_with_logits(0.0, 1.0) == doctest::Approx(std::log(2.0)));
  CHECK(bce_with_logits(100.0, 1.0) == doctest::Approx(0.0));
  CHECK(bce_with_logits(-100.0, 1.0) == doctest::Approx(100.0));
  std::vector<double> lp;
  log_softmax({0.0, 0.0}, 0.03, lp);
  CHECK(lp[0] == doctest::Approx(std::log(0.5)));
}

TEST_CASE("checkpoint round trip") {
  Checkpoint c;
  c.meta = R"({"kind":"test"})";
  c.tensors.push_back(Eigen::MatrixXf::Random(3, 2));
  c.tensors.push_back(Eigen::MatrixXf::Random(1, 4));
  Checkpoint::AdamState adam;
  adam.step = 42;
  for (const auto& t : c.tensors) {
    adam.m.push_back(Eigen::MatrixXd::Random(t.rows(), t.cols()));
    adam.v.push_back(Eigen::MatrixXd::Random(t.rows(), t.cols()));
  }
  c.adam = adam;
  const auto bytes = encode_checkpoint(c);
  CHECK(bytes.substr(0, 4) == "CTSN");
  // magic + version + meta_len + meta + count + 2 shapes + floats + flag + step + moments
  CHECK(bytes.size() == 4 + 4 + 4 + c.meta.size() + 4 + 2 * 8 + 10 * 4 + 1 + 8 + 2 * 10 * 8);
  const auto back = decode_checkpoint(bytes);
  CHECK(back.meta == c.meta);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0] == c.tensors[0]);
  CHECK(back.adam->step == 42);
  CHECK(back.adam->v[1] == c.adam->v[1]);
  // First tensor value sits right after the first shape, row-major.
  float first;
  std::memcpy(&first, bytes.data() + 12 + c.meta.size() + 4 + 8, 4);
  CHECK(first == c.tensors[0](0, 0));
  float second;
  std::memcpy(&second, bytes.data() + 12 + c.meta.size() + 4 + 8 + 4, 4);
  CHECK(second == c.tensors[0](0, 1));

  CHECK_THROWS_AS(decode_checkpoint("XXXX"), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), CheckpointError);
}
