#include <catch2/catch_amalgamated.hpp>

#include "series2vec/loss.hpp"
#include "series2vec/rng.hpp"

#include "helpers.hpp"

using namespace s2v;

TEST_CASE("smooth-L1 piecewise values are exact", "[loss]") {
  REQUIRE(smooth_l1(0.0) == 0.0);
  REQUIRE(smooth_l1(0.5) == 0.125);
  REQUIRE(smooth_l1(-0.5) == 0.125);
  REQUIRE(smooth_l1(1.0) == 0.5);  // both branches meet here
  REQUIRE(smooth_l1(-1.0) == 0.5);
  REQUIRE(smooth_l1(2.0) == 1.5);
  REQUIRE(smooth_l1(-2.0) == 1.5);
  REQUIRE(smooth_l1(3.0) == 2.5);
  REQUIRE(smooth_l1(-3.0) == 2.5);
  REQUIRE_THROWS_AS(smooth_l1(std::numeric_limits<double>::quiet_NaN()),
                    std::invalid_argument);
}

TEST_CASE("smooth-L1 derivative is continuous at the crossover", "[loss]") {
  const double h = 1e-6;
  for (double x0 : {1.0, -1.0}) {
    const double num = (smooth_l1(x0 + h) - smooth_l1(x0 - h)) / (2.0 * h);
    REQUIRE(num == Catch::Approx(x0 > 0 ? 1.0 : -1.0).margin(1e-6));
  }
  REQUIRE(smooth_l1_grad(0.5) == 0.5);
  REQUIRE(smooth_l1_grad(-0.25) == -0.25);
  REQUIRE(smooth_l1_grad(2.0) == 1.0);
  REQUIRE(smooth_l1_grad(-4.0) == -1.0);
  // the two branch derivatives approach each other at |x| = 1
  REQUIRE(std::abs(smooth_l1_grad(1.0 - 1e-9) - smooth_l1_grad(1.0 + 1e-9)) < 1e-8);
}

TEST_CASE("representation similarity is the dot product", "[loss]") {
  NdArray a = NdArray::row({1.0, 2.0, 3.0});
  NdArray b = NdArray::row({0.5, -1.0, 2.0});
  REQUIRE(representation_similarity(a, b) == Catch::Approx(4.5).epsilon(1e-15));
}

TEST_CASE("sim_loss matches a hand computation", "[loss]") {
  Tape t;
  NdArray Z({3, 2});
  Z.at(0, 0) = 1.0; Z.at(0, 1) = 0.0;
  Z.at(1, 0) = 0.0; Z.at(1, 1) = 2.0;
  Z.at(2, 0) = 1.0; Z.at(2, 1) = 1.0;
  NdArray y({3, 3});
  y.at(0, 1) = y.at(1, 0) = 0.5;
  y.at(0, 2) = y.at(2, 0) = 1.0;
  y.at(1, 2) = y.at(2, 1) = 0.25;
  Var loss = sim_loss(t.param(Z), y);
  // residuals: (0 - 0.5), (1 - 1), (2 - 0.25) -> smooth-L1: 0.125, 0, 1.25
  const double want = (0.125 + 0.0 + 1.25) / 3.0;
  REQUIRE(loss.value().scalar_value() == Catch::Approx(want).epsilon(1e-14));
}

TEST_CASE("sim_loss gradients match finite differences", "[loss]") {
  Rng rng(51);
  const NdArray Z = test::random_array({4, 5}, rng);
  NdArray y({4, 4});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j)
      y.at(i, j) = y.at(j, i) = rng.uniform(0.0, 1.0);

  Tape tape;
  Var z = tape.param(Z);
  tape.backward(sim_loss(z, y));
  const auto m = test::fd_check(
      [&](const std::vector<NdArray>& in) {
        Tape t;
        return sim_loss(t.param(in[0]), y).value().scalar_value();
      },
      {Z}, {z.grad()});
  INFO("element " << m.element << ": analytic " << m.analytic << " vs numeric "
                  << m.numeric);
  REQUIRE(m.ok);
}

TEST_CASE("sim_loss validates batch and target shapes", "[loss]") {
  Tape t;
  REQUIRE_THROWS_AS(sim_loss(t.param(NdArray({1, 4})), NdArray({1, 1})),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(sim_loss(t.param(NdArray({3, 4})), NdArray({2, 2})),
                    std::invalid_argument);
}

TEST_CASE("total loss is the plain sum of the branch losses", "[loss]") {
  Rng rng(52);
  Tape t;
  NdArray Zt = test::random_array({3, 4}, rng);
  NdArray Zf = test::random_array({3, 4}, rng);
  NdArray y({3, 3});
  y.at(0, 1) = y.at(1, 0) = 0.7;
  y.at(0, 2) = y.at(2, 0) = 0.2;
  y.at(1, 2) = y.at(2, 1) = 0.9;
  Var lt = sim_loss(t.param(Zt), y);
  Var lf = sim_loss(t.param(Zf), y);
  LossBreakdown bd;
  Var total = total_loss(lt, lf, &bd);
  REQUIRE(total.value().scalar_value() ==
          lt.value().scalar_value() + lf.value().scalar_value());
  REQUIRE(bd.time_term == lt.value().scalar_value());
  REQUIRE(bd.freq_term == lf.value().scalar_value());
  REQUIRE(bd.total == total.value().scalar_value());
}

TEST_CASE("cross-entropy value and gradients", "[loss]") {
  Rng rng(53);
  const NdArray logits = test::random_array({3, 4}, rng, -2.0, 2.0);
  const std::vector<std::size_t> labels{0, 3, 2};

  // direct value
  double want = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double mx = logits[i * 4];
    for (std::size_t c = 1; c < 4; ++c) mx = std::max(mx, logits[i * 4 + c]);
    double den = 0.0;
    for (std::size_t c = 0; c < 4; ++c) den += std::exp(logits[i * 4 + c] - mx);
    want -= (logits[i * 4 + labels[i]] - mx) - std::log(den);
  }
  want /= 3.0;

  Tape t;
  Var lg = t.param(logits);
  Var loss = cross_entropy_mean(lg, labels);
  REQUIRE(loss.value().scalar_value() == Catch::Approx(want).epsilon(1e-12));

  t.backward(loss);
  const auto m = test::fd_check(
      [&](const std::vector<NdArray>& in) {
        Tape tt;
        return cross_entropy_mean(tt.param(in[0]), labels).value().scalar_value();
      },
      {logits}, {lg.grad()});
  INFO("element " << m.element << ": analytic " << m.analytic << " vs numeric "
                  << m.numeric);
  REQUIRE(m.ok);

  REQUIRE_THROWS_AS(cross_entropy_mean(t.param(NdArray({2, 3})), {0, 5}),
                    std::invalid_argument);
}
