#include <doctest.h>

#include <cmath>
#include <random>

#include "soar/losses.hpp"
#include "support.hpp"

using namespace soar;
using namespace soar::losses;
using testing_support::random_doubles;
using testing_support::rel_err;

namespace {

double edl(std::vector<double> e, std::vector<double> y) { return edl_loss<double>(e, y); }

// Central-difference gradient of f at x.
template <typename F>
std::vector<double> numeric_grad(F f, std::vector<double> x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double old = x[i];
    x[i] = old + h;
    const double lp = f(x);
    x[i] = old - h;
    const double lm = f(x);
    x[i] = old;
    g[i] = (lp - lm) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("evidential loss examples") {
  CHECK(std::abs(edl({0, 0}, {1, 0}) - 0.6931471805599453) < 1e-6);
  CHECK(std::abs(edl({3, 1}, {1, 0}) - 0.4054651081081644) < 1e-6);
  CHECK(std::abs(edl({3, 1}, {0, 1}) - 1.0986122886681098) < 1e-6);
  CHECK_THROWS_AS(edl({-0.1, 1}, {1, 0}), ContractError);
}

TEST_CASE("evidential loss is non-negative and falls with true-class evidence") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    auto e = random_doubles(rng, 5, 0.0, 10.0);
    const auto y = one_hot(5, trial % 5);
    const double l0 = edl(e, y);
    CHECK(l0 >= 0.0);
    e[trial % 5] += 5.0;
    CHECK(edl(e, y) < l0);
  }
  CHECK(edl({1e12, 0}, {1, 0}) < 1e-9);
}

TEST_CASE("reconstruction loss examples") {
  const Dims4 d{1, 1, 2, 1};
  std::vector<double> xbar = {1, 3}, xhat = {0, 1}, up = {0.5, 1.0};
  CHECK(recon_loss<double>(xbar, xhat, up, d) == doctest::Approx(1.25).epsilon(1e-12));
  std::vector<double> zeros = {0, 0};
  CHECK(recon_loss<double>(xbar, xhat, zeros, d) == 0.0);
  CHECK(recon_loss<double>(xbar, xbar, up, d) == 0.0);
  std::vector<double> bad = {1};
  CHECK_THROWS_AS(recon_loss<double>(xbar, xhat, bad, d), ShapeError);
}

TEST_CASE("reconstruction loss grows with each residual") {
  std::mt19937_64 rng(2);
  const Dims4 d{2, 2, 2, 3};
  const auto xbar = random_doubles(rng, d.count());
  auto xhat = random_doubles(rng, d.count());
  const auto up = random_doubles(rng, d.pixels(), 0.0, 1.0);
  for (std::size_t k = 0; k < xhat.size(); ++k) {
    const double before = recon_loss<double>(xbar, xhat, up, d);
    xhat[k] += xhat[k] >= xbar[k] ? 0.3 : -0.3;
    CHECK(recon_loss<double>(xbar, xhat, up, d) >= before);
  }
}

TEST_CASE("scene classification loss examples") {
  std::vector<double> z = {0, 0}, y = {1, 0};
  CHECK(std::abs(scene_cls_loss<double>(z, y) - 0.34657359) < 1e-6);
  std::vector<double> big = {1000, 0};
  CHECK(scene_cls_loss<double>(big, y) < 1e-12);
  std::vector<double> z3 = {1, 2, 3}, y3 = {0, 0, 1};
  CHECK(std::abs(scene_cls_loss<double>(z3, y3) - 0.13587) < 1e-5);
  CHECK(std::abs(scene_cls_loss<double>(z3, y3) - testing_support::scene_ce_direct({1, 2, 3}, 2)) < 1e-12);
}

TEST_CASE("guide loss examples") {
  std::vector<double> u = {0, 1}, m1 = {1, 0}, m2 = {0, 1};
  CHECK(guide_loss<double>(u, m1) == 0.0);
  CHECK(guide_loss<double>(u, m2) == 1.0);
}

TEST_CASE("guide loss stays in [0,1]") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto u = random_doubles(rng, 8, -5, 5), m = random_doubles(rng, 8, -5, 5);
    const double g = guide_loss<double>(u, m);
    CHECK(g >= 0.0);
    CHECK(g <= 1.0);
  }
}

TEST_CASE("total loss examples") {
  LossWeights w;
  CHECK(total_loss({1, 1, 1, 1}, w) == doctest::Approx(3.1));
  CHECK(total_loss({0.7, 5, 6, 7}, {0, 0, 0}) == 0.7);
  CHECK(std::abs(total_loss({0.4055, 1.25, 0.3466, 1.0}, w) - 2.1021) < 1e-9);
  LossWeights bad{-1, 0, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("losses match direct-summation oracles on random inputs") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const Dims4 d{1 + rng() % 3, 1 + rng() % 3, 1 + rng() % 3, 1 + rng() % 3};
    const auto xbar = random_doubles(rng, d.count(), 0, 1), xhat = random_doubles(rng, d.count(), -1, 2);
    const auto up = random_doubles(rng, d.pixels(), 0, 1);
    CHECK(std::abs(recon_loss<double>(xbar, xhat, up, d) -
                   testing_support::recon_direct(xbar, xhat, up, d.h, d.w, d.t, d.d)) < 1e-6);
    const std::size_t n = 2 + rng() % 5;
    const auto z = random_doubles(rng, n, -4, 4);
    const int y = static_cast<int>(rng() % n);
    const auto yv = one_hot(n, y);
    CHECK(std::abs(scene_cls_loss<double>(z, yv) - testing_support::scene_ce_direct(z, y)) < 1e-6);
    const auto U = random_doubles(rng, 8, 0, 1), M = random_doubles(rng, 8, -3, 3);
    CHECK(std::abs(guide_loss<double>(U, M) - testing_support::guide_direct(U, M)) < 1e-7);
    const auto parts = random_doubles(rng, 4, 0, 3), wv = random_doubles(rng, 3, 0, 2);
    CHECK(std::abs(total_loss({parts[0], parts[1], parts[2], parts[3]}, {wv[0], wv[1], wv[2]}) -
                   (parts[0] + wv[0] * parts[1] + wv[1] * parts[2] + wv[2] * parts[3])) < 1e-6);
  }
}

TEST_CASE("loss gradients match central differences") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto e = random_doubles(rng, 4, 0.1, 5);
    const auto y = one_hot(4, trial % 4);
    const auto ge = edl_loss_grad<double>(e, y);
    const auto ne = numeric_grad([&](const std::vector<double>& x) { return edl_loss<double>(x, y); }, e);
    for (std::size_t i = 0; i < 4; ++i) CHECK(rel_err(ge[i], ne[i]) < 1e-4);

    const auto z = random_doubles(rng, 5, -3, 3);
    const auto gs = scene_cls_grad<double>(z, one_hot(5, trial % 5));
    const auto ns = numeric_grad([&](const std::vector<double>& x) { return scene_cls_loss<double>(x, one_hot(5, trial % 5)); }, z);
    for (std::size_t i = 0; i < 5; ++i) CHECK(rel_err(gs[i], ns[i]) < 1e-4);

    const auto gc = softmax_ce_grad<double>(z, trial % 5);
    const auto nc = numeric_grad([&](const std::vector<double>& x) { return softmax_ce_loss<double>(x, trial % 5); }, z);
    for (std::size_t i = 0; i < 5; ++i) CHECK(rel_err(gc[i], nc[i]) < 1e-4);

    const Dims4 d{2, 2, 1, 3};
    const auto xbar = random_doubles(rng, d.count()), xhat = random_doubles(rng, d.count());
    const auto up = random_doubles(rng, d.pixels(), 0, 1);
    const auto gr = recon_loss_grad<double>(xbar, xhat, up, d);
    const auto nr = numeric_grad([&](const std::vector<double>& x) { return recon_loss<double>(xbar, x, up, d); }, xhat);
    for (std::size_t i = 0; i < nr.size(); ++i) CHECK(rel_err(gr[i], nr[i]) < 1e-4);

    const auto U = random_doubles(rng, 8, 0, 1), M = random_doubles(rng, 8, -2, 2);
    const auto gg = guide_loss_grad<double>(U, M);
    const auto ng = numeric_grad([&](const std::vector<double>& x) { return guide_loss<double>(U, x); }, M);
    for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(gg[i] - ng[i]) <= 1e-4 * std::max(1.0, std::abs(ng[i])));
  }
}
