#include "soar/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "soar/netcore.hpp"

namespace soar::losses {

void LossWeights::validate() const {
  if (!(w_recon >= 0.0) || !(w_s_cls >= 0.0) || !(w_s_guide >= 0.0)) {
    throw ConfigError("losses", "loss weights must be non-negative");
  }
}

double total_loss(const LossParts& p, const LossWeights& w) {
  return p.edl + w.w_recon * p.recon + w.w_s_cls * p.s_cls + w.w_s_guide * p.s_guide;
}

std::vector<double> one_hot(std::size_t n, int index) {
  std::vector<double> y(n, 0.0);
  if (index < 0 || static_cast<std::size_t>(index) >= n) {
    throw RangeError("losses", "label " + std::to_string(index) + " outside [0, " + std::to_string(n) + ")");
  }
  y[static_cast<std::size_t>(index)] = 1.0;
  return y;
}

namespace {

void same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw ShapeError("losses", std::string(what) + ": size mismatch (" + std::to_string(a) + " vs " +
                                   std::to_string(b) + ")");
  }
}

template <typename T>
double strength(std::span<const T> e) {
  double S = 0.0;
  for (auto v : e) {
    if (!(v >= T(0))) throw ContractError("losses", "evidence must be non-negative");
    S += static_cast<double>(v) + 1.0;
  }
  return S;
}

template <typename T>
std::vector<double> log_softmax(std::span<const T> z) {
  double mx = -INFINITY;
  for (auto v : z) mx = std::max(mx, static_cast<double>(v));
  double sum = 0.0;
  for (auto v : z) sum += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(sum);
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = static_cast<double>(z[i]) - lse;
  return out;
}

}  // namespace

template <typename T>
double edl_loss(std::span<const T> e, std::span<const T> y) {
  same_size(e.size(), y.size(), "edl_loss");
  const double logS = std::log(strength(e));
  double L = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (y[i] != T(0)) L += static_cast<double>(y[i]) * (logS - std::log(static_cast<double>(e[i]) + 1.0));
  }
  return L;
}

template <typename T>
std::vector<T> edl_loss_grad(std::span<const T> e, std::span<const T> y) {
  same_size(e.size(), y.size(), "edl_loss");
  const double S = strength(e);
  double ysum = 0.0;
  for (auto v : y) ysum += static_cast<double>(v);
  std::vector<T> g(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    g[i] = static_cast<T>(ysum / S - static_cast<double>(y[i]) / (static_cast<double>(e[i]) + 1.0));
  }
  return g;
}

template <typename T>
double softmax_ce_loss(std::span<const T> logits, int y) {
  const auto ls = log_softmax(logits);
  return -ls.at(static_cast<std::size_t>(y));
}

template <typename T>
std::vector<T> softmax_ce_grad(std::span<const T> logits, int y) {
  const auto ls = log_softmax(logits);
  std::vector<T> g(logits.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = static_cast<T>(std::exp(ls[i]) - (static_cast<int>(i) == y ? 1.0 : 0.0));
  }
  return g;
}

template <typename T>
double recon_loss(std::span<const T> xbar, std::span<const T> xhat, std::span<const T> u_prime,
                  const Dims4& dims) {
  same_size(xbar.size(), dims.count(), "recon_loss background");
  same_size(xhat.size(), dims.count(), "recon_loss reconstruction");
  same_size(u_prime.size(), dims.pixels(), "recon_loss weights");
  double L = 0.0;
  for (std::size_t px = 0; px < dims.pixels(); ++px) {
    const double u = u_prime[px];
    for (std::size_t c = 0; c < dims.d; ++c) {
      const std::size_t k = px * dims.d + c;
      L += u * std::abs(static_cast<double>(xbar[k]) - static_cast<double>(xhat[k]));
    }
  }
  return L / static_cast<double>(dims.count());
}

template <typename T>
std::vector<T> recon_loss_grad(std::span<const T> xbar, std::span<const T> xhat, std::span<const T> u_prime,
                               const Dims4& dims) {
  same_size(xbar.size(), dims.count(), "recon_loss background");
  same_size(xhat.size(), dims.count(), "recon_loss reconstruction");
  same_size(u_prime.size(), dims.pixels(), "recon_loss weights");
  const double inv = 1.0 / static_cast<double>(dims.count());
  std::vector<T> g(xhat.size(), T(0));
  for (std::size_t px = 0; px < dims.pixels(); ++px) {
    const double u = u_prime[px] * inv;
    for (std::size_t c = 0; c < dims.d; ++c) {
      const std::size_t k = px * dims.d + c;
      if (xhat[k] > xbar[k]) g[k] = static_cast<T>(u);
      else if (xhat[k] < xbar[k]) g[k] = static_cast<T>(-u);
    }
  }
  return g;
}

template <typename T>
double scene_cls_loss(std::span<const T> logits, std::span<const T> y) {
  same_size(logits.size(), y.size(), "scene_cls_loss");
  const auto ls = log_softmax(logits);
  double L = 0.0;
  for (std::size_t i = 0; i < ls.size(); ++i) L -= static_cast<double>(y[i]) * ls[i];
  return L / static_cast<double>(logits.size());
}

template <typename T>
std::vector<T> scene_cls_grad(std::span<const T> logits, std::span<const T> y) {
  same_size(logits.size(), y.size(), "scene_cls_loss");
  const auto ls = log_softmax(logits);
  double ysum = 0.0;
  for (auto v : y) ysum += static_cast<double>(v);
  const double inv = 1.0 / static_cast<double>(logits.size());
  std::vector<T> g(logits.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = static_cast<T>(inv * (ysum * std::exp(ls[i]) - static_cast<double>(y[i])));
  }
  return g;
}

template <typename T>
double guide_loss(std::span<const T> U, std::span<const T> M) {
  same_size(U.size(), M.size(), "guide_loss");
  if (U.empty()) return 0.0;
  const auto nu = netcore::min_max_normalize<T>(U);
  const auto nm = netcore::min_max_normalize<T>(M);
  double L = 0.0;
  for (std::size_t i = 0; i < U.size(); ++i) {
    L += std::abs(1.0 - static_cast<double>(nu[i]) - static_cast<double>(nm[i]));
  }
  return L / static_cast<double>(U.size());
}

template <typename T>
std::vector<T> guide_loss_grad(std::span<const T> U, std::span<const T> M) {
  same_size(U.size(), M.size(), "guide_loss");
  if (U.empty()) return {};
  const auto nu = netcore::min_max_normalize<T>(U);
  const auto nm = netcore::min_max_normalize<T>(M);
  const double inv = 1.0 / static_cast<double>(U.size());
  std::vector<T> g_norm(U.size(), T(0));
  for (std::size_t i = 0; i < U.size(); ++i) {
    const double r = 1.0 - static_cast<double>(nu[i]) - static_cast<double>(nm[i]);
    if (r > 0.0) g_norm[i] = static_cast<T>(-inv);
    else if (r < 0.0) g_norm[i] = static_cast<T>(inv);
  }
  return netcore::min_max_normalize_backward<T>(M, g_norm);
}

#define SOAR_LOSSES_INSTANTIATE(T)                                                                         \
  template double edl_loss<T>(std::span<const T>, std::span<const T>);                                     \
  template std::vector<T> edl_loss_grad<T>(std::span<const T>, std::span<const T>);                        \
  template double softmax_ce_loss<T>(std::span<const T>, int);                                             \
  template std::vector<T> softmax_ce_grad<T>(std::span<const T>, int);                                     \
  template double recon_loss<T>(std::span<const T>, std::span<const T>, std::span<const T>, const Dims4&); \
  template std::vector<T> recon_loss_grad<T>(std::span<const T>, std::span<const T>, std::span<const T>,   \
                                             const Dims4&);                                                \
  template double scene_cls_loss<T>(std::span<const T>, std::span<const T>);                               \
  template std::vector<T> scene_cls_grad<T>(std::span<const T>, std::span<const T>);                       \
  template double guide_loss<T>(std::span<const T>, std::span<const T>);                                   \
  template std::vector<T> guide_loss_grad<T>(std::span<const T>, std::span<const T>);

SOAR_LOSSES_INSTANTIATE(float)
SOAR_LOSSES_INSTANTIATE(double)

}  // namespace soar::losses
