#pragma once

#include <span>
#include <vector>

#include "soar/tensor.hpp"

namespace soar::losses {

struct LossWeights {
  double w_recon = 1.0;
  double w_s_cls = 1.0;
  double w_s_guide = 0.1;

  /// Throws ConfigError on a negative weight.
  void validate() const;
};

/// Per-batch loss terms. Absent modules contribute 0.
struct LossParts {
  double edl = 0.0;  // or the softmax cross-entropy for the plain arm
  double recon = 0.0;
  double s_cls = 0.0;
  double s_guide = 0.0;
};

double total_loss(const LossParts& parts, const LossWeights& w);

// All losses below are templated on the element type and instantiated for
// float and double; accumulation is always in double.

/// sum_i y_i (log S - log alpha_i) with alpha = e + 1. Throws ContractError on
/// negative evidence.
template <typename T>
double edl_loss(std::span<const T> e, std::span<const T> y);
/// dL/de (equal to dL/dalpha): 1/S - y_i / alpha_i.
template <typename T>
std::vector<T> edl_loss_grad(std::span<const T> e, std::span<const T> y);

/// Plain cross-entropy -log softmax(z)_y, used by the softmax arm.
template <typename T>
double softmax_ce_loss(std::span<const T> logits, int y);
template <typename T>
std::vector<T> softmax_ce_grad(std::span<const T> logits, int y);

/// (1/(HWTD)) sum u'_{ijt} |xbar - xhat|, U' shaped (H, W, T) and broadcast over D.
template <typename T>
double recon_loss(std::span<const T> xbar, std::span<const T> xhat, std::span<const T> u_prime,
                  const Dims4& dims);
/// Gradient w.r.t. xhat only (subgradient 0 at a zero residual).
template <typename T>
std::vector<T> recon_loss_grad(std::span<const T> xbar, std::span<const T> xhat,
                               std::span<const T> u_prime, const Dims4& dims);

/// (1/N) * -sum_i y_i log softmax(z)_i over N scene logits.
template <typename T>
double scene_cls_loss(std::span<const T> logits, std::span<const T> y);
template <typename T>
std::vector<T> scene_cls_grad(std::span<const T> logits, std::span<const T> y);

/// mean |1 - norm(U) - norm(M)| with min-max norm.
template <typename T>
double guide_loss(std::span<const T> U, std::span<const T> M);
/// Gradient w.r.t. M (U is a constant target).
template <typename T>
std::vector<T> guide_loss_grad(std::span<const T> U, std::span<const T> M);

std::vector<double> one_hot(std::size_t n, int index);

}  // namespace soar::losses
