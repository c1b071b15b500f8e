#pragma once

// Shared helpers and independent oracles for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "soar/tensor.hpp"

namespace testing_support {

/// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("soar_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

inline std::vector<double> random_doubles(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

inline soar::ClipTensor random_clip(std::mt19937_64& rng, soar::Dims4 dims) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  soar::ClipTensor c(dims);
  for (auto& v : c.values()) v = u(rng);
  return c;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-8, std::abs(a), std::abs(b)});
}

// --------------------------------------------------------------------------
// Oracles. Written from the definitions, sharing no code with the library.
// --------------------------------------------------------------------------

/// Weighted L1 by explicit nested loops over (i, j, t, d).
inline double recon_direct(const std::vector<double>& xbar, const std::vector<double>& xhat,
                           const std::vector<double>& up, std::size_t H, std::size_t W, std::size_t T, std::size_t D) {
  double s = 0.0;
  for (std::size_t i = 0; i < H; ++i)
    for (std::size_t j = 0; j < W; ++j)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t d = 0; d < D; ++d) {
          const std::size_t k = ((i * W + j) * T + t) * D + d;
          s += up[(i * W + j) * T + t] * std::abs(xbar[k] - xhat[k]);
        }
  return s / static_cast<double>(H * W * T * D);
}

/// (1/N) * -log of the true-class softmax, computed as a plain ratio of exponentials.
inline double scene_ce_direct(const std::vector<double>& z, int y) {
  double denom = 0.0;
  for (double v : z) denom += std::exp(v);
  return -std::log(std::exp(z[y]) / denom) / static_cast<double>(z.size());
}

inline std::vector<double> minmax_direct(const std::vector<double>& v) {
  const double lo = *std::min_element(v.begin(), v.end()), hi = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size(), 0.0);
  if (hi > lo)
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - lo) / (hi - lo);
  return out;
}

inline double guide_direct(const std::vector<double>& U, const std::vector<double>& M) {
  const auto nu = minmax_direct(U), nm = minmax_direct(M);
  double s = 0.0;
  for (std::size_t i = 0; i < U.size(); ++i) s += std::abs(1.0 - nu[i] - nm[i]);
  return s / static_cast<double>(U.size());
}

/// Brute-force pairwise Mann-Whitney AUC.
inline double auc_pairs(const std::vector<double>& pos, const std::vector<double>& neg) {
  double s = 0.0;
  for (double p : pos) {
    for (double n : neg) s += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return s / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double frac_ge(const std::vector<double>& v, double t) {
  double c = 0.0;
  for (double x : v) c += x >= t ? 1.0 : 0.0;
  return c / static_cast<double>(v.size());
}

/// Sweep every distinct score as a threshold; largest threshold meeting the TPR target.
inline double far_sweep(const std::vector<double>& pos, const std::vector<double>& neg, double target) {
  std::vector<double> th(pos);
  th.insert(th.end(), neg.begin(), neg.end());
  double best = -std::numeric_limits<double>::infinity();
  for (double t : th) {
    if (frac_ge(pos, t) >= target) best = std::max(best, t);
  }
  return frac_ge(neg, best);
}

/// Smallest threshold (observed score or +inf) with FAR at most the target.
inline double tpr_sweep(const std::vector<double>& pos, const std::vector<double>& neg, double target) {
  std::vector<double> th(pos);
  th.insert(th.end(), neg.begin(), neg.end());
  double best = std::numeric_limits<double>::infinity();
  for (double t : th) {
    if (frac_ge(neg, t) <= target) best = std::min(best, t);
  }
  return std::isinf(best) ? 0.0 : frac_ge(pos, best);
}

/// Macro F1 from an explicit confusion matrix, averaged over classes that occur in truth.
inline double macro_f1_confusion(const std::vector<int>& truth, const std::vector<int>& pred, int classes) {
  std::vector<std::vector<double>> cm(classes, std::vector<double>(classes, 0.0));
  for (std::size_t i = 0; i < truth.size(); ++i) cm[truth[i]][pred[i]] += 1.0;
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    double row = 0.0, col = 0.0;
    for (int k = 0; k < classes; ++k) row += cm[c][k], col += cm[k][c];
    if (row == 0.0) continue;
    ++present;
    const double precision = col > 0.0 ? cm[c][c] / col : 0.0;
    const double recall = cm[c][c] / row;
    sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  }
  return sum / present;
}

/// KL(P||Q) + KL(Q||P) over equal-width bins, counting membership interval by interval.
inline double sym_kld_direct(const std::vector<double>& a, const std::vector<double>& b, int bins, double eps) {
  double lo = a[0], hi = a[0];
  for (double x : a) lo = std::min(lo, x), hi = std::max(hi, x);
  for (double x : b) lo = std::min(lo, x), hi = std::max(hi, x);
  auto hist = [&](const std::vector<double>& v) {
    std::vector<double> h(bins, 0.0);
    for (double x : v) {
      const double n = hi > lo ? (x - lo) / (hi - lo) : 0.0;
      for (int k = 0; k < bins; ++k) {
        const double left = static_cast<double>(k) / bins;
        const bool last = k == bins - 1;
        if (n * bins >= k && (last || n * bins < k + 1)) {
          h[k] += 1.0;
          break;
        }
        (void)left;
      }
    }
    double z = 0.0;
    for (auto& x : h) x = x / v.size() + eps, z += x;
    for (auto& x : h) x /= z;
    return h;
  };
  const auto P = hist(a), Q = hist(b);
  double kl_pq = 0.0, kl_qp = 0.0;
  for (int k = 0; k < bins; ++k) {
    kl_pq += P[k] * std::log(P[k] / Q[k]);
    kl_qp += Q[k] * std::log(Q[k] / P[k]);
  }
  return kl_pq + kl_qp;
}

using Mat = std::vector<std::vector<double>>;

/// HSIC-form linear CKA through n x n Gram matrices and the centring matrix H.
inline double cka_hsic(const Mat& X, const Mat& Y) {
  const std::size_t n = X.size();
  auto gram = [n](const Mat& A) {
    Mat K(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < A[i].size(); ++k) K[i][j] += A[i][k] * A[j][k];
    return K;
  };
  auto centre = [n](const Mat& K) {
    Mat H(n, std::vector<double>(n, -1.0 / n));
    for (std::size_t i = 0; i < n; ++i) H[i][i] += 1.0;
    Mat T(n, std::vector<double>(n, 0.0)), R(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) T[i][j] += H[i][k] * K[k][j];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = 0; k < n; ++k) R[i][j] += T[i][k] * H[k][j];
    return R;
  };
  auto hsic = [n](const Mat& A, const Mat& B) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) s += A[i][j] * B[j][i];
    return s;
  };
  const auto K = centre(gram(X)), L = centre(gram(Y));
  return hsic(K, L) / std::sqrt(hsic(K, K) * hsic(L, L));
}

/// OLS through the 2x2 normal equations and Pearson r from raw sums.
struct LineFit {
  double slope, intercept, variance, r;
};
inline LineFit normal_equations(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i], syy += y[i] * y[i];
  }
  const double det = n * sxx - sx * sx;
  LineFit f;
  f.slope = (n * sxy - sx * sy) / det;
  f.intercept = (sxx * sy - sx * sxy) / det;
  f.variance = syy / n - (sy / n) * (sy / n);
  f.r = (n * sxy - sx * sy) / std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  return f;
}

/// Temporal median by gathering each window and sorting it, with the window
/// shifted as a whole to stay inside the clip.
inline soar::ClipTensor tmf_sort_pick(const soar::ClipTensor& clip, std::size_t w) {
  const auto& d = clip.dims();
  soar::ClipTensor out(d);
  for (std::size_t i = 0; i < d.h; ++i)
    for (std::size_t j = 0; j < d.w; ++j)
      for (std::size_t c = 0; c < d.d; ++c)
        for (std::size_t t = 0; t < d.t; ++t) {
          long start = static_cast<long>(t) - static_cast<long>((w - 1) / 2);
          start = std::max(0L, std::min(start, static_cast<long>(d.t - w)));
          std::vector<float> vals;
          for (std::size_t k = 0; k < w; ++k) vals.push_back(clip.at(i, j, static_cast<std::size_t>(start) + k, c));
          std::sort(vals.begin(), vals.end());
          out.at(i, j, t, c) = w % 2 ? vals[w / 2] : 0.5f * (vals[w / 2 - 1] + vals[w / 2]);
        }
  return out;
}

/// Trilinear resampling via tent weights summed over every source voxel.
inline std::vector<double> trilinear_tent(const std::vector<double>& src, std::size_t h, std::size_t w, std::size_t t,
                                          std::size_t H, std::size_t W, std::size_t T) {
  auto coord = [](std::size_t o, std::size_t in, std::size_t out) {
    double x = (o + 0.5) * static_cast<double>(in) / static_cast<double>(out) - 0.5;
    return std::clamp(x, 0.0, static_cast<double>(in - 1));
  };
  std::vector<double> out(H * W * T, 0.0);
  for (std::size_t a = 0; a < H; ++a)
    for (std::size_t b = 0; b < W; ++b)
      for (std::size_t c = 0; c < T; ++c) {
        const double x = coord(a, h, H), y = coord(b, w, W), z = coord(c, t, T);
        double v = 0.0;
        for (std::size_t i = 0; i < h; ++i)
          for (std::size_t j = 0; j < w; ++j)
            for (std::size_t k = 0; k < t; ++k) {
              const double wt = std::max(0.0, 1 - std::abs(x - i)) * std::max(0.0, 1 - std::abs(y - j)) *
                                std::max(0.0, 1 - std::abs(z - k));
              v += wt * src[(i * w + j) * t + k];
            }
        out[(a * W + b) * T + c] = v;
      }
  return out;
}

}  // namespace testing_support
