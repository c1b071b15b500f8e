#include "soar/osarmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>

#include "soar/synthgen.hpp"

namespace soar::osarmetrics {

namespace {

void split_scores(std::span<const ScoredSample> s, std::vector<double>& pos, std::vector<double>& neg) {
  for (const auto& x : s) {
    if (!std::isfinite(x.score)) throw MetricError("osarmetrics", "non-finite score");
    (x.is_known ? pos : neg).push_back(x.score);
  }
  if (pos.empty() || neg.empty()) {
    throw MetricError("osarmetrics", pos.empty() ? "no known (positive) samples" : "no unknown (negative) samples");
  }
}

// Number of values in sorted-ascending v that are >= t.
std::size_t count_ge(const std::vector<double>& v, double t) {
  return static_cast<std::size_t>(v.end() - std::lower_bound(v.begin(), v.end(), t));
}

}  // namespace

double auc(std::span<const ScoredSample> s) {
  std::vector<double> pos, neg;
  split_scores(s, pos, neg);
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : pos) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

double far_at_tpr(std::span<const ScoredSample> s, double tpr_target) {
  std::vector<double> pos, neg;
  split_scores(s, pos, neg);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  const double np = static_cast<double>(pos.size());
  // Walk thresholds from the top; TPR only grows as tau falls.
  double tau = pos.front();
  for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
    if (static_cast<double>(count_ge(pos, *it)) / np >= tpr_target) {
      tau = *it;
      break;
    }
  }
  return static_cast<double>(count_ge(neg, tau)) / static_cast<double>(neg.size());
}

double tpr_at_far(std::span<const ScoredSample> s, double far_target) {
  std::vector<double> pos, neg;
  split_scores(s, pos, neg);
  std::sort(pos.begin(), pos.end());
  std::sort(neg.begin(), neg.end());
  std::vector<double> cand(pos);
  cand.insert(cand.end(), neg.begin(), neg.end());
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
  const double nn = static_cast<double>(neg.size());
  for (double t : cand) {
    if (static_cast<double>(count_ge(neg, t)) / nn <= far_target) {
      return static_cast<double>(count_ge(pos, t)) / static_cast<double>(pos.size());
    }
  }
  return 0.0;  // tau = +inf
}

double macro_f1(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ShapeError("osarmetrics", "truth and prediction lengths differ");
  if (truth.empty()) throw MetricError("osarmetrics", "macro F1 of an empty set");
  std::map<int, std::size_t> tp, fp, fn;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == pred[i]) {
      ++tp[truth[i]];
    } else {
      ++fn[truth[i]];
      ++fp[pred[i]];
    }
  }
  const std::set<int> present(truth.begin(), truth.end());
  double sum = 0.0;
  for (int c : present) {
    const double t = static_cast<double>(tp[c]);
    const double denom = 2.0 * t + static_cast<double>(fp[c]) + static_cast<double>(fn[c]);
    sum += denom > 0.0 ? 2.0 * t / denom : 0.0;
  }
  return sum / static_cast<double>(present.size());
}

double openness(int c_known, int c_unknown) {
  if (c_known < 1 || c_unknown < 0) throw ConfigError("osarmetrics", "openness needs C_known >= 1 and C_unknown >= 0");
  const double k = 2.0 * c_known;
  return 1.0 - std::sqrt(k / (k + c_unknown));
}

double max_uncertainty(const dataio::PredictionDump& dump) {
  if (dump.rows.empty()) throw MetricError("osarmetrics", "empty dump");
  double m = 0.0;
  for (const auto& r : dump.rows) m = std::max(m, static_cast<double>(r.u));
  return m;
}

namespace {

int predict(const dataio::PredictionRow& r, double tau_u, int c_known) {
  if (static_cast<double>(r.u) > tau_u) return c_known;
  return static_cast<int>(std::max_element(r.probs.begin(), r.probs.end()) - r.probs.begin());
}

}  // namespace

OpenMaF1 open_maf1(const dataio::PredictionDump& closed, const dataio::PredictionDump& open, double tau_u,
                   int c_known, const OpennessProtocol& proto) {
  std::vector<int> unknown_classes;
  for (const auto& r : open.rows) {
    if (r.true_action < c_known) {
      throw ConfigError("osarmetrics", "open-set row " + r.clip_id + " carries a known label");
    }
    unknown_classes.push_back(r.true_action);
  }
  std::sort(unknown_classes.begin(), unknown_classes.end());
  unknown_classes.erase(std::unique(unknown_classes.begin(), unknown_classes.end()), unknown_classes.end());
  if (unknown_classes.empty()) throw ConfigError("osarmetrics", "open maF1 needs at least one unknown class");
  if (proto.resamples < 1 || proto.ratios.empty()) throw ConfigError("osarmetrics", "empty openness protocol");
  const int cu = static_cast<int>(unknown_classes.size());

  std::vector<int> base_truth, base_pred;
  for (const auto& r : closed.rows) {
    base_truth.push_back(r.true_action);
    base_pred.push_back(predict(r, tau_u, c_known));
  }

  OpenMaF1 res;
  std::vector<double> weighted(static_cast<std::size_t>(proto.resamples), 0.0);
  double wsum = 0.0;
  for (std::size_t k = 0; k < proto.ratios.size(); ++k) {
    OpenMaF1Point pt;
    pt.ratio = proto.ratios[k];
    pt.unknown_classes = std::max(1, static_cast<int>(std::lround(pt.ratio * cu)));
    pt.unknown_classes = std::min(pt.unknown_classes, cu);
    pt.openness = openness(c_known, pt.unknown_classes);
    for (int s = 0; s < proto.resamples; ++s) {
      std::vector<int> pool(unknown_classes);
      std::mt19937_64 rng(synthgen::mix_seed(proto.seed, k * 1000 + static_cast<std::size_t>(s)));
      std::shuffle(pool.begin(), pool.end(), rng);
      const std::set<int> chosen(pool.begin(), pool.begin() + pt.unknown_classes);
      std::vector<int> truth(base_truth), pred(base_pred);
      for (const auto& r : open.rows) {
        if (!chosen.count(r.true_action)) continue;
        truth.push_back(c_known);
        pred.push_back(predict(r, tau_u, c_known));
      }
      const double f1 = macro_f1(truth, pred);
      pt.f1.push_back(f1);
      weighted[static_cast<std::size_t>(s)] += pt.openness * f1;
    }
    wsum += pt.openness;
    res.points.push_back(std::move(pt));
  }
  for (auto& w : weighted) w /= wsum;
  for (double w : weighted) res.mean += w;
  res.mean /= static_cast<double>(weighted.size());
  for (double w : weighted) res.variance += (w - res.mean) * (w - res.mean);
  res.variance /= static_cast<double>(weighted.size());
  return res;
}

double sym_kld(std::span<const double> a, std::span<const double> b, int bins, double eps) {
  if (a.empty() || b.empty()) throw MetricError("osarmetrics", "sym_kld needs two non-empty lists");
  if (bins < 1) throw ConfigError("osarmetrics", "bins must be positive");
  double lo = INFINITY, hi = -INFINITY;
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  const double range = hi - lo;
  auto hist = [&](std::span<const double> v) {
    std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
    for (double x : v) {
      const double n = range > 0.0 ? (x - lo) / range : 0.0;
      const int k = std::min(bins - 1, static_cast<int>(std::floor(n * bins)));
      h[static_cast<std::size_t>(k)] += 1.0;
    }
    double total = 0.0;
    for (auto& x : h) {
      x = x / static_cast<double>(v.size()) + eps;
      total += x;
    }
    for (auto& x : h) x /= total;
    return h;
  };
  const auto P = hist(a), Q = hist(b);
  double kl = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) kl += (P[i] - Q[i]) * (std::log(P[i]) - std::log(Q[i]));
  return kl;
}

namespace {

Matrix centred(const Matrix& X) {
  Matrix c = X;
  for (std::size_t j = 0; j < X.cols; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) m += X.at(i, j);
    m /= static_cast<double>(X.rows);
    for (std::size_t i = 0; i < X.rows; ++i) c.data[i * X.cols + j] -= m;
  }
  return c;
}

// ||A^T B||_F^2
double cross_frob2(const Matrix& A, const Matrix& B) {
  double s = 0.0;
  for (std::size_t p = 0; p < A.cols; ++p) {
    for (std::size_t q = 0; q < B.cols; ++q) {
      double d = 0.0;
      for (std::size_t i = 0; i < A.rows; ++i) d += A.at(i, p) * B.at(i, q);
      s += d * d;
    }
  }
  return s;
}

}  // namespace

double cka(const Matrix& X, const Matrix& Y) {
  if (X.rows != Y.rows) throw ShapeError("osarmetrics", "cka inputs need the same number of rows");
  if (X.rows < 2) throw MetricError("osarmetrics", "cka needs at least two rows");
  if (X.data.size() != X.rows * X.cols || Y.data.size() != Y.rows * Y.cols) {
    throw ShapeError("osarmetrics", "matrix storage does not match its dims");
  }
  const Matrix xc = centred(X), yc = centred(Y);
  const double xx = cross_frob2(xc, xc), yy = cross_frob2(yc, yc);
  if (!(xx > 0.0) || !(yy > 0.0)) throw MetricError("osarmetrics", "cka undefined for zero-variance input");
  return cross_frob2(yc, xc) / (std::sqrt(xx) * std::sqrt(yy));
}

std::vector<ScoredSample> scored(const dataio::PredictionDump& closed, const dataio::PredictionDump& open) {
  std::vector<ScoredSample> out;
  auto push = [&out](const dataio::PredictionRow& r, bool known) {
    ScoredSample s;
    s.score = 1.0 - static_cast<double>(r.u);
    s.is_known = known;
    s.true_class = r.true_action;
    s.predicted_class = static_cast<int>(std::max_element(r.probs.begin(), r.probs.end()) - r.probs.begin());
    out.push_back(s);
  };
  for (const auto& r : closed.rows) push(r, true);
  for (const auto& r : open.rows) push(r, false);
  return out;
}

}  // namespace soar::osarmetrics
