#include "soar/biasprobe.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "soar/osarmetrics.hpp"

namespace soar::biasprobe {

namespace {

std::vector<double> normalized(const std::vector<float>& v) {
  double n = 0.0;
  for (float x : v) n += static_cast<double>(x) * x;
  n = std::sqrt(n);
  if (!(n > 0.0)) throw ContractError("biasprobe", "scene feature with zero norm");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

}  // namespace

SceneDistance scene_distance(const std::vector<std::vector<float>>& test,
                             const std::vector<std::vector<float>>& train) {
  if (train.empty()) throw ProtocolError("biasprobe", "scene distance needs at least one training feature");
  std::vector<std::vector<double>> tr;
  for (const auto& v : train) tr.push_back(normalized(v));
  SceneDistance out;
  out.per_video.resize(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto u = normalized(test[i]);
    double best = INFINITY;
    for (const auto& v : tr) {
      if (v.size() != u.size()) throw ShapeError("biasprobe", "scene feature dims differ");
      double dot = 0.0;
      for (std::size_t k = 0; k < u.size(); ++k) dot += u[k] * v[k];
      best = std::min(best, 1.0 - dot);
    }
    out.per_video[i] = best;
    out.mean += best;
  }
  if (!test.empty()) out.mean /= static_cast<double>(test.size());
  return out;
}

std::vector<std::vector<std::size_t>> balanced_subsets(std::span<const double> d, std::span<const int> labels,
                                                       int K) {
  if (d.size() != labels.size()) throw ShapeError("biasprobe", "distance and label counts differ");
  if (K < 1) throw ConfigError("biasprobe", "subset count must be positive");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::vector<std::size_t>> subsets(static_cast<std::size_t>(K));
  for (auto& [label, idx] : by_class) {
    if (idx.size() < static_cast<std::size_t>(K)) {
      throw ProtocolError("biasprobe", "class " + std::to_string(label) + " has " + std::to_string(idx.size()) +
                                           " videos, fewer than the " + std::to_string(K) + " subsets");
    }
    std::stable_sort(idx.begin(), idx.end(), [&d](std::size_t a, std::size_t b) { return d[a] < d[b]; });
    const std::size_t chunk = idx.size() / static_cast<std::size_t>(K);
    for (std::size_t k = 0; k < static_cast<std::size_t>(K); ++k) {
      subsets[k].insert(subsets[k].end(), idx.begin() + static_cast<std::ptrdiff_t>(k * chunk),
                        idx.begin() + static_cast<std::ptrdiff_t>((k + 1) * chunk));
    }
  }
  for (auto& s : subsets) std::sort(s.begin(), s.end());
  return subsets;
}

BiasCurve fit_curve(std::vector<CurvePoint> points) {
  if (points.size() < 2) throw ProtocolError("biasprobe", "a bias curve needs at least two points");
  BiasCurve c;
  c.points = std::move(points);
  const double n = static_cast<double>(c.points.size());
  // Shift by the first point so equal values give exact zeros.
  const double x0 = c.points[0].d, y0 = c.points[0].metric;
  double mx = 0.0, my = 0.0;
  for (const auto& p : c.points) mx += p.d - x0, my += p.metric - y0;
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : c.points) {
    const double dx = p.d - x0 - mx, dy = p.metric - y0 - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0)) throw ProtocolError("biasprobe", "all subsets share the same scene distance");
  c.slope = sxy / sxx;
  c.intercept = (y0 + my) - c.slope * (x0 + mx);
  c.variance = syy / n;
  c.pearson_r = syy > 0.0 ? std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0) : 0.0;
  return c;
}

std::string to_string(Scenario s) {
  return s == Scenario::closed_subsets ? "closed_subsets" : "open_subsets";
}

namespace {

std::vector<std::vector<float>> scene_features(const dataio::PredictionDump& dump, const char* which) {
  std::vector<std::vector<float>> out;
  for (const auto& r : dump.rows) {
    if (!r.scene_feature) {
      throw ProtocolError("biasprobe", std::string(which) + " row " + r.clip_id + " has no scene feature");
    }
    out.push_back(*r.scene_feature);
  }
  return out;
}

}  // namespace

BiasCurve bias_curve(const dataio::PredictionDump& train, const dataio::PredictionDump& closed,
                     const dataio::PredictionDump& open, Scenario scenario, int K) {
  const auto train_f = scene_features(train, "train");
  const bool split_closed = scenario == Scenario::closed_subsets;
  const auto& varied = split_closed ? closed : open;
  const auto& fixed = split_closed ? open : closed;
  const auto dist = scene_distance(scene_features(varied, split_closed ? "closed" : "open"), train_f);
  std::vector<int> labels;
  for (const auto& r : varied.rows) labels.push_back(r.true_action);
  const auto subsets = balanced_subsets(dist.per_video, labels, K);

  std::vector<CurvePoint> pts;
  for (std::size_t k = 0; k < subsets.size(); ++k) {
    dataio::PredictionDump part;
    double dsum = 0.0;
    for (auto i : subsets[k]) {
      part.rows.push_back(varied.rows[i]);
      dsum += dist.per_video[i];
    }
    CurvePoint p;
    p.d = dsum / static_cast<double>(subsets[k].size());
    try {
      const auto s = split_closed ? osarmetrics::scored(part, fixed) : osarmetrics::scored(fixed, part);
      p.metric = osarmetrics::auc(s);
    } catch (const MetricError& e) {
      throw ProtocolError("biasprobe", "subset " + std::to_string(k) + ": " + e.what());
    }
    pts.push_back(p);
  }
  return fit_curve(std::move(pts));
}

}  // namespace soar::biasprobe
