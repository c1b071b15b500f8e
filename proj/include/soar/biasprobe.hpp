#pragma once

#include <span>
#include <string>
#include <vector>

#include "soar/dataio.hpp"

namespace soar::biasprobe {

struct SceneDistance {
  std::vector<double> per_video;  // d_i = min_j (1 - u_i . v_j)
  double mean = 0.0;
};

/// Features are L2-normalised internally; a zero vector throws ContractError.
SceneDistance scene_distance(const std::vector<std::vector<float>>& test,
                             const std::vector<std::vector<float>>& train);

/// K class-balanced subsets ordered by distance. Within each class the videos
/// are sorted by d (index breaks ties), the farthest n_c mod K are dropped and
/// the k-th equal chunk goes to subset k. Returns indices into `d`.
std::vector<std::vector<std::size_t>> balanced_subsets(std::span<const double> d, std::span<const int> labels,
                                                       int K);

struct CurvePoint {
  double d = 0.0;
  double metric = 0.0;
};

struct BiasCurve {
  std::vector<CurvePoint> points;
  double slope = 0.0;
  double intercept = 0.0;
  double variance = 0.0;  // population variance of the metric values
  double pearson_r = 0.0;  // 0 when the metric is constant
};

/// Ordinary least squares of metric on d.
BiasCurve fit_curve(std::vector<CurvePoint> points);

enum class Scenario {
  closed_subsets,  // closed-set subsets, whole open set fixed
  open_subsets,    // open-set subsets, whole closed set fixed
};
std::string to_string(Scenario s);

/// Splits one side of the test data into K subsets by scene distance to the
/// training scenes, combines each with the fixed counterpart and scores AUC.
/// Dump rows must carry scene features.
BiasCurve bias_curve(const dataio::PredictionDump& train, const dataio::PredictionDump& closed,
                     const dataio::PredictionDump& open, Scenario scenario, int K);

}  // namespace soar::biasprobe
