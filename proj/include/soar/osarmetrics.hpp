#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "soar/dataio.hpp"

namespace soar::osarmetrics {

/// score = 1 - u; known samples are the positive class.
struct ScoredSample {
  double score = 0.0;
  bool is_known = true;
  int predicted_class = -1;
  int true_class = -1;
};

/// P(score_pos > score_neg) + 0.5 P(tie). Throws MetricError when either class is empty.
double auc(std::span<const ScoredSample> s);

/// Fraction of unknowns with score >= tau, where tau is the largest threshold
/// keeping at least `tpr_target` of the knowns.
double far_at_tpr(std::span<const ScoredSample> s, double tpr_target = 0.95);

/// TPR at the smallest threshold (an observed score, or +inf) whose false alarm
/// rate is <= `far_target`.
double tpr_at_far(std::span<const ScoredSample> s, double far_target = 0.10);

/// Mean F1 over the classes that occur in `truth`.
double macro_f1(std::span<const int> truth, std::span<const int> pred);

/// 1 - sqrt(2 Ck / (2 Ck + Cu)).
double openness(int c_known, int c_unknown);

struct OpennessProtocol {
  std::vector<double> ratios{0.2, 0.4, 0.6, 0.8, 1.0};
  int resamples = 5;
  std::uint64_t seed = 0;
};

struct OpenMaF1Point {
  double ratio = 0.0;
  int unknown_classes = 0;
  double openness = 0.0;
  std::vector<double> f1;  // one per resample
};

struct OpenMaF1 {
  double mean = 0.0;
  double variance = 0.0;  // population variance across resamples
  std::vector<OpenMaF1Point> points;
};

/// Rows with u <= tau_u predict argmax p, the rest predict the unknown label
/// c_known. Per resample the openness-weighted average of per-point macro F1 is
/// taken; mean and variance are across resamples.
OpenMaF1 open_maf1(const dataio::PredictionDump& closed, const dataio::PredictionDump& open, double tau_u,
                   int c_known, const OpennessProtocol& proto = {});

/// Largest u in a dump (used as tau_u with the training dump).
double max_uncertainty(const dataio::PredictionDump& dump);

/// Symmetric KL divergence of the two uncertainty histograms after pooled
/// min-max normalisation.
double sym_kld(std::span<const double> a, std::span<const double> b, int bins = 50, double eps = 1e-8);

/// Row-major n x d matrix.
struct Matrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

/// Linear CKA between column-centred X and Y (same row count).
double cka(const Matrix& X, const Matrix& Y);

/// Samples from a closed-set dump (known) and an open-set dump (unknown).
std::vector<ScoredSample> scored(const dataio::PredictionDump& closed, const dataio::PredictionDump& open);

}  // namespace soar::osarmetrics
