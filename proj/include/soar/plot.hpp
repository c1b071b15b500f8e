#pragma once

#include <map>
#include <span>
#include <string>

#include "soar/biasprobe.hpp"

namespace soar::plot {

/// Metric-vs-distance scatter with the fitted line. `meta` goes into an XML comment.
std::string bias_curve_svg(const biasprobe::BiasCurve& c, const std::string& title,
                           const std::map<std::string, std::string>& meta);
std::string bias_curve_csv(const biasprobe::BiasCurve& c);

/// Overlaid histograms of closed-set and open-set uncertainty on [0, 1].
std::string uncertainty_hist_svg(std::span<const double> closed, std::span<const double> open, int bins,
                                 const std::string& title, const std::map<std::string, std::string>& meta);
std::string uncertainty_hist_csv(std::span<const double> closed, std::span<const double> open, int bins);

}  // namespace soar::plot
