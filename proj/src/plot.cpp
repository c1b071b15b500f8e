#include "soar/plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "soar/dataio.hpp"

namespace soar::plot {

namespace {

constexpr double kW = 480, kH = 320, kLeft = 60, kRight = 20, kTop = 36, kBottom = 44;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double x0, x1, y0, y1;
  double sx(double x) const { return kLeft + (x - x0) / (x1 - x0) * (kW - kLeft - kRight); }
  double sy(double y) const { return kH - kBottom - (y - y0) / (y1 - y0) * (kH - kTop - kBottom); }
};

void header(std::ostringstream& o, const std::string& title, const std::map<std::string, std::string>& meta) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  o << "<!--";
  for (const auto& [k, v] : meta) o << ' ' << escape(k) << '=' << escape(v);
  o << " -->\n";
  o << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  o << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
    << "</text>\n";
}

void axes(std::ostringstream& o, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  o << "<g stroke=\"black\" fill=\"none\">";
  o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kH - kBottom) << "\" x2=\"" << px(kW - kRight)
    << "\" y2=\"" << px(kH - kBottom) << "\"/>";
  o << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(kLeft) << "\" y2=\""
    << px(kH - kBottom) << "\"/></g>\n";
  o << "<g font-size=\"10\">";
  for (int i = 0; i <= 4; ++i) {
    const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
    const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
    o << "<text x=\"" << px(f.sx(xv)) << "\" y=\"" << px(kH - kBottom + 14) << "\" text-anchor=\"middle\">"
      << num(xv) << "</text>";
    o << "<text x=\"" << px(kLeft - 4) << "\" y=\"" << px(f.sy(yv) + 3) << "\" text-anchor=\"end\">" << num(yv)
      << "</text>";
  }
  o << "</g>\n";
  o << "<text x=\"" << px((kLeft + kW - kRight) / 2) << "\" y=\"" << px(kH - 8)
    << "\" text-anchor=\"middle\" font-size=\"12\">" << escape(xlabel) << "</text>\n";
  o << "<text x=\"14\" y=\"" << px((kTop + kH - kBottom) / 2) << "\" text-anchor=\"middle\" font-size=\"12\" "
    << "transform=\"rotate(-90 14 " << px((kTop + kH - kBottom) / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

std::vector<double> histogram(std::span<const double> v, int bins) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (double x : v) {
    const int k = std::clamp(static_cast<int>(std::floor(x * bins)), 0, bins - 1);
    h[static_cast<std::size_t>(k)] += 1.0;
  }
  for (auto& x : h) x /= std::max<double>(1.0, static_cast<double>(v.size()));
  return h;
}

}  // namespace

std::string bias_curve_svg(const biasprobe::BiasCurve& c, const std::string& title,
                           const std::map<std::string, std::string>& meta) {
  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& p : c.points) {
    x0 = std::min(x0, p.d), x1 = std::max(x1, p.d);
    y0 = std::min(y0, p.metric), y1 = std::max(y1, p.metric);
  }
  if (!(x1 > x0)) x0 -= 0.5, x1 += 0.5;
  const double pad = std::max(0.02, (y1 - y0) * 0.15);
  Frame f{x0, x1, y0 - pad, y1 + pad};
  std::ostringstream o;
  header(o, title, meta);
  axes(o, f, "scene distance d", "AUC");
  o << "<line stroke=\"#c0392b\" stroke-width=\"1.5\" x1=\"" << px(f.sx(x0)) << "\" y1=\""
    << px(f.sy(c.intercept + c.slope * x0)) << "\" x2=\"" << px(f.sx(x1)) << "\" y2=\""
    << px(f.sy(c.intercept + c.slope * x1)) << "\"/>\n";
  o << "<polyline fill=\"none\" stroke=\"#2c3e50\" points=\"";
  for (const auto& p : c.points) o << px(f.sx(p.d)) << ',' << px(f.sy(p.metric)) << ' ';
  o << "\"/>\n";
  for (const auto& p : c.points) {
    o << "<circle r=\"3\" fill=\"#2c3e50\" cx=\"" << px(f.sx(p.d)) << "\" cy=\"" << px(f.sy(p.metric)) << "\"/>\n";
  }
  o << "<text x=\"" << px(kW - kRight) << "\" y=\"" << px(kTop + 10) << "\" text-anchor=\"end\" font-size=\"11\">"
    << "slope " << num(c.slope) << ", var " << num(c.variance) << ", r " << num(c.pearson_r) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

std::string bias_curve_csv(const biasprobe::BiasCurve& c) {
  std::string s = "d,metric\n";
  for (const auto& p : c.points) s += dataio::format_float(p.d) + "," + dataio::format_float(p.metric) + "\n";
  return s;
}

std::string uncertainty_hist_svg(std::span<const double> closed, std::span<const double> open, int bins,
                                 const std::string& title, const std::map<std::string, std::string>& meta) {
  const auto hc = histogram(closed, bins), ho = histogram(open, bins);
  double ymax = 0.0;
  for (double v : hc) ymax = std::max(ymax, v);
  for (double v : ho) ymax = std::max(ymax, v);
  Frame f{0.0, 1.0, 0.0, ymax > 0.0 ? ymax * 1.1 : 1.0};
  std::ostringstream o;
  header(o, title, meta);
  axes(o, f, "uncertainty u", "fraction");
  const double bw = 1.0 / bins;
  auto bars = [&](const std::vector<double>& h, const char* color) {
    for (int k = 0; k < bins; ++k) {
      const double v = h[static_cast<std::size_t>(k)];
      if (v <= 0.0) continue;
      o << "<rect fill=\"" << color << "\" fill-opacity=\"0.5\" x=\"" << px(f.sx(k * bw)) << "\" y=\""
        << px(f.sy(v)) << "\" width=\"" << px(f.sx(bw) - f.sx(0)) << "\" height=\"" << px(f.sy(0) - f.sy(v))
        << "\"/>\n";
    }
  };
  bars(hc, "#2980b9");
  bars(ho, "#e67e22");
  o << "<g font-size=\"11\"><rect x=\"" << px(kW - 120) << "\" y=\"" << px(kTop) << "\" width=\"10\" height=\"10\" "
    << "fill=\"#2980b9\" fill-opacity=\"0.5\"/><text x=\"" << px(kW - 105) << "\" y=\"" << px(kTop + 9)
    << "\">closed set</text><rect x=\"" << px(kW - 120) << "\" y=\"" << px(kTop + 14)
    << "\" width=\"10\" height=\"10\" fill=\"#e67e22\" fill-opacity=\"0.5\"/><text x=\"" << px(kW - 105)
    << "\" y=\"" << px(kTop + 23) << "\">open set</text></g>\n";
  o << "</svg>\n";
  return o.str();
}

std::string uncertainty_hist_csv(std::span<const double> closed, std::span<const double> open, int bins) {
  const auto hc = histogram(closed, bins), ho = histogram(open, bins);
  std::string s = "bin_lo,bin_hi,closed,open\n";
  for (int k = 0; k < bins; ++k) {
    s += dataio::format_float(static_cast<double>(k) / bins) + "," +
         dataio::format_float(static_cast<double>(k + 1) / bins) + "," +
         dataio::format_float(hc[static_cast<std::size_t>(k)]) + "," +
         dataio::format_float(ho[static_cast<std::size_t>(k)]) + "\n";
  }
  return s;
}

}  // namespace soar::plot
