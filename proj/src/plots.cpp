#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "zdsc/cli_io.hpp"
#include "zdsc/errors.hpp"

namespace zdsc {

namespace fs = std::filesystem;

namespace {

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error("csv column '" + name + "' missing");
    return static_cast<std::size_t>(it - header.begin());
  }
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

Csv read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  Csv csv;
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + " is empty");
  csv.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) csv.rows.push_back(split(line));
  }
  return csv;
}

double to_d(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// Minimal SVG canvas with a linear data-to-pixel map.
class Svg {
 public:
  Svg(double x0, double x1, double y0, double y1) : x0_(x0), x1_(x1), y0_(y0), y1_(y1) {
    if (!(x1_ > x0_)) x1_ = x0_ + 1.0;
    if (!(y1_ > y0_)) y1_ = y0_ + 1.0;
  }

  double px(double x) const { return kLeft + (x - x0_) / (x1_ - x0_) * kPlotW; }
  double py(double y) const { return kTop + (y1_ - y) / (y1_ - y0_) * kPlotH; }

  void polyline(const std::vector<double>& xs, const std::vector<double>& ys,
                const std::string& color, double width, const std::string& dash = "") {
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << width << '"';
    if (!dash.empty()) body_ << " stroke-dasharray=\"" << dash << '"';
    body_ << " points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) body_ << fmt(px(xs[i])) << ',' << fmt(py(ys[i])) << ' ';
    body_ << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& color, double opacity = 1.0) {
    body_ << "<circle cx=\"" << fmt(px(x)) << "\" cy=\"" << fmt(py(y)) << "\" r=\"" << fmt(r)
          << "\" fill=\"" << color << "\" fill-opacity=\"" << opacity << "\"/>\n";
  }

  void cell(double x, double y, double w, double h, const std::string& color) {
    body_ << "<rect x=\"" << fmt(px(x)) << "\" y=\"" << fmt(py(y + h)) << "\" width=\""
          << fmt(px(x + w) - px(x) + 0.5) << "\" height=\"" << fmt(py(y) - py(y + h) + 0.5)
          << "\" fill=\"" << color << "\"/>\n";
  }

  void legend(const std::string& label, const std::string& color, std::size_t slot) {
    const double y = kTop + 14.0 + 16.0 * static_cast<double>(slot);
    body_ << "<rect x=\"" << kLeft + 10 << "\" y=\"" << y - 9 << "\" width=\"12\" height=\"4\" fill=\""
          << color << "\"/><text x=\"" << kLeft + 28 << "\" y=\"" << y
          << "\" font-size=\"11\">" << label << "</text>\n";
  }

  std::string str(const std::string& title, const std::string& xlabel,
                  const std::string& ylabel) const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
        << kHeight << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n"
        << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kPlotW << "\" height=\""
        << kPlotH << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
      const double fx = x0_ + (x1_ - x0_) * t / 5.0;
      const double fy = y0_ + (y1_ - y0_) * t / 5.0;
      out << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << kTop + kPlotH + 16
          << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt(fx) << "</text>\n"
          << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(py(fy) + 3)
          << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(fy) << "</text>\n";
    }
    out << "<text x=\"" << kLeft + kPlotW / 2 << "\" y=\"" << kHeight - 8
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n"
        << "<text x=\"14\" y=\"" << kTop + kPlotH / 2 << "\" text-anchor=\"middle\" font-size=\"12\" "
        << "transform=\"rotate(-90 14 " << kTop + kPlotH / 2 << ")\">" << ylabel << "</text>\n";
    out << "<g>\n" << body_.str() << "</g>\n</svg>\n";
    return out.str();
  }

 private:
  static constexpr double kWidth = 640;
  static constexpr double kHeight = 480;
  static constexpr double kLeft = 60;
  static constexpr double kTop = 32;
  static constexpr double kPlotW = 560;
  static constexpr double kPlotH = 400;
  double x0_, x1_, y0_, y1_;
  std::ostringstream body_;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string palette(std::size_t i) { return kPalette[i % std::size(kPalette)]; }

std::string encoder_svg(const Csv& csv) {
  const std::size_t cx = csv.column("x");
  const std::size_t ch = csv.column("g_hard");
  const std::size_t ca = csv.column("g_avg");
  std::vector<double> x, hard, avg;
  for (const auto& r : csv.rows) {
    x.push_back(to_d(r[cx]));
    hard.push_back(to_d(r[ch]));
    avg.push_back(to_d(r[ca]));
  }
  const std::size_t k = (csv.header.size() - 3) / 3;
  double lo = 0.0, hi = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo = std::min({lo, hard[i], avg[i]});
    hi = std::max({hi, hard[i], avg[i]});
  }
  Svg svg(x.front(), x.back(), lo, hi);
  // Local models as dots whose radius follows the association probability.
  for (std::size_t m = 0; m < k; ++m) {
    const std::size_t base = 3 + 3 * m;
    for (std::size_t i = 0; i < x.size(); i += 2) {
      const double p = to_d(csv.rows[i][base]);
      if (p < 0.02) continue;
      const double g = to_d(csv.rows[i][base + 1]) * x[i] + to_d(csv.rows[i][base + 2]);
      if (g < lo || g > hi) continue;
      svg.circle(x[i], g, 3.0 * p, palette(m + 2), 0.6);
    }
  }
  svg.polyline(x, avg, "black", 1.2, "4,3");
  svg.polyline(x, hard, palette(0), 1.6);
  svg.legend("hardened", palette(0), 0);
  svg.legend("averaged", "black", 1);
  return svg.str("Encoder mapping (K = " + std::to_string(std::max<std::size_t>(k, 1)) + ")",
                 "x", "g(x)");
}

std::string heat(double t) {
  // Diverging blue-white-red map on t in [0, 1].
  t = std::clamp(t, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double s = t / 0.5;
    r = static_cast<int>(40 + 215 * s);
    g = static_cast<int>(80 + 175 * s);
    b = 255;
  } else {
    const double s = (t - 0.5) / 0.5;
    r = 255;
    g = static_cast<int>(255 - 175 * s);
    b = static_cast<int>(255 - 215 * s);
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

std::string decoder_svg(const Csv& csv) {
  const std::size_t cy = csv.column("y");
  const std::size_t cz = csv.column("z");
  const std::size_t cw = csv.column("xhat");
  std::vector<double> ys, zs;
  double wlo = 0.0, whi = 0.0;
  for (const auto& r : csv.rows) {
    const double y = to_d(r[cy]);
    const double z = to_d(r[cz]);
    if (ys.empty() || ys.back() != y) ys.push_back(y);
    if (ys.size() == 1) zs.push_back(z);
    wlo = std::min(wlo, to_d(r[cw]));
    whi = std::max(whi, to_d(r[cw]));
  }
  if (ys.size() < 2 || zs.size() < 2) throw Error("decoder table too small to plot");
  const double dy = ys[1] - ys[0];
  const double dz = zs[1] - zs[0];
  Svg svg(ys.front() - dy / 2, ys.back() + dy / 2, zs.front() - dz / 2, zs.back() + dz / 2);
  const double span = std::max(std::abs(wlo), std::abs(whi));
  for (std::size_t j = 0; j < ys.size(); ++j) {
    for (std::size_t m = 0; m < zs.size(); ++m) {
      const double w = to_d(csv.rows[j * zs.size() + m][cw]);
      svg.cell(ys[j] - dy / 2, zs[m] - dz / 2, dy, dz, heat(0.5 + 0.5 * w / span));
    }
  }
  return svg.str("Decoder estimate (range " + fmt(wlo) + " to " + fmt(whi) + ")", "y", "z");
}

std::string curve_svg(const Csv& csv) {
  const std::size_t cm = csv.column("method");
  const std::size_t cc = csv.column("csnr_db");
  const std::size_t cs = csv.column("snr_db");
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  double xlo = 1e300, xhi = -1e300, ylo = 1e300, yhi = -1e300;
  for (const auto& r : csv.rows) {
    if (r.size() <= cs || r[cs].empty()) continue;
    const double c = to_d(r[cc]);
    const double s = to_d(r[cs]);
    series[r[cm]].emplace_back(c, s);
    xlo = std::min(xlo, c);
    xhi = std::max(xhi, c);
    ylo = std::min(ylo, s);
    yhi = std::max(yhi, s);
  }
  if (series.empty()) throw Error("curve has no completed points");
  const double pad = 0.05 * std::max(yhi - ylo, 1.0);
  Svg svg(xlo - 0.5, xhi + 0.5, ylo - pad, yhi + pad);
  std::size_t slot = 0;
  for (auto& [name, pts] : series) {
    std::sort(pts.begin(), pts.end());
    const std::string color = palette(slot);
    const bool scatter = name == "ncr" || name == "greedy";
    if (!scatter) {
      std::vector<double> xs, ys;
      for (const auto& [c, s] : pts) {
        xs.push_back(c);
        ys.push_back(s);
      }
      svg.polyline(xs, ys, color, 1.6);
    }
    for (const auto& [c, s] : pts) svg.circle(c, s, scatter ? 2.5 : 3.5, color);
    svg.legend(name, color, slot++);
  }
  return svg.str("SNR versus CSNR", "CSNR (dB)", "SNR (dB)");
}

}  // namespace

std::vector<fs::path> emit_plots(const fs::path& dir) {
  std::vector<fs::path> out;
  const auto emit = [&](const char* input, const char* output, std::string (*render)(const Csv&)) {
    const fs::path in = dir / input;
    if (!fs::exists(in)) return;
    write_atomic(dir / output, render(read_csv(in)));
    out.push_back(dir / output);
  };
  emit("encoder.csv", "encoder.svg", encoder_svg);
  emit("decoder.csv", "decoder.svg", decoder_svg);
  emit("curve.csv", "curve.svg", curve_svg);
  if (out.empty()) throw Error("no plot inputs in " + dir.string());
  return out;
}

}  // namespace zdsc
