// Copyright 2026 The Psycal Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "svg.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "psycal/errors.h"

namespace psycal::tools {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 480.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 160.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;

std::string Escape(const std::string& s) {
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

// Roughly five round tick values spanning [lo, hi].
std::vector<double> Ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {2.0, 5.0, 10.0}) {
    if (raw > step) step = m * mag;
  }
  std::vector<double> out;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step) {
    out.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  }
  return out;
}

}  // namespace

void WriteSvg(const Chart& chart, const std::filesystem::path& path) {
  double x0 = std::numeric_limits<double>::infinity();
  double x1 = -x0;
  double y0 = x0;
  double y1 = -x0;
  for (const Series& s : chart.series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double y = std::max(s.y[i], chart.y_floor);
      if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) {
    x0 = y0 = 0.0;
    x1 = y1 = 1.0;
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) y1 = y0 + 1.0;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ofstream out(path);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << Escape(chart.title) << "</text>\n"
      << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw
      << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : Ticks(x0, x1)) {
    out << "<line x1=\"" << px(t) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(t)
        << "\" y2=\"" << kTop + ph + 5 << "\" stroke=\"black\"/>"
        << "<text x=\"" << px(t) << "\" y=\"" << kTop + ph + 18
        << "\" text-anchor=\"middle\">" << t << "</text>\n";
  }
  for (double t : Ticks(y0, y1)) {
    out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(t) << "\" x2=\"" << kLeft
        << "\" y2=\"" << py(t) << "\" stroke=\"black\"/>"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4
        << "\" text-anchor=\"end\">" << t << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 10
      << "\" text-anchor=\"middle\">" << Escape(chart.x_label) << "</text>\n"
      << "<text transform=\"translate(16," << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << Escape(chart.y_label) << "</text>\n";

  double legend_y = kTop + 10;
  for (const Series& s : chart.series) {
    if (s.points) {
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\""
            << py(std::max(s.y[i], chart.y_floor)) << "\" r=\"3\" fill=\"" << s.color
            << "\"/>\n";
      }
    } else {
      out << "<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"" << s.color
          << "\" points=\"";
      for (std::size_t i = 0; i < s.x.size(); ++i) {
        out << px(s.x[i]) << ',' << py(std::max(s.y[i], chart.y_floor)) << ' ';
      }
      out << "\"/>\n";
    }
    out << "<rect x=\"" << kWidth - kRight + 12 << "\" y=\"" << legend_y - 8
        << "\" width=\"12\" height=\"8\" fill=\"" << s.color << "\"/>"
        << "<text x=\"" << kWidth - kRight + 30 << "\" y=\"" << legend_y << "\">"
        << Escape(s.label) << "</text>\n";
    legend_y += 16;
  }
  out << "</svg>\n";
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace psycal::tools
