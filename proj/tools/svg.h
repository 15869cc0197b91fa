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

#ifndef PSYCAL_TOOLS_SVG_H_
#define PSYCAL_TOOLS_SVG_H_

#include <filesystem>
#include <string>
#include <vector>

namespace psycal::tools {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
  // Markers instead of a connected line.
  bool points = false;
};

struct Chart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  // Values below this are clipped to it; keeps -200 dB floors off the plot.
  double y_floor = -1e300;
};

// Plain polyline chart with axes, ticks and a legend.
void WriteSvg(const Chart& chart, const std::filesystem::path& path);

}  // namespace psycal::tools

#endif  // PSYCAL_TOOLS_SVG_H_
