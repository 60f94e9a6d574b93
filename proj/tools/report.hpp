// Copyright 2026 The biscc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// SVG traces of attention and class activation along a video.

#ifndef BISCC_TOOLS_REPORT_HPP_
#define BISCC_TOOLS_REPORT_HPP_

#include <algorithm>
#include <string>
#include <vector>

#include <spdlog/fmt/fmt.h>

#include "biscc/network.hpp"

namespace biscc::report {

struct Trace {
  std::string title;
  std::vector<double> attention;
  /// Highest action-class probability of softmax(S̄) per segment.
  std::vector<double> action_prob;
};

inline Trace make_trace(std::string title, const ModelParams& model,
                        const VideoSample& video) {
  const TCamValues out = infer(model, video.features);
  const Matrix probs = softmax_rows_value(out.s_bar);
  Trace tr;
  tr.title = std::move(title);
  for (Eigen::Index t = 0; t < probs.rows(); ++t) {
    tr.attention.push_back(out.a(t, 0));
    tr.action_prob.push_back(probs.row(t).head(probs.cols() - 1).maxCoeff());
  }
  return tr;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// One panel per trace, stacked vertically. Ground-truth actions are shaded
/// green and co-scene segments grey behind the two curves.
inline std::string render_svg(const VideoSample& video,
                              const std::vector<Trace>& traces) {
  constexpr double kWidth = 720.0;
  constexpr double kPanel = 160.0;
  constexpr double kLeft = 40.0;
  constexpr double kTop = 28.0;
  constexpr double kGap = 36.0;
  const int t_len = video.num_segments();
  const double plot_w = kWidth - kLeft - 16.0;
  const double step = t_len > 0 ? plot_w / t_len : plot_w;
  const double height =
      kTop + static_cast<double>(traces.size()) * (kPanel + kGap) + 8.0;

  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0f}\" "
      "height=\"{:.0f}\" viewBox=\"0 0 {:.0f} {:.0f}\" "
      "font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{:.1f}\" y=\"16\" font-size=\"13\">{}</text>\n",
      kWidth, height, kWidth, height, kLeft, escape(video.id));

  for (std::size_t p = 0; p < traces.size(); ++p) {
    const Trace& tr = traces[p];
    const double y0 = kTop + static_cast<double>(p) * (kPanel + kGap) + 14.0;
    auto x_of = [&](double t) { return kLeft + t * step; };
    auto y_of = [&](double v) { return y0 + kPanel * (1.0 - v); };

    svg += fmt::format("<g class=\"panel\">\n<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n",
                       kLeft, y0 - 4.0, escape(tr.title));
    for (const auto& c : video.coscene_segments) {
      svg += fmt::format(
          "<rect class=\"coscene\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" "
          "height=\"{:.2f}\" fill=\"#bbbbbb\" fill-opacity=\"0.4\"/>\n",
          x_of(c.start), y0, c.length() * step, kPanel);
    }
    for (const auto& g : video.gt_segments) {
      svg += fmt::format(
          "<rect class=\"gt\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" "
          "height=\"{:.2f}\" fill=\"#4caf50\" fill-opacity=\"0.25\"/>\n"
          "<text x=\"{:.2f}\" y=\"{:.2f}\" fill=\"#2e7d32\">c{}</text>\n",
          x_of(g.start), y0, g.length() * step, kPanel, x_of(g.start) + 2.0,
          y0 + 12.0, g.cls);
    }
    svg += fmt::format(
        "<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
        "fill=\"none\" stroke=\"#333333\"/>\n"
        "<text x=\"4\" y=\"{:.2f}\">1</text><text x=\"4\" y=\"{:.2f}\">0</text>\n",
        kLeft, y0, plot_w, kPanel, y0 + 10.0, y0 + kPanel);

    auto polyline = [&](const std::vector<double>& v, const char* cls,
                        const char* color) {
      std::string pts;
      for (std::size_t t = 0; t < v.size(); ++t) {
        const double clamped = std::clamp(v[t], 0.0, 1.0);
        pts += fmt::format("{:.2f},{:.2f} ", x_of(static_cast<double>(t) + 0.5),
                           y_of(clamped));
      }
      if (!pts.empty()) pts.pop_back();
      return fmt::format(
          "<polyline class=\"{}\" fill=\"none\" stroke=\"{}\" "
          "stroke-width=\"1.5\" points=\"{}\"/>\n",
          cls, color, pts);
    };
    svg += polyline(tr.attention, "attention", "#1f77b4");
    svg += polyline(tr.action_prob, "action-prob", "#d62728");
    svg += "</g>\n";
  }
  svg += fmt::format(
      "<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#1f77b4\">attention A(t)</text>\n"
      "<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"#d62728\">max action prob of "
      "softmax(A*S)</text>\n</svg>\n",
      kWidth - 330.0, 16.0, kWidth - 230.0, 16.0);
  return svg;
}

}  // namespace biscc::report

#endif  // BISCC_TOOLS_REPORT_HPP_
