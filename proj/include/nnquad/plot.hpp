#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nnquad {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  bool dashed = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
  bool equal_axes = false;  // same data scale on both axes (trajectory plots)
  int width = 640;
  int height = 420;
};

/// Line chart as standalone SVG text. Non-finite points are skipped.
std::string RenderSvg(const PlotSpec& spec);
void WriteSvg(const std::filesystem::path& path, const PlotSpec& spec);

}  // namespace nnquad
