#pragma once

#include <array>
#include <string>
#include <vector>

#include "emf/tensor.hpp"

namespace emf {

// shortest round-trip decimal form used everywhere numbers hit disk
std::string format_g17(double v);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

// header + rows, comma separated, '\n' line ends; cells are written verbatim
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// scatter plot with axes, tick labels and (for labeled points) a legend;
// legend_names override the default "class i" entries; output is a pure
// function of the arguments
void write_scatter_svg(const std::string& path, const Tensor& pts, const std::vector<int>& labels,
                       const std::array<double, 4>& bounds, const std::string& title,
                       const std::vector<std::string>& legend_names = {});

} // namespace emf
