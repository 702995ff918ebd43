#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hwgen/networks.hpp"
#include "hwgen/tensor.hpp"

namespace hwgen {

struct StyleStats {
  double intra_mean = 0, intra_std = 0;
  double inter_mean = 0, inter_std = 0;
  long intra_pairs = 0, inter_pairs = 0;
};

// Exhaustive pairwise L2 distances split by same/different author.
// Standard deviations are population deviations.
StyleStats style_stats(std::span<const Tensor> styles, std::span<const std::string> authors);

int edit_distance(std::span<const int> a, std::span<const int> b);
// Total edit distance over total reference length.
double cer(std::span<const std::vector<int>> hypotheses, std::span<const std::vector<int>> references);

// Greedy-decodes every image with R and scores it against its text.
double legibility_cer(std::span<const Tensor> images, std::span<const std::vector<int>> texts,
                      const Recognizer& r);

// Width of G's output for `labels` under each style: C predicts spacing,
// the rendered spaced text fixes the width.
std::vector<int> width_variability(std::span<const int> labels, std::span<const Tensor> styles,
                                   const Model& model);

struct PcaResult {
  std::vector<std::array<double, 2>> coords;
  std::vector<double> eigenvalues;  // covariance eigenvalues, descending
  std::vector<double> mean;
};

// Projection onto the top two principal axes of the (1/n) covariance. When
// the second eigenvalue is negligible its coordinates are exactly zero.
PcaResult pca_project(std::span<const Tensor> styles);

// Scatter plot of 2D points coloured by label.
void write_scatter_svg(const std::filesystem::path& path,
                       std::span<const std::array<double, 2>> points,
                       std::span<const std::string> labels, const std::string& title);

}  // namespace hwgen
