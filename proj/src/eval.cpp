#include "hwgen/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "hwgen/error.hpp"

namespace hwgen {

namespace {

void mean_std(const std::vector<double>& v, double& mean, double& sd) {
  mean = sd = 0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  for (double x : v) sd += (x - mean) * (x - mean);
  sd = std::sqrt(sd / static_cast<double>(v.size()));
}

}  // namespace

StyleStats style_stats(std::span<const Tensor> styles, std::span<const std::string> authors) {
  if (styles.size() != authors.size()) throw UsageError("style_stats: styles and authors differ in length");
  if (styles.size() < 2) throw UsageError("style_stats: need at least two styles");
  std::map<std::string, int> distinct;
  for (const auto& a : authors) ++distinct[a];
  if (distinct.size() < 2) throw UsageError("style_stats: need at least two authors");
  std::vector<double> intra, inter;
  for (std::size_t i = 0; i < styles.size(); ++i) {
    for (std::size_t j = i + 1; j < styles.size(); ++j) {
      if (styles[i].shape() != styles[j].shape()) throw ShapeError("style_stats: style dimensions differ");
      double d = 0;
      for (std::size_t k = 0; k < styles[i].size(); ++k) {
        const double e = double(styles[i][k]) - styles[j][k];
        d += e * e;
      }
      (authors[i] == authors[j] ? intra : inter).push_back(std::sqrt(d));
    }
  }
  StyleStats s;
  mean_std(intra, s.intra_mean, s.intra_std);
  mean_std(inter, s.inter_mean, s.inter_std);
  s.intra_pairs = static_cast<long>(intra.size());
  s.inter_pairs = static_cast<long>(inter.size());
  return s;
}

int edit_distance(std::span<const int> a, std::span<const int> b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double cer(std::span<const std::vector<int>> hypotheses, std::span<const std::vector<int>> references) {
  if (hypotheses.size() != references.size()) throw UsageError("cer: hypothesis/reference count mismatch");
  long errors = 0, total = 0;
  for (std::size_t i = 0; i < references.size(); ++i) {
    errors += edit_distance(hypotheses[i], references[i]);
    total += static_cast<long>(references[i].size());
  }
  if (total == 0) throw UsageError("cer: references are empty");
  return static_cast<double>(errors) / static_cast<double>(total);
}

double legibility_cer(std::span<const Tensor> images, std::span<const std::vector<int>> texts,
                      const Recognizer& r) {
  if (images.size() != texts.size()) throw UsageError("legibility_cer: image/text count mismatch");
  std::vector<std::vector<int>> hyps;
  for (const auto& img : images) hyps.push_back(greedy_decode(r.posteriors(img)).labels);
  return cer(hyps, texts);
}

std::vector<int> width_variability(std::span<const int> labels, std::span<const Tensor> styles,
                                   const Model& model) {
  std::vector<int> widths;
  for (const auto& s : styles) {
    SpacingTargets t = predict_spacing(*model.C, labels, s, model.alphabet.num_classes());
    widths.push_back(static_cast<int>(render_spaced(labels, t).size()) * model.config.px_per_pos);
  }
  return widths;
}

PcaResult pca_project(std::span<const Tensor> styles) {
  if (styles.size() < 3) throw UsageError("pca_project: need at least three styles");
  const int n = static_cast<int>(styles.size());
  const int d = static_cast<int>(styles[0].size());
  Eigen::MatrixXd x(n, d);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(styles[i].size()) != d) throw ShapeError("pca_project: style dimensions differ");
    for (int k = 0; k < d; ++k) x(i, k) = styles[i][k];
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;
  const Eigen::MatrixXd cov = x.transpose() * x / n;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("pca_project: eigen-decomposition failed");
  PcaResult r;
  const Eigen::VectorXd vals = eig.eigenvalues();  // ascending
  for (int k = d - 1; k >= 0; --k) r.eigenvalues.push_back(std::max(0.0, vals(k)));
  for (int k = 0; k < d; ++k) r.mean.push_back(mu(k));
  const Eigen::VectorXd a1 = eig.eigenvectors().col(d - 1);
  const Eigen::VectorXd a2 = d > 1 ? Eigen::VectorXd(eig.eigenvectors().col(d - 2)) : Eigen::VectorXd::Zero(d);
  const double top = r.eigenvalues[0];
  const bool second = d > 1 && r.eigenvalues[1] > 1e-12 * std::max(top, 1e-300);
  for (int i = 0; i < n; ++i) {
    r.coords.push_back({x.row(i).dot(a1), second ? x.row(i).dot(a2) : 0.0});
  }
  return r;
}

void write_scatter_svg(const std::filesystem::path& path, std::span<const std::array<double, 2>> points,
                       std::span<const std::string> labels, const std::string& title) {
  if (points.size() != labels.size()) throw UsageError("scatter: point/label count mismatch");
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (const auto& p : points) {
    x0 = std::min(x0, p[0]);
    x1 = std::max(x1, p[0]);
    y0 = std::min(y0, p[1]);
    y1 = std::max(y1, p[1]);
  }
  if (points.empty()) x0 = y0 = 0, x1 = y1 = 1;
  const double sx = x1 > x0 ? 440 / (x1 - x0) : 1, sy = y1 > y0 ? 440 / (y1 - y0) : 1;
  static const char* palette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a",
                                  "#66a61e", "#e6ab02", "#a6761d", "#666666"};
  std::map<std::string, int> colour;
  for (const auto& l : labels) colour.emplace(l, static_cast<int>(colour.size()));
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"600\" height=\"520\">\n"
      << "<rect width=\"600\" height=\"520\" fill=\"white\"/>\n"
      << "<text x=\"20\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double px = 30 + (points[i][0] - x0) * sx, py = 490 - (points[i][1] - y0) * sy;
    out << "<circle cx=\"" << px << "\" cy=\"" << py << "\" r=\"4\" fill=\""
        << palette[colour[labels[i]] % 8] << "\"/>\n";
  }
  int row = 0;
  for (const auto& [l, c] : colour) {
    out << "<text x=\"490\" y=\"" << 40 + 16 * row++ << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\""
        << palette[c % 8] << "\">" << l << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace hwgen
