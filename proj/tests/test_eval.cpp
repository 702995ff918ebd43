#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unistd.h>

#include "doctest.h"
#include "hwgen/error.hpp"
#include "hwgen/eval.hpp"

using namespace hwgen;

namespace {

Tensor vec(std::initializer_list<Real> v) { return Tensor::from(v); }

// Cyclic Jacobi rotations on a symmetric matrix; returns eigenvalues.
std::vector<double> jacobi_eigenvalues(std::vector<std::vector<double>> a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2 * a[p][q]);
        const double t = (theta >= 0 ? 1 : -1) / (std::abs(theta) + std::sqrt(theta * theta + 1));
        const double c = 1 / std::sqrt(t * t + 1), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev;
  for (std::size_t i = 0; i < n; ++i) ev.push_back(a[i][i]);
  std::sort(ev.rbegin(), ev.rend());
  return ev;
}

}  // namespace

TEST_CASE("style_stats") {
  SUBCASE("identical styles") {
    std::vector<Tensor> s(4, vec({1, 2, 3}));
    std::vector<std::string> a{"x", "x", "y", "y"};
    StyleStats st = style_stats(s, a);
    CHECK(st.intra_mean == 0);
    CHECK(st.inter_mean == 0);
    CHECK(st.intra_pairs == 2);
    CHECK(st.inter_pairs == 4);
  }
  SUBCASE("two tight clusters") {
    std::vector<Tensor> s{vec({0, 0}), vec({0, 0}), vec({3, 4}), vec({3, 4})};
    std::vector<std::string> a{"x", "x", "y", "y"};
    StyleStats st = style_stats(s, a);
    CHECK(st.intra_mean == 0);
    CHECK(st.intra_std == 0);
    CHECK(st.inter_mean == doctest::Approx(5));
    CHECK(st.inter_std == doctest::Approx(0));
  }
  SUBCASE("population deviation") {
    std::vector<Tensor> s{vec({0}), vec({1}), vec({3})};
    std::vector<std::string> a{"x", "x", "y"};
    StyleStats st = style_stats(s, a);
    // inter distances 3 and 2
    CHECK(st.inter_mean == doctest::Approx(2.5));
    CHECK(st.inter_std == doctest::Approx(0.5));
    CHECK(st.intra_mean == doctest::Approx(1));
  }
  SUBCASE("order does not matter") {
    std::vector<Tensor> s{vec({0, 1}), vec({2, 1}), vec({5, -1}), vec({4, 4}), vec({0, 3})};
    std::vector<std::string> a{"p", "q", "p", "r", "q"};
    StyleStats ref = style_stats(s, a);
    std::vector<int> perm{3, 0, 4, 2, 1};
    std::vector<Tensor> s2;
    std::vector<std::string> a2;
    for (int i : perm) {
      s2.push_back(s[i]);
      a2.push_back(a[i]);
    }
    StyleStats st = style_stats(s2, a2);
    CHECK(st.intra_mean == doctest::Approx(ref.intra_mean).epsilon(1e-12));
    CHECK(st.inter_mean == doctest::Approx(ref.inter_mean).epsilon(1e-12));
    CHECK(st.inter_std == doctest::Approx(ref.inter_std).epsilon(1e-12));
  }
  SUBCASE("errors") {
    std::vector<Tensor> one{vec({1})};
    std::vector<std::string> a1{"x"};
    CHECK_THROWS_AS(style_stats(one, a1), UsageError);
    std::vector<Tensor> two{vec({1}), vec({2})};
    std::vector<std::string> same{"x", "x"};
    CHECK_THROWS_AS(style_stats(two, same), UsageError);
  }
}

TEST_CASE("cer") {
  using V = std::vector<std::vector<int>>;
  CHECK(cer(V{{1, 2, 3}}, V{{1, 2, 3}}) == 0);
  CHECK(cer(V{{}}, V{{1, 2, 3}}) == 1.0);
  // "hello" vs "helo"
  CHECK(cer(V{{8, 5, 12, 15}}, V{{8, 5, 12, 12, 15}}) == doctest::Approx(0.2));
  CHECK(cer(V{{1}, {2, 2}}, V{{1}, {2}}) == doctest::Approx(0.5));
  CHECK(edit_distance(std::vector<int>{1, 2, 3}, std::vector<int>{3, 2, 1}) == 2);
  CHECK_THROWS_AS(cer(V{{1}}, V{{}}), UsageError);
}

TEST_CASE("width_variability") {
  Model model(ModelConfig::desk(), 3);
  std::vector<int> labels = model.alphabet.encode("a good day");
  NoiseSource rng(5);
  std::vector<Tensor> styles;
  for (int i = 0; i < 5; ++i) {
    Tensor s(Shape{model.config.style_dim});
    rng.fill_normal(s);
    styles.push_back(s);
  }
  auto w = width_variability(labels, styles, model);
  REQUIRE(w.size() == 5);
  for (int x : w) {
    CHECK(x % model.config.px_per_pos == 0);
    CHECK(x >= static_cast<int>(labels.size()) * model.config.px_per_pos);
  }
  CHECK(width_variability(labels, styles, model) == w);
}

TEST_CASE("pca_project") {
  SUBCASE("known principal axes") {
    // Points a_i u + b_i v + mu with orthonormal u, v; a, b zero-mean and
    // uncorrelated, so the eigenvalues are mean(a^2) and mean(b^2).
    const double s = 1 / std::sqrt(2.0);
    const std::vector<double> u{s, s, 0, 0, 0}, v{0, 0, 0, 0.6, 0.8}, mu{1, -2, 3, 0.5, 7};
    const std::vector<double> a{3, -3, 1, -1}, b{1, 1, -1, -1};
    std::vector<Tensor> styles;
    for (int i = 0; i < 4; ++i) {
      Tensor t(Shape{5});
      for (int k = 0; k < 5; ++k) t[k] = static_cast<Real>(mu[k] + a[i] * u[k] + b[i] * v[k]);
      styles.push_back(t);
    }
    PcaResult r = pca_project(styles);
    REQUIRE(r.eigenvalues.size() == 5);
    CHECK(r.eigenvalues[0] == doctest::Approx(5.0));
    CHECK(r.eigenvalues[1] == doctest::Approx(1.0));
    for (int k = 2; k < 5; ++k) CHECK(std::abs(r.eigenvalues[k]) < 1e-10);
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(r.coords[i][0]) == doctest::Approx(std::abs(a[i])));
      CHECK(std::abs(r.coords[i][1]) == doctest::Approx(std::abs(b[i])));
    }
    for (int k = 0; k < 5; ++k) CHECK(r.mean[k] == doctest::Approx(mu[k]));
  }
  SUBCASE("variance bookkeeping on random data") {
    NoiseSource rng(8);
    std::vector<Tensor> styles;
    for (int i = 0; i < 30; ++i) {
      Tensor t(Shape{6});
      rng.fill_normal(t);
      t[0] *= 4;
      t[3] *= 2;
      styles.push_back(t);
    }
    PcaResult r = pca_project(styles);
    // Total variance from the data directly.
    double total = 0;
    for (int k = 0; k < 6; ++k) {
      double m = 0, q = 0;
      for (const auto& t : styles) m += t[k];
      m /= 30;
      for (const auto& t : styles) q += (t[k] - m) * (t[k] - m);
      total += q / 30;
    }
    CHECK(std::accumulate(r.eigenvalues.begin(), r.eigenvalues.end(), 0.0) == doctest::Approx(total));
    double c1 = 0, c2 = 0, c12 = 0;
    for (const auto& c : r.coords) {
      c1 += c[0] * c[0];
      c2 += c[1] * c[1];
      c12 += c[0] * c[1];
    }
    // Independent eigen-decomposition of the same covariance.
    std::vector<double> mu(6, 0);
    for (const auto& t : styles)
      for (int k = 0; k < 6; ++k) mu[k] += t[k] / 30.0;
    std::vector<std::vector<double>> cov(6, std::vector<double>(6, 0));
    for (const auto& t : styles)
      for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) cov[i][j] += (t[i] - mu[i]) * (t[j] - mu[j]) / 30.0;
    const auto oracle = jacobi_eigenvalues(cov);
    for (int k = 0; k < 6; ++k) CHECK(r.eigenvalues[k] == doctest::Approx(oracle[k]).epsilon(1e-9));
    // Residual after projecting onto the top two axes.
    double resid = 0;
    for (std::size_t i = 0; i < styles.size(); ++i) {
      double norm2 = 0;
      for (int k = 0; k < 6; ++k) norm2 += (styles[i][k] - mu[k]) * (styles[i][k] - mu[k]);
      resid += norm2 - r.coords[i][0] * r.coords[i][0] - r.coords[i][1] * r.coords[i][1];
    }
    CHECK(resid / 30 == doctest::Approx(oracle[2] + oracle[3] + oracle[4] + oracle[5]).epsilon(1e-9));
    CHECK(c1 / 30 == doctest::Approx(r.eigenvalues[0]));
    CHECK(c2 / 30 == doctest::Approx(r.eigenvalues[1]));
    CHECK(std::abs(c12 / 30) < 1e-9);
    CHECK(r.eigenvalues[0] >= r.eigenvalues[1]);
  }
  SUBCASE("ordering along the dominant axis is preserved") {
    std::vector<Tensor> styles;
    for (double t : {-3.0, -1.0, 0.5, 2.0, 4.0}) styles.push_back(vec({Real(1 + 2 * t), Real(-t), Real(0.5 * t)}));
    PcaResult r = pca_project(styles);
    const double sign = r.coords[4][0] > r.coords[0][0] ? 1 : -1;
    for (std::size_t i = 0; i + 1 < styles.size(); ++i) CHECK(sign * r.coords[i][0] < sign * r.coords[i + 1][0]);
  }
  SUBCASE("collinear styles have a zero second coordinate") {
    std::vector<Tensor> styles{vec({0, 0, 0}), vec({1, 2, 3}), vec({2, 4, 6}), vec({-1, -2, -3})};
    PcaResult r = pca_project(styles);
    for (const auto& c : r.coords) CHECK(c[1] == 0.0);
  }
  SUBCASE("too few styles") {
    std::vector<Tensor> styles{vec({0}), vec({1})};
    CHECK_THROWS_AS(pca_project(styles), UsageError);
  }
}

TEST_CASE("scatter svg") {
  auto path = std::filesystem::temp_directory_path() / ("hwgen_test_eval_" + std::to_string(getpid())) / "p.svg";
  std::vector<std::array<double, 2>> pts{{0, 0}, {1, 2}, {3, 1}};
  std::vector<std::string> labels{"a", "b", "a"};
  write_scatter_svg(path, pts, labels, "styles");
  std::ifstream in(path);
  std::string body{std::istreambuf_iterator<char>(in), {}};
  CHECK(body.find("<svg") != std::string::npos);
  CHECK(body.find("<circle") != std::string::npos);
  std::filesystem::remove_all(path.parent_path());
}
