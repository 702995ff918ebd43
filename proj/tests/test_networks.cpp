#include <cmath>
#include <set>

#include "doctest.h"
#include "hwgen/error.hpp"
#include "hwgen/networks.hpp"
#include "hwgen/ops.hpp"

using namespace hwgen;

namespace {

Tensor random_style(int dim, std::uint64_t seed) {
  NoiseSource rng(seed);
  Tensor t(Shape{dim});
  rng.fill_normal(t);
  return t;
}

Tensor random_image(int h, int w, std::uint64_t seed) {
  NoiseSource rng(seed);
  Tensor t(Shape{1, h, w});
  for (auto& v : t.values()) v = static_cast<Real>(rng.uniform());
  return t;
}

SpacedText cycle_tokens(int len, int classes) {
  SpacedText s;
  for (int i = 0; i < len; ++i) s.tokens.push_back(i % classes);
  return s;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
  return m;
}

}  // namespace

TEST_CASE("model config presets and serialization") {
  ModelConfig paper = ModelConfig::paper();
  CHECK(paper.height == 64);
  CHECK(paper.px_per_pos == 8);
  CHECK(paper.style_dim == 128);
  CHECK(paper.window == 5);
  ModelConfig desk = ModelConfig::desk();
  CHECK(desk.height == 32);
  CHECK(desk.px_per_pos == 4);
  CHECK(desk.g_base * 4 == paper.g_base);

  auto back = ModelConfig::from_map(desk.to_map());
  CHECK(back.to_map() == desk.to_map());
  auto m = desk.to_map();
  m["bogus"] = "1";
  CHECK_THROWS_AS(ModelConfig::from_map(m), UsageError);
  m = desk.to_map();
  m["px_per_pos"] = "3";
  CHECK_THROWS_AS(ModelConfig::from_map(m), UsageError);
  m = desk.to_map();
  m["height"] = "abc";
  CHECK_THROWS_AS(ModelConfig::from_map(m), UsageError);
}

TEST_CASE("parameter ids are unique across the model") {
  Model model(ModelConfig::desk(), 1);
  std::set<std::string> ids;
  for (ParamSet* ps : model.all_param_sets()) {
    for (Parameter* p : ps->all()) CHECK(ids.insert(p->id).second);
  }
  for (Parameter* p : model.E->aux_params().all()) CHECK(ids.insert(p->id).second);
}

TEST_CASE("generator") {
  SUBCASE("paper preset: L=10 gives a 1x64x80 image") {
    Model model(ModelConfig::paper(), 2);
    const int k = model.alphabet.num_classes();
    Var img = (*model.G)(constant(one_hot(cycle_tokens(10, k), k)), constant(random_style(128, 1)), 3);
    CHECK(img.shape() == Shape{1, 64, 80});
  }
  Model model(ModelConfig::desk(), 2);
  const int k = model.alphabet.num_classes();
  const Tensor oh = one_hot(cycle_tokens(10, k), k);
  const Tensor style = random_style(128, 1);
  Var a = (*model.G)(constant(oh), constant(style), 3);
  CHECK(a.shape() == Shape{1, 32, 40});
  for (Real v : a.value().values()) {
    CHECK(v > 0);
    CHECK(v < 1);
  }
  SUBCASE("deterministic given the seed") {
    CHECK((*model.G)(constant(oh), constant(style), 3).value() == a.value());
  }
  SUBCASE("width depends only on the spaced-text length") {
    for (int len : {1, 3, 17}) {
      Var img = (*model.G)(constant(one_hot(cycle_tokens(len, k), k)), constant(random_style(128, len)), 0);
      CHECK(img.dim(2) == 4 * len);
    }
  }
  SUBCASE("one style coordinate reaches the output") {
    Tensor other = style;
    other[7] += 1;
    CHECK(max_abs_diff((*model.G)(constant(oh), constant(other), 3).value(), a.value()) > 1e-6);
  }
  SUBCASE("noise starts disabled, so the seed does not matter at init") {
    CHECK((*model.G)(constant(oh), constant(style), 99).value() == a.value());
  }
  SUBCASE("style dimension mismatch") {
    CHECK_THROWS_AS((*model.G)(constant(oh), constant(random_style(64, 1)), 3), ShapeError);
  }
}

TEST_CASE("style extractor") {
  Model model(ModelConfig::desk(), 4);
  const Tensor img = random_image(32, 80, 5);
  std::vector<CharInstance> inst{{1, 2, 0.5}, {3, 7, 0.5}, {2, 12, 0.5}, {5, 19, 0.9}};
  Var s = (*model.S)(constant(img), inst);
  CHECK(s.shape() == Shape{128});
  CHECK(s.value().all_finite());

  SUBCASE("instance order does not matter") {
    std::vector<CharInstance> perm{inst[2], inst[0], inst[3], inst[1]};
    CHECK((*model.S)(constant(img), perm).value() == s.value());
  }
  SUBCASE("confidences are normalized") {
    auto doubled = inst;
    for (auto& i : doubled) i.confidence *= 2;
    CHECK((*model.S)(constant(img), doubled).value() == s.value());
  }
  SUBCASE("no instances still yields a style") {
    Var none = (*model.S)(constant(img), {});
    CHECK(none.shape() == Shape{128});
    CHECK(none.value().all_finite());
    std::vector<CharInstance> zero_conf{{1, 2, 0.0}};
    CHECK((*model.S)(constant(img), zero_conf).value() == none.value());
  }
  SUBCASE("windows at the borders are padded") {
    std::vector<CharInstance> edge{{1, 0, 1.0}, {2, 19, 1.0}};
    CHECK((*model.S)(constant(img), edge).value().all_finite());
  }
  SUBCASE("with R's instances") {
    CHECK(extract_style(*model.S, *model.R, img).shape() == Shape{128});
  }
}

TEST_CASE("spacing network") {
  Model model(ModelConfig::desk(), 6);
  const int k = model.alphabet.num_classes();
  std::vector<int> text{1, 2, 2, 5};
  SpacingTargets a = predict_spacing(*model.C, text, random_style(128, 1), k);
  SpacingTargets b = predict_spacing(*model.C, text, random_style(128, 2), k);
  CHECK(a.chars.size() == text.size());
  CHECK(a.trailing_blanks >= 0);
  bool differ = std::abs(a.trailing_blanks - b.trailing_blanks) > 1e-9;
  for (std::size_t i = 0; i < text.size(); ++i) {
    CHECK(a.chars[i].blanks_before >= 0);
    CHECK(a.chars[i].repeats >= 0);
    differ = differ || std::abs(a.chars[i].blanks_before - b.chars[i].blanks_before) > 1e-9;
  }
  CHECK(differ);
  CHECK(collapse(render_spaced(text, a)) == text);
  Var raw = (*model.C)(constant(text_one_hot(text, k)), constant(random_style(128, 1)));
  CHECK(raw.shape() == Shape{2, 5});
}

TEST_CASE("discriminator") {
  Model model(ModelConfig::desk(), 7);
  const Tensor img = random_image(32, 64, 8);
  DScores s = (*model.D)(constant(img));
  REQUIRE(s.mid.defined());
  REQUIRE(s.final.defined());
  CHECK(s.mid.shape() == Shape{1, 8, 16});
  CHECK(s.final.shape() == Shape{1, 2, 4});

  SUBCASE("doubling the width doubles the maps") {
    DScores w = (*model.D)(constant(concat_width(img, img)));
    CHECK(w.mid.shape() == Shape{1, 8, 32});
    CHECK(w.final.shape() == Shape{1, 2, 8});
  }
  SUBCASE("narrow inputs are padded up to the stride") {
    DScores n = (*model.D)(constant(random_image(32, 20, 1)));
    CHECK(n.final.shape() == Shape{1, 2, 2});
  }
  SUBCASE("translation covariance at the final stride") {
    // Embed the same content at two offsets one final stride apart, with
    // enough background margin that zero-padding at the borders is far away.
    const int margin = 64, stride = Discriminator::kStride;
    Tensor base(Shape{1, 32, 64 + 2 * margin + stride}, 1);
    Tensor shifted = base;
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 64; ++j) {
        base.at(0, i, margin + j) = img.at(0, i, j);
        shifted.at(0, i, margin + stride + j) = img.at(0, i, j);
      }
    Tensor f0 = (*model.D)(constant(base)).final.value();
    Tensor f1 = (*model.D)(constant(shifted)).final.value();
    const int w = f0.dim(2);
    // Columns covering the content, away from both borders.
    for (int r = 0; r < f0.dim(1); ++r) {
      for (int c = 2; c < w - 3; ++c) CHECK(std::abs(f1.at(0, r, c + 1) - f0.at(0, r, c)) < 1e-12);
    }
  }
  SUBCASE("height mismatch") {
    CHECK_THROWS_AS((*model.D)(constant(random_image(64, 64, 1))), ShapeError);
  }
}

TEST_CASE("recognizer") {
  SUBCASE("paper preset: W=80 gives T=10") {
    Model model(ModelConfig::paper(), 9);
    FramePosteriors p = model.R->posteriors(random_image(64, 80, 1));
    CHECK(p.log_probs.shape() == Shape{10, model.alphabet.num_classes()});
  }
  Model model(ModelConfig::desk(), 9);
  FramePosteriors p = model.R->posteriors(random_image(32, 96, 2));
  CHECK(p.log_probs.dim(0) == 24);
  for (int t = 0; t < p.log_probs.dim(0); ++t) {
    double s = 0;
    for (int k = 0; k < p.classes(); ++k) s += std::exp(p.log_probs.at(t, k));
    CHECK(std::abs(std::log(s)) < 1e-5);
  }
  CHECK_THROWS_AS(model.R->posteriors(random_image(32, 98, 2)), ShapeError);
}

TEST_CASE("perceptual encoder") {
  Model model(ModelConfig::desk(), 10);
  const Tensor img = random_image(32, 64, 3);
  Var f = (*model.E)(constant(img));
  CHECK(f.value().rank() == 2);
  CHECK(f.dim(1) == 16);
  CHECK((*model.E)(constant(concat_width(img, img))).dim(1) == 32);
  CHECK((*model.E)(constant(img)).value() == f.value());
  CHECK(model.E->decode(f).shape() == Shape{1, 32, 64});
  CHECK(model.E->recognize(f).shape() == Shape{16, model.alphabet.num_classes()});
}

TEST_CASE("image width helpers") {
  Tensor img = random_image(4, 5, 1);
  Tensor padded = pad_width_to_multiple(img, 4);
  CHECK(padded.shape() == Shape{1, 4, 8});
  CHECK(padded.at(0, 2, 7) == 1);
  CHECK(padded.at(0, 2, 3) == img.at(0, 2, 3));
  CHECK(fit_width(img, 3).shape() == Shape{1, 4, 3});
  Var v = pad_width_to_multiple(constant(img), 4);
  CHECK(v.value() == padded);
}
