#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <unistd.h>

#include "doctest.h"
#include "hwgen/error.hpp"
#include "hwgen/trainer.hpp"

using namespace hwgen;
namespace fs = std::filesystem;

namespace {

// Kolmogorov distribution tail, with the usual small-sample correction.
double ks_p_value(double d, int n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0;
  for (int k = 1; k <= 100; ++k) p += 2 * ((k % 2) ? 1 : -1) * std::exp(-2.0 * k * k * lambda * lambda);
  return std::clamp(p, 0.0, 1.0);
}

std::vector<Sample> tiny_samples(const Alphabet& abc, int authors, int lines, std::uint64_t seed) {
  NoiseSource rng(seed);
  auto people = make_authors(authors, "w", rng);
  const char* texts[] = {"a cat", "good", "we do", "dime", "sun", "red bow"};
  std::vector<Sample> out;
  for (std::size_t k = 0; k < people.size(); ++k) {
    const auto& a = people[k];
    for (int i = 0; i < lines; ++i) {
      std::string t = texts[(i + 2 * k) % 6];
      Sample s;
      s.image = render_line(t, a, 32, rng);
      s.text = t;
      s.labels = abc.encode(t);
      s.author = a.id;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::map<std::string, std::uint64_t> hashes(Model& m) {
  std::map<std::string, std::uint64_t> h;
  for (ParamSet* ps : m.all_param_sets()) {
    std::uint64_t acc = 1469598103934665603ull;
    for (const Parameter* p : std::as_const(*ps).all()) acc = acc * 1099511628211ull ^ tensor_hash(p->value);
    h[ps->prefix()] = acc;
  }
  return h;
}

std::vector<std::string> changed(const std::map<std::string, std::uint64_t>& a,
                                 const std::map<std::string, std::uint64_t>& b) {
  std::vector<std::string> out;
  for (const auto& [k, v] : a) {
    if (b.at(k) != v) out.push_back(k);
  }
  return out;
}

DScores scores(std::initializer_list<Real> mid, std::initializer_list<Real> fin) {
  return {leaf(Tensor(Shape{1, 1, static_cast<int>(mid.size())}, std::vector<Real>(mid))),
          leaf(Tensor(Shape{1, 1, static_cast<int>(fin.size())}, std::vector<Real>(fin)))};
}

}  // namespace

TEST_CASE("curriculum emits the seven-step cycle") {
  Curriculum c;
  const StepKind expected[] = {StepKind::kSpacing,     StepKind::kDiscriminator, StepKind::kGanOnly,
                               StepKind::kAutoencoder, StepKind::kDiscriminator, StepKind::kGanOnly,
                               StepKind::kAutoencoder};
  std::map<StepKind, int> counts;
  StepKind prev = StepKind::kSpacing;
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.even_round() == (i % 7 < 4));
    const StepKind k = c.next();
    CHECK(k == expected[i % 7]);
    if (k == StepKind::kAutoencoder) CHECK(prev == StepKind::kGanOnly);
    ++counts[k];
    prev = k;
  }
  CHECK(c.steps_emitted() == 1000);
  CHECK(counts[StepKind::kSpacing] == 143);
  CHECK(counts[StepKind::kDiscriminator] == 286);
  CHECK(counts[StepKind::kGanOnly] == 286);
  CHECK(counts[StepKind::kAutoencoder] == 285);
}

TEST_CASE("style history") {
  StyleHistory h;
  for (int i = 0; i < 250; ++i) h.push(Tensor::from({Real(i)}));
  CHECK(h.size() == 100);
  CHECK(h.at(0)[0] == 150);
  CHECK(h.at(99)[0] == 249);
}

TEST_CASE("sample_style") {
  SUBCASE("cold start draws a standard-normal vector") {
    StyleHistory h;
    h.push(Tensor(Shape{8}, Real(3)));
    NoiseSource rng(1);
    StyleSample s = sample_style(h, rng, 8);
    CHECK(s.first == -1);
    CHECK(s.style.shape() == Shape{8});
    CHECK(s.style != Tensor(Shape{8}, Real(3)));
  }
  SUBCASE("alpha law and extrapolation bound") {
    StyleHistory h;
    NoiseSource init(2);
    for (int i = 0; i < 100; ++i) {
      Tensor t(Shape{16});
      init.fill_normal(t);
      h.push(t);
    }
    NoiseSource rng(3);
    const int n = 10000;
    std::vector<double> u;
    for (int k = 0; k < n; ++k) {
      StyleSample s = sample_style(h, rng, 16);
      REQUIRE(s.first >= 0);
      REQUIRE(s.first != s.second);
      CHECK(s.alpha >= -0.5);
      CHECK(s.alpha <= 1.5);
      const Tensor& a = h.at(s.first);
      const Tensor& b = h.at(s.second);
      // Position along the segment recovered from the output alone.
      double dot = 0, len2 = 0, off = 0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        dot += (s.style[i] - a[i]) * (b[i] - a[i]);
        len2 += (b[i] - a[i]) * (b[i] - a[i]);
      }
      const double t = dot / len2;
      for (std::size_t i = 0; i < a.size(); ++i) off = std::max(off, std::abs(s.style[i] - (a[i] + t * (b[i] - a[i]))));
      CHECK(off < 1e-9);
      const double beyond = std::max({0.0, -t, t - 1}) * std::sqrt(len2);
      CHECK(beyond <= 0.5 * std::sqrt(len2) + 1e-9);
      if (k < 50) CHECK(t == doctest::Approx(s.alpha).epsilon(1e-9));
      u.push_back((s.alpha + 0.5) / 2.0);
    }
    std::sort(u.begin(), u.end());
    double d = 0;
    for (int i = 0; i < n; ++i) {
      d = std::max({d, (i + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
    }
    const double p = ks_p_value(d, n);
    MESSAGE("KS D = " << d << ", p = " << p);
    CHECK(p > 0.01);
  }
  SUBCASE("endpoints") {
    StyleHistory h;
    h.push(Tensor::from({0, 0}));
    h.push(Tensor::from({2, 4}));
    NoiseSource rng(9);
    for (int k = 0; k < 200; ++k) {
      StyleSample s = sample_style(h, rng, 2);
      const Tensor& a = h.at(s.first);
      const Tensor& b = h.at(s.second);
      CHECK(s.style[0] == doctest::Approx(a[0] + s.alpha * (b[0] - a[0])));
      CHECK(s.style[1] == doctest::Approx(a[1] + s.alpha * (b[1] - a[1])));
    }
  }
}

TEST_CASE("losses on hand-computed inputs") {
  SUBCASE("spacing loss masks the end token's repeats") {
    SpacingTargets t;
    t.chars = {{0, 1}, {1, 2}};
    t.trailing_blanks = 2;
    Var pred = leaf(Tensor(Shape{2, 3}, std::vector<Real>{1, 2, 3, 1, 1, 9}));
    Var l = spacing_loss(pred, t);
    // squared errors 1, 1, 1, 0, 1 over five unmasked entries
    CHECK(l.value()[0] == doctest::Approx(0.8));
    std::vector<Var> wrt{pred};
    Tensor g = backward(l, wrt)[0];
    CHECK(g.at(1, 2) == 0);
    CHECK(g.at(0, 0) == doctest::Approx(0.4));
    CHECK(g.at(1, 1) == doctest::Approx(-0.4));
    CHECK_THROWS_AS(spacing_loss(leaf(Tensor(Shape{2, 2})), t), ShapeError);
  }
  SUBCASE("discriminator hinge") {
    DScores s = scores({0.5, 2}, {-0.5});
    // real: 0.5 * ((0.5 + 0) / 2 + 1.5); fake: 0.5 * ((1.5 + 3) / 2 + 0.5)
    CHECK(d_hinge(s, 1).value()[0] == doctest::Approx(0.875));
    CHECK(d_hinge(s, -1).value()[0] == doctest::Approx(1.375));
    CHECK(discriminator_loss(s, s).value()[0] == doctest::Approx(2.25));
    DScores far = scores({5, 5}, {5});
    DScores low = scores({-5}, {-5});
    CHECK(discriminator_loss(far, low).value()[0] == 0);
  }
  SUBCASE("adversarial loss") {
    CHECK(adversarial_loss(scores({0.5, 2}, {-0.5})).value()[0] == doctest::Approx(-0.375));
  }
  SUBCASE("recognition loss") {
    const Real h = std::log(Real(0.5));
    CHECK(recognition_loss(leaf(Tensor(Shape{1, 2}, h)), std::vector<int>{1}).value()[0] ==
          doctest::Approx(std::log(2.0)));
    // paths 11, 01, 10 out of four
    CHECK(recognition_loss(leaf(Tensor(Shape{2, 2}, h)), std::vector<int>{1}).value()[0] ==
          doctest::Approx(-std::log(0.75)));
    CHECK_THROWS_AS(recognition_loss(leaf(Tensor(Shape{1, 2}, h)), std::vector<int>{1, 1}), InfeasibleTarget);
  }
  SUBCASE("reconstruction loss") {
    Model m(ModelConfig::desk(), 1);
    Tensor a(Shape{1, 32, 16}, Real(0.25)), b(Shape{1, 32, 16}, Real(1));
    for (int j = 0; j < 16; ++j) b.at(0, 3, j) = Real(0.5);
    Var recon = leaf(a);
    Var l = reconstruction_loss(recon, b, *m.E);
    double pix = 0;
    for (std::size_t i = 0; i < a.size(); ++i) pix += std::abs(double(a[i]) - b[i]);
    pix /= a.size();
    const Tensor fa = (*m.E)(constant(a)).value(), fb = (*m.E)(constant(b)).value();
    double feat = 0;
    for (std::size_t i = 0; i < fa.size(); ++i) feat += std::abs(double(fa[i]) - fb[i]);
    feat /= fa.size();
    CHECK(l.value()[0] == doctest::Approx(pix + feat).epsilon(1e-12));
    CHECK(reconstruction_loss(leaf(b), b, *m.E).value()[0] == 0);
    CHECK_THROWS_AS(reconstruction_loss(recon, Tensor(Shape{1, 32, 8}), *m.E), ShapeError);
  }
}

TEST_CASE("training steps") {
  Model model(ModelConfig::desk(), 7);
  auto samples = tiny_samples(model.alphabet, 3, 4, 11);
  TrainOptions opts;
  opts.seed = 5;

  SUBCASE("batch layout") {
    Trainer tr(model, opts, samples, {});
    TrainingBatch b = tr.sample_batch();
    for (const auto& pair : b.pairs) {
      CHECK(pair.items[0].author == pair.items[1].author);
      CHECK(pair.concat.dim(2) == pair.items[0].image.dim(2) + pair.items[1].image.dim(2));
      for (const auto& it : pair.items) {
        CHECK(it.image.dim(2) % model.config.px_per_pos == 0);
        CHECK(collapse(it.spaced) == it.labels);
        CHECK(static_cast<int>(it.spaced.size()) * model.config.px_per_pos >= it.image.dim(2));
      }
    }
    CHECK(b.pairs[0].items[0].author != b.pairs[1].items[0].author);
  }

  SUBCASE("parameter-update isolation per step kind") {
    Trainer tr(model, opts, samples, {});
    std::map<StepKind, std::vector<std::string>> expected{
        {StepKind::kSpacing, {"C", "S"}},
        {StepKind::kDiscriminator, {"D"}},
        {StepKind::kGanOnly, {}},
        {StepKind::kAutoencoder, {"G", "S"}},
    };
    for (int i = 0; i < 7; ++i) {
      const auto before = hashes(model);
      const std::size_t hist = tr.history().size();
      StepMetrics m = tr.step();
      CAPTURE(step_kind_name(m.kind));
      CHECK(changed(before, hashes(model)) == expected[m.kind]);
      const bool extracts = m.kind == StepKind::kSpacing || m.kind == StepKind::kAutoencoder;
      CHECK(tr.history().size() == hist + (extracts ? 2 : 0));
      if (m.kind == StepKind::kGanOnly) {
        CHECK(tr.cache().size() == 2);
        CHECK(tr.cache().has(LossId::kAdvG));
        CHECK(tr.cache().has(LossId::kRecG));
      }
      if (m.kind == StepKind::kAutoencoder) CHECK(tr.cache().size() == 0);
    }
  }

  SUBCASE("autoencoder step requires cached GAN gradients") {
    Trainer tr(model, opts, samples, {});
    CHECK_THROWS_AS(tr.execute(StepKind::kAutoencoder), Error);
  }

  SUBCASE("ablation: only auto_r weighted ignores D entirely") {
    opts.weights = {1.0, 0, 0, 0, 0};
    Model other(ModelConfig::desk(), 7);
    for (Parameter* p : other.D->params().all()) {
      for (Real& v : p->value.values()) v = v * Real(1.7) + Real(0.01);
    }
    Trainer ta(model, opts, samples, {});
    Trainer tb(other, opts, samples, {});
    for (Trainer* t : {&ta, &tb}) {
      t->execute(StepKind::kGanOnly);
      t->execute(StepKind::kAutoencoder);
    }
    auto ha = hashes(model), hb = hashes(other);
    CHECK(ha["G"] == hb["G"]);
    CHECK(ha["S"] == hb["S"]);
    CHECK(ha["D"] != hb["D"]);
  }

  SUBCASE("too little data") {
    std::vector<Sample> one{samples[0]};
    CHECK_THROWS_AS(Trainer(model, opts, one, {}), DataError);
  }
}

TEST_CASE("50-step smoke run") {
  Model model(ModelConfig::desk(), 2);
  auto samples = tiny_samples(model.alphabet, 2, 4, 3);
  std::vector<std::vector<int>> corpus{model.alphabet.encode("tiny words"), model.alphabet.encode("a day")};
  TrainOptions opts;
  opts.steps = 50;
  opts.log_every = 0;
  opts.checkpoint_every = 0;
  Trainer tr(model, opts, samples, corpus);
  fs::path out = fs::temp_directory_path() / ("hwgen_test_trainer_" + std::to_string(getpid()));
  fs::remove_all(out);
  tr.run(out, {});
  CHECK(tr.curriculum().steps_emitted() == 50);
  CHECK(tr.history().size() <= StyleHistory::kCapacity);
  std::ifstream in(out / "metrics.jsonl");
  std::map<std::string, int> kinds;
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    for (const char* k : {"spacing", "discriminator", "gan_only", "autoencoder"}) {
      if (line.find(std::string("\"kind\":\"") + k + "\"") != std::string::npos) ++kinds[k];
    }
    CHECK(line.find("nan") == std::string::npos);
    CHECK(line.find("null") == std::string::npos);
  }
  CHECK(rows == 50);
  CHECK(kinds.size() == 4);
  for (ParamSet* ps : model.all_param_sets()) {
    for (const Parameter* p : std::as_const(*ps).all()) CHECK(p->value.all_finite());
  }
  auto loaded = load_model(out / "model.ckpt");
  CHECK(hashes(*loaded) == hashes(model));
  fs::remove_all(out);
}

TEST_CASE("pretraining") {
  ModelConfig cfg = ModelConfig::desk();
  Model model(cfg, 4);
  auto samples = tiny_samples(model.alphabet, 2, 4, 8);
  SUBCASE("untrained recognizer is far from the text") {
    CHECK(recognizer_cer(*model.R, cfg, samples) > 0.5);
  }
  SUBCASE("recognizer loss goes down and R ends frozen") {
    PretrainOptions o;
    o.iterations = 30;
    o.eval_every = 10;
    o.lr = 1e-3;
    std::vector<double> losses;
    PretrainReport rep = pretrain_recognizer(*model.R, cfg, samples, samples, o, [&](const std::string& s) {
      auto at = s.find("\"loss\":");
      losses.push_back(std::stod(s.substr(at + 7)));
    });
    CHECK(rep.curve.size() == 3);
    REQUIRE(losses.size() == 3);
    CHECK(losses.back() < losses.front());
    for (const Parameter* p : std::as_const(model.R->params()).all()) {
      CHECK_FALSE(p->trainable);
      CHECK_FALSE(p->grad.has_value());
    }
  }
  SUBCASE("encoder held-out L1 decreases") {
    PretrainOptions o;
    o.iterations = 40;
    o.eval_every = 20;
    o.lr = 1e-3;
    auto heldout_l1 = [&] {
      double total = 0;
      for (const auto& s : samples) {
        Tensor img = pad_width_to_multiple(s.image, cfg.px_per_pos);
        Tensor dec = model.E->decode((*model.E)(constant(img))).value();
        Tensor ref = fit_width(img, dec.dim(2));
        double l = 0;
        for (std::size_t i = 0; i < dec.size(); ++i) l += std::abs(double(dec[i]) - ref[i]);
        total += l / dec.size();
      }
      return total / samples.size();
    };
    const double before = heldout_l1();
    PretrainReport rep = pretrain_encoder(*model.E, cfg, samples, samples, o);
    REQUIRE(rep.curve.size() == 2);
    CHECK(rep.final_metric == doctest::Approx(heldout_l1()));
    CHECK(rep.curve[1].second < before);
    const Tensor probe(Shape{1, 32, 16}, Real(0.5));
    CHECK((*model.E)(constant(probe)).value() == (*model.E)(constant(probe)).value());
  }
}
