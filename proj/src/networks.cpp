#include "hwgen/networks.hpp"

#include <algorithm>
#include <bit>
#include <charconv>

#include "hwgen/error.hpp"

namespace hwgen {

namespace {

int log2_exact(int v, const char* what) {
  if (v <= 0 || !std::has_single_bit(static_cast<unsigned>(v))) {
    throw UsageError(std::string(what) + " must be a power of two, got " + std::to_string(v));
  }
  return std::countr_zero(static_cast<unsigned>(v));
}

int parse_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw UsageError("config key " + key + " expects an integer, got '" + v + "'");
  }
  return out;
}

Var background_complement(const Var& x) { return add_scalar(scale(x, Real(-1)), Real(1)); }

}  // namespace

// ---- ModelConfig ----

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.alphabet = Alphabet::standard().utf8();
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c;
  c.preset = "desk";
  c.height = 32;
  c.px_per_pos = 4;
  c.g_base = c.d_base = c.r_base = c.s_base = c.c_base = c.e_base = 16;
  c.alphabet = "abcdeghiklmnorstuwy ";
  return c;
}

std::map<std::string, std::string> ModelConfig::to_map() const {
  return {{"preset", preset},
          {"style_dim", std::to_string(style_dim)},
          {"height", std::to_string(height)},
          {"px_per_pos", std::to_string(px_per_pos)},
          {"g_base", std::to_string(g_base)},
          {"d_base", std::to_string(d_base)},
          {"r_base", std::to_string(r_base)},
          {"s_base", std::to_string(s_base)},
          {"c_base", std::to_string(c_base)},
          {"e_base", std::to_string(e_base)},
          {"window", std::to_string(window)},
          {"alphabet", alphabet}};
}

ModelConfig ModelConfig::from_map(const std::map<std::string, std::string>& m) {
  ModelConfig c;
  auto it = m.find("preset");
  if (it != m.end()) {
    if (it->second == "desk") {
      c = desk();
    } else if (it->second == "paper") {
      c = paper();
    } else {
      throw UsageError("unknown preset '" + it->second + "' (expected desk or paper)");
    }
  } else {
    c = paper();
  }
  for (const auto& [k, v] : m) {
    if (k == "preset") continue;
    if (k == "alphabet") {
      c.alphabet = v;
      continue;
    }
    int* slot = k == "style_dim"    ? &c.style_dim
                : k == "height"     ? &c.height
                : k == "px_per_pos" ? &c.px_per_pos
                : k == "g_base"     ? &c.g_base
                : k == "d_base"     ? &c.d_base
                : k == "r_base"     ? &c.r_base
                : k == "s_base"     ? &c.s_base
                : k == "c_base"     ? &c.c_base
                : k == "e_base"     ? &c.e_base
                : k == "window"     ? &c.window
                                    : nullptr;
    if (slot == nullptr) throw UsageError("unknown model config key '" + k + "'");
    *slot = parse_int(k, v);
  }
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (style_dim < 1) throw UsageError("style_dim must be positive");
  if (height < 16 || height % 16 != 0) throw UsageError("height must be a multiple of 16");
  log2_exact(height, "height");
  const int nh = log2_exact(px_per_pos, "px_per_pos");
  if (nh > g_blocks()) throw UsageError("px_per_pos exceeds the generator's upsampling");
  for (int b : {g_base, d_base, r_base, s_base, c_base, e_base}) {
    if (b < 1) throw UsageError("channel bases must be positive");
  }
  if (window < 1 || window % 2 == 0) throw UsageError("window must be a positive odd number");
  if (Alphabet::from_utf8(alphabet).size() == 0) throw UsageError("alphabet is empty");
}

int ModelConfig::g_blocks() const { return log2_exact(height / 4, "height/4"); }
int ModelConfig::horizontal_doublings() const { return log2_exact(px_per_pos, "px_per_pos"); }

// ---- ColumnEncoder ----

ColumnEncoder::ColumnEncoder(ParamSet& ps, const std::string& name, int height, int px_per_pos,
                             int base, NoiseSource& rng) {
  const int nv = log2_exact(height, "height");
  const int nh = log2_exact(px_per_pos, "px_per_pos");
  int in = 1;
  for (int i = 0; i < nv; ++i) {
    const int out = std::min(base << std::min(i, 2), 4 * base);
    Stage s;
    s.conv = Conv2d::make(ps, name + "/conv" + std::to_string(i), in, out, 3, 3, rng);
    s.pool_w = i < nh ? 2 : 1;
    stages_.push_back(s);
    in = out;
  }
  out_channels_ = in;
}

Var ColumnEncoder::operator()(const Var& image) const {
  Var x = image;
  for (const auto& s : stages_) x = avg_pool2d(relu(s.conv(x)), 2, s.pool_w);
  return reshape(x, {x.dim(0), x.dim(2)});
}

// ---- Generator ----

Generator::Generator(const ModelConfig& cfg, NoiseSource& rng) : cfg_(cfg) {
  const int k = Alphabet::from_utf8(cfg.alphabet).num_classes();
  const int nb = cfg.g_blocks(), nh = cfg.horizontal_doublings();
  c0_ = 4 * cfg.g_base;
  input_ = Conv1d::make(ps_, "input", k, c0_ * 4, 3, rng);
  Tensor constant(Shape{c0_, 4});
  for (auto& v : constant.values()) v = static_cast<Real>(rng.normal());
  constant_ = &ps_.add("constant", constant);
  auto make_stage = [&](const std::string& name, int in, int out) {
    Stage st;
    st.conv = Conv2d::make(ps_, name + "/conv", in, out, 3, 3, rng);
    st.noise_strength = &ps_.add(name + "/noise_strength", Tensor(Shape{out}));
    st.affine = Linear::make(ps_, name + "/affine", cfg.style_dim, 2 * out, rng, Real(0.25));
    // scale 1, shift 0 at init
    for (int c = 0; c < out; ++c) st.affine.bias->value[c] = 1;
    return st;
  };
  int in = c0_;
  for (int i = 0; i < nb; ++i) {
    const std::string name = "block" + std::to_string(i);
    Block b;
    b.channels = std::max(8, c0_ >> i);
    b.up_w = i >= nb - nh ? 2 : 1;
    b.up = make_stage(name + "/up", in, b.channels);
    b.refine = make_stage(name + "/refine", b.channels, b.channels);
    b.text = Conv1d::make(ps_, name + "/text", k, b.channels, 3, rng);
    blocks_.push_back(b);
    in = b.channels;
  }
  out_ = Conv2d::make(ps_, "out", in, 1, 1, 1, rng);
}

Var Generator::stage(const Stage& s, const Var& h, const Var& style, int channels,
                     NoiseSource& noise) const {
  Var x = relu(additive_noise(h, param(*s.noise_strength), noise));
  Var a = s.affine(style);
  return adain(x, slice(a, 0, 0, channels), slice(a, 0, channels, channels));
}

Var Generator::operator()(const Var& spaced_onehot, const Var& style,
                          std::uint64_t noise_seed) const {
  if (style.shape() != Shape{cfg_.style_dim}) {
    throw ShapeError("generator: style has shape " + shape_str(style.shape()) + ", expected [" +
                     std::to_string(cfg_.style_dim) + "]");
  }
  if (spaced_onehot.value().rank() != 2 || spaced_onehot.dim(1) < 1) {
    throw ShapeError("generator: spaced text must be [K, L] with L >= 1");
  }
  const int len = spaced_onehot.dim(1);
  Var h = reshape(input_(spaced_onehot), {c0_, 4, len});
  h = add(h, tile_last(param(*constant_), len));
  NoiseSource noise(noise_seed);
  for (const auto& b : blocks_) {
    h = upsample_nearest(h, 2, b.up_w);
    Var text = reshape(b.text(spaced_onehot), {b.channels, 1, len});
    text = upsample_nearest(text, h.dim(1), h.dim(2) / len);
    h = stage(b.up, add(blur2d(b.up.conv(h)), text), style, b.channels, noise);
    h = stage(b.refine, b.refine.conv(h), style, b.channels, noise);
  }
  return sigmoid(out_(h));
}

// ---- StyleExtractor ----

StyleExtractor::StyleExtractor(const ModelConfig& cfg, NoiseSource& rng) : cfg_(cfg) {
  const int k = Alphabet::from_utf8(cfg.alphabet).num_classes();
  backbone_ = ColumnEncoder(ps_, "backbone", cfg.height, cfg.px_per_pos, cfg.s_base, rng);
  const int cs = backbone_.out_channels();
  context_ = Conv1d::make(ps_, "context", cs, cs, 3, rng);
  head_dim_ = 4 * cfg.s_base;
  for (int label = 1; label < k; ++label) {
    heads_.push_back(
        Linear::make(ps_, "head" + std::to_string(label), cs * cfg.window, head_dim_, rng));
  }
  const int cg = 4 * cfg.s_base;
  global1_ = Conv1d::make(ps_, "global1", cs, cg, 3, rng);
  global2_ = Conv1d::make(ps_, "global2", cg, cg, 3, rng);
  fc1_ = Linear::make(ps_, "fc1", head_dim_ + cg, 8 * cfg.s_base, rng);
  fc2_ = Linear::make(ps_, "fc2", 8 * cfg.s_base, cfg.style_dim, rng);
}

Var StyleExtractor::operator()(const Var& image, std::span<const CharInstance> instances) const {
  Var f = relu(context_(backbone_(image)));
  const int cs = f.dim(0);

  // Canonical order so the weighted mean does not depend on input order.
  std::vector<CharInstance> sorted(instances.begin(), instances.end());
  std::sort(sorted.begin(), sorted.end(), [](const CharInstance& a, const CharInstance& b) {
    if (a.center != b.center) return a.center < b.center;
    if (a.label != b.label) return a.label < b.label;
    return a.confidence < b.confidence;
  });
  std::vector<Var> outs;
  std::vector<Real> weights;
  double total = 0;
  for (const auto& inst : sorted) {
    if (inst.label < 1 || inst.label > static_cast<int>(heads_.size()) || inst.confidence <= 0) {
      continue;
    }
    Var win = reshape(slice(f, 1, inst.center - cfg_.window / 2, cfg_.window), {cs * cfg_.window});
    outs.push_back(relu(heads_[inst.label - 1](win)));
    weights.push_back(static_cast<Real>(inst.confidence));
    total += inst.confidence;
  }
  Var chars;
  if (outs.empty()) {
    chars = constant(Tensor(Shape{head_dim_}));
  } else {
    for (auto& w : weights) w = static_cast<Real>(w / total);
    chars = weighted_sum(outs, weights);
  }
  Var g = global_avg_pool(relu(global2_(relu(global1_(f)))));
  const Var parts[] = {chars, g};
  return fc2_(relu(fc1_(concat(parts, 0))));
}

// ---- SpacingNet ----

SpacingNet::SpacingNet(const ModelConfig& cfg, NoiseSource& rng) : cfg_(cfg) {
  const int k = Alphabet::from_utf8(cfg.alphabet).num_classes();
  const int width = 4 * cfg.c_base;
  int in = k + cfg.style_dim;
  for (int i = 0; i < 3; ++i) {
    layers_.push_back(Conv1d::make(ps_, "conv" + std::to_string(i), in, width, 3, rng));
    in = width;
  }
  out_ = Conv1d::make(ps_, "out", in, 2, 1, rng);
}

Var SpacingNet::operator()(const Var& text_onehot, const Var& style) const {
  if (style.shape() != Shape{cfg_.style_dim}) throw ShapeError("spacing: style dimension mismatch");
  const int n = text_onehot.dim(1);
  const Var in[] = {text_onehot, tile_last(style, n)};
  Var x = concat(in, 0);
  for (const auto& l : layers_) x = relu(l(x));
  return softplus(out_(x));
}

// ---- Discriminator ----

Discriminator::Discriminator(const ModelConfig& cfg, NoiseSource& rng) : cfg_(cfg) {
  int in = 1;
  for (int i = 0; i < 4; ++i) {
    const int out = std::min(cfg.d_base << i, 4 * cfg.d_base);
    stages_.push_back(Conv2d::make(ps_, "conv" + std::to_string(i), in, out, 3, 3, rng));
    if (i == 1) head_mid_ = Conv2d::make(ps_, "head_mid", out, 1, 1, 1, rng);
    if (i == 3) head_final_ = Conv2d::make(ps_, "head_final", out, 1, 1, 1, rng);
    in = out;
  }
}

DScores Discriminator::operator()(const Var& image) const {
  if (image.dim(1) != cfg_.height) {
    throw ShapeError("discriminator: image height " + std::to_string(image.dim(1)) +
                     " does not match model height " + std::to_string(cfg_.height));
  }
  Var x = pad_width_to_multiple(image, kStride);
  DScores s;
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    x = avg_pool2d(leaky_relu(stages_[i](x)), 2, 2);
    if (i == 1) s.mid = head_mid_(x);
    if (i == 3) s.final = head_final_(x);
  }
  return s;
}

Var d_scalar(const DScores& s) { return scale(add(mean(s.mid), mean(s.final)), Real(0.5)); }

Var d_hinge(const DScores& s, Real sign) {
  return scale(add(hinge(s.mid, -sign), hinge(s.final, -sign)), Real(0.5));
}

// ---- Recognizer ----

Recognizer::Recognizer(const ModelConfig& cfg, NoiseSource& rng) : cfg_(cfg) {
  const int k = Alphabet::from_utf8(cfg.alphabet).num_classes();
  backbone_ = ColumnEncoder(ps_, "backbone", cfg.height, cfg.px_per_pos, cfg.r_base, rng);
  const int w = 8 * cfg.r_base;
  c1_ = Conv1d::make(ps_, "conv1d_1", backbone_.out_channels(), w, 3, rng);
  c2_ = Conv1d::make(ps_, "conv1d_2", w, w, 3, rng);
  out_ = Conv1d::make(ps_, "out", w, k, 1, rng);
}

Var Recognizer::operator()(const Var& image) const {
  if (image.dim(1) != cfg_.height) throw ShapeError("recognizer: image height mismatch");
  if (image.dim(2) % cfg_.px_per_pos != 0) {
    throw ShapeError("recognizer: width " + std::to_string(image.dim(2)) +
                     " is not a multiple of " + std::to_string(cfg_.px_per_pos));
  }
  Var f = relu(c2_(relu(c1_(backbone_(image)))));
  return log_softmax(transpose2d(out_(f)));
}

FramePosteriors Recognizer::posteriors(const Tensor& image) const {
  return FramePosteriors{(*this)(constant(image)).value()};
}

// ---- Encoder ----

Encoder::Encoder(const ModelConfig& cfg, NoiseSource& rng) : cfg_(cfg) {
  const int k = Alphabet::from_utf8(cfg.alphabet).num_classes();
  backbone_ = ColumnEncoder(ps_, "backbone", cfg.height, cfg.px_per_pos, cfg.e_base, rng);
  const int ce = 4 * cfg.e_base;
  out_ = Conv1d::make(ps_, "out", backbone_.out_channels(), ce, 3, rng);

  const int nb = cfg.g_blocks(), nh = cfg.horizontal_doublings();
  dec_c0_ = 4 * cfg.e_base;
  dec_in_ = Conv1d::make(aux_, "decoder/input", ce, dec_c0_ * 4, 3, rng);
  int in = dec_c0_;
  for (int i = 0; i < nb; ++i) {
    const int out = std::max(8, dec_c0_ >> i);
    dec_blocks_.push_back(
        Conv2d::make(aux_, "decoder/block" + std::to_string(i), in, out, 3, 3, rng));
    dec_up_w_.push_back(i >= nb - nh ? 2 : 1);
    in = out;
  }
  dec_out_ = Conv2d::make(aux_, "decoder/out", in, 1, 1, 1, rng);
  rec_head_ = Conv1d::make(aux_, "recognizer/out", ce, k, 1, rng);
}

Var Encoder::operator()(const Var& image) const {
  if (image.dim(1) != cfg_.height) throw ShapeError("encoder: image height mismatch");
  return out_(backbone_(image));
}

Var Encoder::decode(const Var& features) const {
  const int len = features.dim(1);
  Var h = relu(reshape(dec_in_(features), {dec_c0_, 4, len}));
  for (std::size_t i = 0; i < dec_blocks_.size(); ++i) {
    h = relu(dec_blocks_[i](upsample_nearest(h, 2, dec_up_w_[i])));
  }
  return sigmoid(dec_out_(h));
}

Var Encoder::recognize(const Var& features) const {
  return log_softmax(transpose2d(rec_head_(relu(features))));
}

// ---- Model ----

Model::Model(ModelConfig cfg, std::uint64_t init_seed) : config(std::move(cfg)) {
  config.validate();
  alphabet = Alphabet::from_utf8(config.alphabet);
  NoiseSource rng(init_seed);
  G = std::make_unique<Generator>(config, rng);
  S = std::make_unique<StyleExtractor>(config, rng);
  C = std::make_unique<SpacingNet>(config, rng);
  D = std::make_unique<Discriminator>(config, rng);
  R = std::make_unique<Recognizer>(config, rng);
  E = std::make_unique<Encoder>(config, rng);
}

std::vector<ParamSet*> Model::all_param_sets() {
  return {&G->params(), &S->params(), &C->params(), &D->params(), &R->params(), &E->params()};
}

ParamSet* Model::param_set(const std::string& prefix) {
  for (ParamSet* ps : all_param_sets()) {
    if (ps->prefix() == prefix) return ps;
  }
  if (prefix == "E_aux") return &E->aux_params();
  return nullptr;
}

// ---- helpers ----

Var pad_width_to_multiple(const Var& image, int m) {
  const int w = image.dim(2);
  const int target = (w + m - 1) / m * m;
  if (target == w) return image;
  return background_complement(slice(background_complement(image), 2, 0, target));
}

Tensor fit_width(const Tensor& image, int width) {
  const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
  Tensor out(Shape{c, h, width}, Real(1));
  const int n = std::min(w, width);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < n; ++j) out.at(ch, i, j) = image.at(ch, i, j);
  return out;
}

Tensor pad_width_to_multiple(const Tensor& image, int m) {
  const int w = image.dim(2);
  return fit_width(image, (w + m - 1) / m * m);
}

Tensor concat_width(const Tensor& a, const Tensor& b) {
  if (a.dim(0) != b.dim(0) || a.dim(1) != b.dim(1)) throw ShapeError("concat_width: height mismatch");
  const int c = a.dim(0), h = a.dim(1), wa = a.dim(2), wb = b.dim(2);
  Tensor out(Shape{c, h, wa + wb});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < wa; ++j) out.at(ch, i, j) = a.at(ch, i, j);
      for (int j = 0; j < wb; ++j) out.at(ch, i, wa + j) = b.at(ch, i, j);
    }
  return out;
}

SpacingTargets spacing_from_output(const Tensor& out) {
  const int n = out.dim(1) - 1;
  SpacingTargets t;
  for (int i = 0; i < n; ++i) t.chars.push_back({out.at(0, i), out.at(1, i)});
  t.trailing_blanks = out.at(0, n);
  return t;
}

SpacingTargets predict_spacing(const SpacingNet& c, std::span<const int> labels,
                               const Tensor& style, int num_classes) {
  Var out = c(constant(text_one_hot(labels, num_classes)), constant(style));
  return spacing_from_output(out.value());
}

Var extract_style(const StyleExtractor& s, const Recognizer& r, const Tensor& image) {
  auto inst = char_instances(r.posteriors(image));
  return s(constant(image), inst);
}

}  // namespace hwgen
