#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hwgen/alphabet.hpp"
#include "hwgen/ctc.hpp"
#include "hwgen/nn.hpp"
#include "hwgen/spaced_text.hpp"

namespace hwgen {

struct ModelConfig {
  std::string preset = "paper";
  int style_dim = 128;
  int height = 64;
  int px_per_pos = 8;
  // Base channel widths; each network derives its stage widths from these.
  int g_base = 64;
  int d_base = 64;
  int r_base = 64;
  int s_base = 64;
  int c_base = 64;
  int e_base = 64;
  int window = 5;
  std::string alphabet;  // UTF-8 characters, blank excluded

  static ModelConfig paper();
  // Height 32, 4 px per position, channel widths quartered.
  static ModelConfig desk();

  std::map<std::string, std::string> to_map() const;
  // Unknown keys are rejected.
  static ModelConfig from_map(const std::map<std::string, std::string>& m);
  // Throws UsageError unless the geometry constraints hold.
  void validate() const;

  int g_blocks() const;           // vertical doublings from height 4
  int horizontal_doublings() const;  // log2(px_per_pos)
};

// Shared trunk of R, S and E: 3x3 conv + relu + 2x2/2x1 average pooling
// until the height is 1. Width shrinks by px_per_pos. [1,H,W] -> [C,W/px].
class ColumnEncoder {
 public:
  ColumnEncoder() = default;
  ColumnEncoder(ParamSet& ps, const std::string& name, int height, int px_per_pos, int base,
                NoiseSource& rng);
  Var operator()(const Var& image) const;
  int out_channels() const { return out_channels_; }

 private:
  struct Stage {
    Conv2d conv;
    int pool_w = 1;
  };
  std::vector<Stage> stages_;
  int out_channels_ = 0;
};

class Generator {
 public:
  Generator(const ModelConfig& cfg, NoiseSource& rng);
  // spaced_onehot [K, L], style [style_dim] -> image [1, height, px*L] in (0,1).
  Var operator()(const Var& spaced_onehot, const Var& style, std::uint64_t noise_seed) const;
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

 private:
  // One noise/relu/AdaIN stage after a convolution.
  struct Stage {
    Conv2d conv;
    Parameter* noise_strength;
    Linear affine;
  };
  struct Block {
    Stage up;  // upsample, conv, blur
    Stage refine;
    Conv1d text;  // spaced text projected into this block's channels
    int channels;
    int up_w;
  };
  Var stage(const Stage& s, const Var& h, const Var& style, int channels, NoiseSource& noise) const;
  ModelConfig cfg_;
  ParamSet ps_{"G"};
  Conv1d input_;
  Parameter* constant_ = nullptr;
  int c0_ = 0;
  std::vector<Block> blocks_;
  Conv2d out_;
};

class StyleExtractor {
 public:
  StyleExtractor(const ModelConfig& cfg, NoiseSource& rng);
  // `instances` come from R's posteriors on the same image.
  Var operator()(const Var& image, std::span<const CharInstance> instances) const;
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }
  int char_feature_dim() const { return head_dim_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_{"S"};
  ColumnEncoder backbone_;
  Conv1d context_;
  std::vector<Linear> heads_;  // index label-1
  Conv1d global1_, global2_;
  Linear fc1_, fc2_;
  int head_dim_ = 0;
};

class SpacingNet {
 public:
  SpacingNet(const ModelConfig& cfg, NoiseSource& rng);
  // text_onehot [K, N+1], style [style_dim] -> [2, N+1]: row 0 blanks
  // before, row 1 repeats; column N is the virtual end token.
  Var operator()(const Var& text_onehot, const Var& style) const;
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_{"C"};
  std::vector<Conv1d> layers_;
  Conv1d out_;
};

struct DScores {
  Var mid;    // [1, H/4, W/4]
  Var final;  // [1, H/16, W/16]
};

class Discriminator {
 public:
  static constexpr int kStride = 16;
  Discriminator(const ModelConfig& cfg, NoiseSource& rng);
  // Images narrower than a multiple of kStride are padded with background.
  DScores operator()(const Var& image) const;
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_{"D"};
  std::vector<Conv2d> stages_;
  Conv2d head_mid_, head_final_;
};

// Equal-weight mean of both score maps' means.
Var d_scalar(const DScores& s);
// Patch-wise hinge: mean over patches of max(0, 1 - sign*score), averaged
// over both scales. sign +1 for real, -1 for fake.
Var d_hinge(const DScores& s, Real sign);

class Recognizer {
 public:
  Recognizer(const ModelConfig& cfg, NoiseSource& rng);
  // [1,H,W] -> log-probabilities [W/px, K].
  Var operator()(const Var& image) const;
  FramePosteriors posteriors(const Tensor& image) const;
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_{"R"};
  ColumnEncoder backbone_;
  Conv1d c1_, c2_, out_;
};

class Encoder {
 public:
  Encoder(const ModelConfig& cfg, NoiseSource& rng);
  // [1,H,W] -> [Ce, W/px].
  Var operator()(const Var& image) const;
  // Auxiliary heads, used only while pretraining.
  Var decode(const Var& features) const;
  Var recognize(const Var& features) const;
  ParamSet& params() { return ps_; }
  const ParamSet& params() const { return ps_; }
  ParamSet& aux_params() { return aux_; }

 private:
  ModelConfig cfg_;
  ParamSet ps_{"E"};
  ParamSet aux_{"E_aux"};
  ColumnEncoder backbone_;
  Conv1d out_;
  Conv1d dec_in_;
  std::vector<Conv2d> dec_blocks_;
  std::vector<int> dec_up_w_;
  Conv2d dec_out_;
  Conv1d rec_head_;
  int dec_c0_ = 0;
};

// All six networks of one model.
struct Model {
  ModelConfig config;
  Alphabet alphabet;
  std::unique_ptr<Generator> G;
  std::unique_ptr<StyleExtractor> S;
  std::unique_ptr<SpacingNet> C;
  std::unique_ptr<Discriminator> D;
  std::unique_ptr<Recognizer> R;
  std::unique_ptr<Encoder> E;

  Model(ModelConfig cfg, std::uint64_t init_seed);
  std::vector<ParamSet*> all_param_sets();
  ParamSet* param_set(const std::string& prefix);
};

// Pads [1,H,W] on the right with background (1.0) up to a multiple of `m`.
Var pad_width_to_multiple(const Var& image, int m);
Tensor pad_width_to_multiple(const Tensor& image, int m);
// Crops or pads (with background) to exactly `width` columns.
Tensor fit_width(const Tensor& image, int width);
// Concatenates [1,H,*] images along the width.
Tensor concat_width(const Tensor& a, const Tensor& b);

// C's prediction for `labels` under `style`, as real-valued targets.
SpacingTargets predict_spacing(const SpacingNet& c, std::span<const int> labels,
                               const Tensor& style, int num_classes);
SpacingTargets spacing_from_output(const Tensor& out);
// S applied to an image with instances from R.
Var extract_style(const StyleExtractor& s, const Recognizer& r, const Tensor& image);

}  // namespace hwgen
