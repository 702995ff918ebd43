#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hwgen/checkpoint.hpp"
#include "hwgen/data.hpp"
#include "hwgen/grad_balance.hpp"
#include "hwgen/networks.hpp"

namespace hwgen {

// ---- curriculum ----

enum class StepKind { kSpacing, kDiscriminator, kGanOnly, kAutoencoder };
std::string_view step_kind_name(StepKind kind);

// Emits [Spacing, Disc, GanOnly, Auto, Disc, GanOnly, Auto] cyclically:
// the Spacing step runs only on even rounds.
class Curriculum {
 public:
  StepKind next();
  StepKind peek() const;
  long steps_emitted() const { return counter_; }
  bool even_round() const;

 private:
  long counter_ = 0;
};

// ---- style history ----

class StyleHistory {
 public:
  static constexpr std::size_t kCapacity = 100;
  explicit StyleHistory(std::size_t capacity = kCapacity) : capacity_(capacity) {}
  // Oldest entry is evicted once full.
  void push(const Tensor& style);
  std::size_t size() const { return styles_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Tensor& at(std::size_t i) const { return styles_.at(i); }

 private:
  std::size_t capacity_;
  std::deque<Tensor> styles_;
};

struct StyleSample {
  Tensor style;
  double alpha = 0;
  int first = -1, second = -1;  // history indices; -1 on cold start
};

// s1 + alpha (s2 - s1) for two distinct stored styles and alpha uniform on
// [-0.5, 1.5]. With fewer than two entries, a standard-normal vector.
StyleSample sample_style(const StyleHistory& history, NoiseSource& rng, int style_dim);

// ---- losses ----

// MSE between C's raw output [2, N+1] and the dataset spaced text's
// spacing targets; the virtual end token's repeats entry is masked.
Var spacing_loss(const Var& predicted, const SpacingTargets& target);
// Patch-wise hinge on real and generated images.
Var discriminator_loss(const DScores& real, const DScores& fake);
// -D(x), for generated and reconstructed images alike.
Var adversarial_loss(const DScores& scores);
// CTC of R's output against the intended text.
Var recognition_loss(const Var& log_probs, std::span<const int> labels);
// Pixel L1 plus L1 between E's feature series.
Var reconstruction_loss(const Var& reconstruction, const Tensor& target, const Encoder& e);

// ---- pipeline helpers ----

// c_I: R's argmax on `image` corrected to `labels`.
SpacedText dataset_spaced_text(const Recognizer& r, const Tensor& image, std::span<const int> labels);
// G(C(t, y), y) as a plain image.
Tensor generate_line(const Model& model, std::span<const int> labels, const Tensor& style,
                     std::uint64_t noise_seed);
// G(c, y) for an explicit spaced text.
Tensor render_spaced_line(const Model& model, const SpacedText& spaced, const Tensor& style,
                          std::uint64_t noise_seed);
// S applied to the width-wise concatenation of `images`.
Tensor extract_style_from(const Model& model, std::span<const Tensor> images);

// ---- training ----

struct TrainOptions {
  long steps = 4000;
  std::uint64_t seed = 1;
  BalanceWeights weights;
  AdamConfig gen_adam;
  AdamConfig disc_adam;
  double slant_max_deg = 45;
  int log_every = 50;
  int checkpoint_every = 1000;
};

struct BatchItem {
  Tensor image;  // augmented, padded to a multiple of px_per_pos
  std::vector<int> labels;
  SpacedText spaced;  // c_I
  std::string author;
};

struct TrainingBatch {
  struct Pair {
    std::array<BatchItem, 2> items;
    Tensor concat;  // I'
  };
  std::array<Pair, 2> pairs;
};

struct SampledContent {
  std::vector<int> text;  // t_s
  Tensor style;           // y_s
};

struct StepMetrics {
  long step = 0;
  StepKind kind = StepKind::kSpacing;
  std::map<std::string, double> values;
};

std::string metrics_json(const StepMetrics& m);

class Trainer {
 public:
  // `train` must contain at least one author with two samples; `corpus`
  // supplies t_s.
  Trainer(Model& model, TrainOptions options, std::vector<Sample> train,
          std::vector<std::vector<int>> corpus);

  StepMetrics step();
  StepMetrics execute(StepKind kind);
  // Runs `steps` curriculum steps, appending metrics to out_dir/metrics.jsonl
  // and writing checkpoints.
  void run(const std::filesystem::path& out_dir, const std::function<void(const std::string&)>& log);

  TrainingBatch sample_batch();
  SampledContent sample_content();

  const Curriculum& curriculum() const { return curriculum_; }
  const StyleHistory& history() const { return history_; }
  const GradientCache& cache() const { return cache_; }
  const TrainOptions& options() const { return options_; }

 private:
  void set_phase(StepKind kind);
  BatchItem prepare(const Sample& s, double slant_deg);
  Tensor generate_detached(const SampledContent& c);
  StepMetrics spacing_step();
  StepMetrics discriminator_step();
  StepMetrics gan_only_step();
  StepMetrics autoencoder_step();

  Model& model_;
  TrainOptions options_;
  std::vector<Sample> train_;
  std::vector<std::vector<int>> corpus_;
  std::map<std::string, std::vector<int>> by_author_;
  std::vector<std::string> authors_;
  Curriculum curriculum_;
  StyleHistory history_;
  GradientCache cache_;
  Adam gen_opt_, disc_opt_;
  NoiseSource rng_;
  long step_ = 0;
};

// ---- pretraining ----

struct PretrainOptions {
  int iterations = 6000;
  double lr = 2e-4;
  int batch = 4;
  bool warp = true;
  double slant_max_deg = 0;
  int eval_every = 500;
  int max_eval = 200;
  std::uint64_t seed = 1;
};

struct PretrainReport {
  std::vector<std::pair<int, double>> curve;  // (iteration, held-out metric)
  double final_metric = 0;
};

// CTC training of R with warp-grid augmentation; metric is held-out CER.
PretrainReport pretrain_recognizer(Recognizer& r, const ModelConfig& cfg, std::span<const Sample> train,
                                   std::span<const Sample> heldout, const PretrainOptions& opts,
                                   const std::function<void(const std::string&)>& log = {});
// Joint L1 reconstruction (auxiliary decoder) and CTC (auxiliary head)
// training of E; metric is held-out reconstruction L1.
PretrainReport pretrain_encoder(Encoder& e, const ModelConfig& cfg, std::span<const Sample> train,
                                std::span<const Sample> heldout, const PretrainOptions& opts,
                                const std::function<void(const std::string&)>& log = {});

double recognizer_cer(const Recognizer& r, const ModelConfig& cfg, std::span<const Sample> samples,
                      int max_samples = 0);

// ---- checkpoints ----

// Saves the listed networks ("G", "S", "C", "D", "R", "E"; empty = all)
// with the model config.
void save_model(const std::filesystem::path& path, Model& model,
                std::span<const std::string> networks = {},
                const std::map<std::string, std::string>& extra = {});
std::unique_ptr<Model> load_model(const std::filesystem::path& path);
// Restores every network the checkpoint carries; returns their prefixes.
std::vector<std::string> restore_networks(const Checkpoint& ckpt, Model& model);

}  // namespace hwgen
