#include "hwgen/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hwgen/error.hpp"
#include "hwgen/eval.hpp"
#include "json.hpp"

namespace hwgen {

namespace fs = std::filesystem;

// ---- curriculum ----

std::string_view step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::kSpacing: return "spacing";
    case StepKind::kDiscriminator: return "discriminator";
    case StepKind::kGanOnly: return "gan_only";
    case StepKind::kAutoencoder: return "autoencoder";
  }
  return "?";
}

namespace {

constexpr StepKind kCycle[] = {StepKind::kSpacing,     StepKind::kDiscriminator, StepKind::kGanOnly,
                               StepKind::kAutoencoder, StepKind::kDiscriminator, StepKind::kGanOnly,
                               StepKind::kAutoencoder};

}  // namespace

StepKind Curriculum::peek() const { return kCycle[counter_ % 7]; }

StepKind Curriculum::next() {
  const StepKind k = peek();
  ++counter_;
  return k;
}

bool Curriculum::even_round() const { return counter_ % 7 < 4; }

// ---- style history ----

void StyleHistory::push(const Tensor& style) {
  if (capacity_ == 0) return;
  if (styles_.size() == capacity_) styles_.pop_front();
  styles_.push_back(style);
}

StyleSample sample_style(const StyleHistory& history, NoiseSource& rng, int style_dim) {
  StyleSample out;
  if (history.size() < 2) {
    out.style = Tensor(Shape{style_dim});
    rng.fill_normal(out.style);
    return out;
  }
  const int n = static_cast<int>(history.size());
  const int i = std::min(n - 1, static_cast<int>(rng.uniform() * n));
  int j = std::min(n - 2, static_cast<int>(rng.uniform() * (n - 1)));
  if (j >= i) ++j;
  out.first = i;
  out.second = j;
  out.alpha = -0.5 + 2.0 * rng.uniform();
  const Tensor& a = history.at(i);
  const Tensor& b = history.at(j);
  if (a.shape() != b.shape()) throw ShapeError("style history holds vectors of different sizes");
  out.style = Tensor(a.shape());
  for (std::size_t k = 0; k < a.size(); ++k) {
    out.style[k] = static_cast<Real>(a[k] + out.alpha * (double(b[k]) - a[k]));
  }
  return out;
}

// ---- losses ----

Var spacing_loss(const Var& predicted, const SpacingTargets& target) {
  const int n = static_cast<int>(target.chars.size());
  if (predicted.value().shape() != Shape{2, n + 1}) {
    throw ShapeError("spacing_loss: prediction " + shape_str(predicted.shape()) + " for " +
                     std::to_string(n) + " characters");
  }
  Tensor t(Shape{2, n + 1}), mask(Shape{2, n + 1}, Real(1));
  for (int i = 0; i < n; ++i) {
    t.at(0, i) = static_cast<Real>(target.chars[i].blanks_before);
    t.at(1, i) = static_cast<Real>(target.chars[i].repeats);
  }
  t.at(0, n) = static_cast<Real>(target.trailing_blanks);
  mask.at(1, n) = 0;
  Var diff = mul(sub(predicted, constant(t)), constant(mask));
  return scale(sum(mul(diff, diff)), Real(1) / static_cast<Real>(2 * n + 1));
}

Var discriminator_loss(const DScores& real, const DScores& fake) {
  return add(d_hinge(real, Real(1)), d_hinge(fake, Real(-1)));
}

Var adversarial_loss(const DScores& scores) { return scale(d_scalar(scores), Real(-1)); }

Var recognition_loss(const Var& log_probs, std::span<const int> labels) {
  return ctc_loss(log_probs, labels);
}

Var reconstruction_loss(const Var& reconstruction, const Tensor& target, const Encoder& e) {
  if (reconstruction.shape() != target.shape()) {
    throw ShapeError("reconstruction_loss: " + shape_str(reconstruction.shape()) + " vs " +
                     shape_str(target.shape()));
  }
  Var pixel = l1_loss(reconstruction, constant(target));
  Var feat = l1_loss(e(reconstruction), detach(e(constant(target))));
  return add(pixel, feat);
}

// ---- pipeline helpers ----

SpacedText dataset_spaced_text(const Recognizer& r, const Tensor& image, std::span<const int> labels) {
  return derive_spaced_text(r.posteriors(image).log_probs, labels).spaced;
}

Tensor render_spaced_line(const Model& model, const SpacedText& spaced, const Tensor& style,
                          std::uint64_t noise_seed) {
  Var out = (*model.G)(constant(one_hot(spaced, model.alphabet.num_classes())), constant(style),
                       noise_seed);
  return out.value();
}

Tensor generate_line(const Model& model, std::span<const int> labels, const Tensor& style,
                     std::uint64_t noise_seed) {
  if (labels.empty()) throw UsageError("generate_line: empty text");
  SpacingTargets t = predict_spacing(*model.C, labels, style, model.alphabet.num_classes());
  return render_spaced_line(model, render_spaced(labels, t), style, noise_seed);
}

Tensor extract_style_from(const Model& model, std::span<const Tensor> images) {
  if (images.empty()) throw UsageError("extract_style_from: no images");
  Tensor joined = pad_width_to_multiple(images[0], model.config.px_per_pos);
  for (std::size_t i = 1; i < images.size(); ++i) {
    joined = concat_width(joined, pad_width_to_multiple(images[i], model.config.px_per_pos));
  }
  return extract_style(*model.S, *model.R, joined).value();
}

// ---- training ----

namespace {

std::uint64_t draw_seed(NoiseSource& rng) {
  return static_cast<std::uint64_t>(rng.uniform() * 9007199254740992.0);
}

int draw_index(NoiseSource& rng, int n) {
  return std::min(n - 1, static_cast<int>(rng.uniform() * n));
}

double checked(const Var& loss, long step, StepKind kind, const char* name) {
  const double v = loss.value()[0];
  if (!std::isfinite(v)) {
    throw NumericError("step " + std::to_string(step) + " (" + std::string(step_kind_name(kind)) +
                       "): loss " + name + " is not finite");
  }
  return v;
}

std::vector<Parameter*> params_of(std::initializer_list<ParamSet*> sets) {
  std::vector<Parameter*> out;
  for (ParamSet* s : sets) {
    auto ps = s->all();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

Var mean_of(const std::vector<Var>& xs) {
  Var acc = xs.at(0);
  for (std::size_t i = 1; i < xs.size(); ++i) acc = add(acc, xs[i]);
  return scale(acc, Real(1) / static_cast<Real>(xs.size()));
}

}  // namespace

std::string metrics_json(const StepMetrics& m) {
  nlohmann::json j;
  j["step"] = m.step;
  j["kind"] = std::string(step_kind_name(m.kind));
  for (const auto& [k, v] : m.values) j[k] = v;
  return j.dump();
}

Trainer::Trainer(Model& model, TrainOptions options, std::vector<Sample> train,
                 std::vector<std::vector<int>> corpus)
    : model_(model),
      options_(std::move(options)),
      train_(std::move(train)),
      corpus_(std::move(corpus)),
      gen_opt_(options_.gen_adam),
      disc_opt_(options_.disc_adam),
      rng_(options_.seed) {
  for (std::size_t i = 0; i < train_.size(); ++i) {
    by_author_[train_[i].author].push_back(static_cast<int>(i));
  }
  for (const auto& [a, idx] : by_author_) {
    if (idx.size() >= 2) authors_.push_back(a);
  }
  if (authors_.empty()) throw DataError("training needs an author with at least two lines");
  std::erase_if(corpus_, [](const std::vector<int>& t) { return t.empty(); });
  if (corpus_.empty()) {
    for (const auto& s : train_) corpus_.push_back(s.labels);
  }
}

void Trainer::set_phase(StepKind kind) {
  for (ParamSet* ps : model_.all_param_sets()) {
    ps->set_trainable(false);
    ps->zero_grad();
  }
  switch (kind) {
    case StepKind::kSpacing:
      model_.C->params().set_trainable(true);
      model_.S->params().set_trainable(true);
      break;
    case StepKind::kDiscriminator: model_.D->params().set_trainable(true); break;
    case StepKind::kGanOnly: model_.G->params().set_trainable(true); break;
    case StepKind::kAutoencoder:
      model_.G->params().set_trainable(true);
      model_.S->params().set_trainable(true);
      break;
  }
}

BatchItem Trainer::prepare(const Sample& s, double slant_deg) {
  BatchItem item;
  Tensor img = slant_deg > 0 ? slant_augment(s.image, rng_, slant_deg) : s.image;
  item.image = pad_width_to_multiple(img, model_.config.px_per_pos);
  item.labels = s.labels;
  item.author = s.author;
  item.spaced = dataset_spaced_text(*model_.R, item.image, item.labels);
  return item;
}

TrainingBatch Trainer::sample_batch() {
  TrainingBatch batch;
  const int na = static_cast<int>(authors_.size());
  const int a0 = draw_index(rng_, na);
  int a1 = a0;
  if (na > 1) {
    a1 = draw_index(rng_, na - 1);
    if (a1 >= a0) ++a1;
  }
  const int chosen[2] = {a0, a1};
  for (int p = 0; p < 2; ++p) {
    const auto& idx = by_author_.at(authors_[chosen[p]]);
    const int n = static_cast<int>(idx.size());
    const int i = draw_index(rng_, n);
    int j = draw_index(rng_, n - 1);
    if (j >= i) ++j;
    auto& pair = batch.pairs[p];
    pair.items[0] = prepare(train_[idx[i]], options_.slant_max_deg);
    pair.items[1] = prepare(train_[idx[j]], options_.slant_max_deg);
    pair.concat = concat_width(pair.items[0].image, pair.items[1].image);
  }
  return batch;
}

SampledContent Trainer::sample_content() {
  SampledContent c;
  c.text = corpus_[draw_index(rng_, static_cast<int>(corpus_.size()))];
  c.style = sample_style(history_, rng_, model_.config.style_dim).style;
  return c;
}

Tensor Trainer::generate_detached(const SampledContent& c) {
  return generate_line(model_, c.text, c.style, draw_seed(rng_));
}

StepMetrics Trainer::step() { return execute(curriculum_.next()); }

StepMetrics Trainer::execute(StepKind kind) {
  const auto t0 = std::chrono::steady_clock::now();
  set_phase(kind);
  StepMetrics m;
  switch (kind) {
    case StepKind::kSpacing: m = spacing_step(); break;
    case StepKind::kDiscriminator: m = discriminator_step(); break;
    case StepKind::kGanOnly: m = gan_only_step(); break;
    case StepKind::kAutoencoder: m = autoencoder_step(); break;
  }
  for (ParamSet* ps : model_.all_param_sets()) {
    ps->zero_grad();
    ps->set_trainable(false);
  }
  m.step = step_++;
  m.kind = kind;
  m.values["seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return m;
}

StepMetrics Trainer::spacing_step() {
  TrainingBatch batch = sample_batch();
  const int k = model_.alphabet.num_classes();
  std::vector<Var> losses;
  for (auto& pair : batch.pairs) {
    Var style = extract_style(*model_.S, *model_.R, pair.concat);
    history_.push(style.value());
    for (const auto& item : pair.items) {
      Var pred = (*model_.C)(constant(text_one_hot(item.labels, k)), style);
      losses.push_back(spacing_loss(pred, spacing_targets(item.spaced)));
    }
  }
  Var loss = mean_of(losses);
  StepMetrics m;
  m.values["l_c"] = checked(loss, step_, StepKind::kSpacing, "l_c");
  backward(loss);
  gen_opt_.step(params_of({&model_.C->params(), &model_.S->params()}));
  return m;
}

StepMetrics Trainer::discriminator_step() {
  TrainingBatch batch = sample_batch();
  std::vector<Var> real, fake;
  for (const auto& pair : batch.pairs) {
    for (const auto& item : pair.items) {
      real.push_back(d_hinge((*model_.D)(constant(item.image)), Real(1)));
      fake.push_back(d_hinge((*model_.D)(constant(generate_detached(sample_content()))), Real(-1)));
    }
  }
  Var l_real = mean_of(real), l_fake = mean_of(fake);
  Var loss = add(l_real, l_fake);
  StepMetrics m;
  m.values["l_d"] = checked(loss, step_, StepKind::kDiscriminator, "l_d");
  m.values["l_d_real"] = l_real.value()[0];
  m.values["l_d_fake"] = l_fake.value()[0];
  backward(loss);
  disc_opt_.step(params_of({&model_.D->params()}));
  return m;
}

StepMetrics Trainer::gan_only_step() {
  cache_.reset();
  std::vector<Var> adv, rec;
  for (int i = 0; i < 4; ++i) {
    SampledContent c = sample_content();
    SpacingTargets t = predict_spacing(*model_.C, c.text, c.style, model_.alphabet.num_classes());
    SpacedText spaced = render_spaced(c.text, t);
    Var img = (*model_.G)(constant(one_hot(spaced, model_.alphabet.num_classes())), constant(c.style),
                          draw_seed(rng_));
    adv.push_back(adversarial_loss((*model_.D)(img)));
    rec.push_back(recognition_loss((*model_.R)(img), c.text));
  }
  Var l_adv = mean_of(adv), l_rec = mean_of(rec);
  StepMetrics m;
  m.values["l_adv_g"] = checked(l_adv, step_, StepKind::kGanOnly, "l_adv_g");
  m.values["l_rec_g"] = checked(l_rec, step_, StepKind::kGanOnly, "l_rec_g");
  auto g = params_of({&model_.G->params()});
  backward(l_adv);
  cache_.store(record(LossId::kAdvG, collect_grads(g)));
  model_.G->params().zero_grad();
  backward(l_rec);
  cache_.store(record(LossId::kRecG, collect_grads(g)));
  return m;
}

StepMetrics Trainer::autoencoder_step() {
  if (!cache_.has(LossId::kAdvG) || !cache_.has(LossId::kRecG)) {
    throw Error("autoencoder step needs the gradients of a preceding GAN-only step");
  }
  TrainingBatch batch = sample_batch();
  std::vector<Var> autos, advs, recs;
  const int k = model_.alphabet.num_classes();
  for (auto& pair : batch.pairs) {
    Var style = extract_style(*model_.S, *model_.R, pair.concat);
    history_.push(style.value());
    for (const auto& item : pair.items) {
      Var recon = (*model_.G)(constant(one_hot(item.spaced, k)), style, draw_seed(rng_));
      Tensor target = fit_width(item.image, recon.dim(2));
      autos.push_back(reconstruction_loss(recon, target, *model_.E));
      advs.push_back(adversarial_loss((*model_.D)(recon)));
      recs.push_back(recognition_loss((*model_.R)(recon), item.labels));
    }
  }
  Var l_auto = mean_of(autos), l_adv = mean_of(advs), l_rec = mean_of(recs);
  StepMetrics m;
  m.values["l_auto_r"] = checked(l_auto, step_, StepKind::kAutoencoder, "l_auto_r");
  m.values["l_adv_r"] = checked(l_adv, step_, StepKind::kAutoencoder, "l_adv_r");
  m.values["l_rec_r"] = checked(l_rec, step_, StepKind::kAutoencoder, "l_rec_r");

  auto gs = params_of({&model_.G->params(), &model_.S->params()});
  auto grads_of = [&](const Var& loss, LossId id) {
    for (Parameter* p : gs) p->grad.reset();
    backward(loss);
    return record(id, collect_grads(gs));
  };
  std::vector<GradientBundle> bundles = cache_.bundles();
  bundles.push_back(grads_of(l_auto, LossId::kAutoR));
  bundles.push_back(grads_of(l_adv, LossId::kAdvR));
  bundles.push_back(grads_of(l_rec, LossId::kRecR));
  GradMap total = combine(bundles, options_.weights);
  for (Parameter* p : gs) {
    auto it = total.find(p->id);
    if (it != total.end()) gen_opt_.step(*p, it->second);
  }
  cache_.reset();
  return m;
}

void Trainer::run(const fs::path& out_dir, const std::function<void(const std::string&)>& log) {
  fs::create_directories(out_dir);
  std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::app);
  if (!metrics) throw DataError("cannot write " + (out_dir / "metrics.jsonl").string());
  for (long i = 0; i < options_.steps; ++i) {
    StepMetrics m = step();
    metrics << metrics_json(m) << '\n';
    if (log && options_.log_every > 0 && (m.step % options_.log_every == 0 || i + 1 == options_.steps)) {
      log(metrics_json(m));
    }
    if (options_.checkpoint_every > 0 && (m.step + 1) % options_.checkpoint_every == 0) {
      metrics.flush();
      save_model(out_dir / "model.ckpt", model_, {}, {{"meta.step", std::to_string(m.step + 1)}});
    }
  }
  save_model(out_dir / "model.ckpt", model_, {}, {{"meta.step", std::to_string(step_)}});
}

// ---- pretraining ----

namespace {

Tensor pretrain_view(const Sample& s, const ModelConfig& cfg, const PretrainOptions& opts, NoiseSource& rng) {
  Tensor img = opts.slant_max_deg > 0 ? slant_augment(s.image, rng, opts.slant_max_deg) : s.image;
  if (opts.warp) img = warp_grid(img, rng, 4, warp_sigma_for_height(cfg.height));
  return pad_width_to_multiple(img, cfg.px_per_pos);
}

void report(const std::function<void(const std::string&)>& log, const std::string& what, int iter,
            double loss, double metric) {
  if (!log) return;
  nlohmann::json j;
  j["phase"] = what;
  j["iteration"] = iter;
  j["loss"] = loss;
  j["heldout"] = metric;
  log(j.dump());
}

double encoder_heldout_l1(const Encoder& e, const ModelConfig& cfg, std::span<const Sample> samples,
                          int max_samples) {
  double total = 0;
  int n = 0;
  for (const auto& s : samples) {
    if (max_samples > 0 && n >= max_samples) break;
    Tensor img = pad_width_to_multiple(s.image, cfg.px_per_pos);
    Var dec = e.decode(e(constant(img)));
    total += l1_loss(dec, constant(fit_width(img, dec.dim(2)))).value()[0];
    ++n;
  }
  return n ? total / n : 0;
}

}  // namespace

double recognizer_cer(const Recognizer& r, const ModelConfig& cfg, std::span<const Sample> samples,
                      int max_samples) {
  std::vector<std::vector<int>> hyps, refs;
  for (const auto& s : samples) {
    if (max_samples > 0 && static_cast<int>(refs.size()) >= max_samples) break;
    hyps.push_back(greedy_decode(r.posteriors(pad_width_to_multiple(s.image, cfg.px_per_pos))).labels);
    refs.push_back(s.labels);
  }
  return cer(hyps, refs);
}

PretrainReport pretrain_recognizer(Recognizer& r, const ModelConfig& cfg, std::span<const Sample> train,
                                   std::span<const Sample> heldout, const PretrainOptions& opts,
                                   const std::function<void(const std::string&)>& log) {
  if (train.empty()) throw DataError("recognizer pretraining needs training samples");
  NoiseSource rng(opts.seed);
  Adam adam({opts.lr, 0.5, 0.999, 1e-8});
  r.params().set_trainable(true);
  auto params = r.params().all();
  PretrainReport rep;
  double running = 0;
  for (int it = 1; it <= opts.iterations; ++it) {
    r.params().zero_grad();
    std::vector<Var> losses;
    for (int b = 0; b < opts.batch; ++b) {
      const Sample& s = train[draw_index(rng, static_cast<int>(train.size()))];
      try {
        losses.push_back(ctc_loss(r(constant(pretrain_view(s, cfg, opts, rng))), s.labels));
      } catch (const InfeasibleTarget&) {
      }
    }
    if (losses.empty()) continue;
    Var loss = mean_of(losses);
    const double v = loss.value()[0];
    if (!std::isfinite(v)) throw NumericError("recognizer pretraining: loss is not finite at iteration " + std::to_string(it));
    running = it == 1 ? v : 0.98 * running + 0.02 * v;
    backward(loss);
    adam.step(params);
    if ((opts.eval_every > 0 && it % opts.eval_every == 0) || it == opts.iterations) {
      const double m = heldout.empty() ? 0 : recognizer_cer(r, cfg, heldout, opts.max_eval);
      rep.curve.emplace_back(it, m);
      report(log, "pretrain_r", it, running, m);
    }
  }
  r.params().zero_grad();
  r.params().set_trainable(false);
  rep.final_metric = heldout.empty() ? 0 : recognizer_cer(r, cfg, heldout, 0);
  return rep;
}

PretrainReport pretrain_encoder(Encoder& e, const ModelConfig& cfg, std::span<const Sample> train,
                                std::span<const Sample> heldout, const PretrainOptions& opts,
                                const std::function<void(const std::string&)>& log) {
  if (train.empty()) throw DataError("encoder pretraining needs training samples");
  NoiseSource rng(opts.seed);
  Adam adam({opts.lr, 0.5, 0.999, 1e-8});
  e.params().set_trainable(true);
  e.aux_params().set_trainable(true);
  auto params = params_of({&e.params(), &e.aux_params()});
  PretrainReport rep;
  double running = 0;
  for (int it = 1; it <= opts.iterations; ++it) {
    e.params().zero_grad();
    e.aux_params().zero_grad();
    std::vector<Var> losses;
    for (int b = 0; b < opts.batch; ++b) {
      const Sample& s = train[draw_index(rng, static_cast<int>(train.size()))];
      Tensor img = pretrain_view(s, cfg, opts, rng);
      Var f = e(constant(img));
      Var dec = e.decode(f);
      Var l = l1_loss(dec, constant(fit_width(img, dec.dim(2))));
      try {
        l = add(l, ctc_loss(e.recognize(f), s.labels));
      } catch (const InfeasibleTarget&) {
      }
      losses.push_back(l);
    }
    Var loss = mean_of(losses);
    const double v = loss.value()[0];
    if (!std::isfinite(v)) throw NumericError("encoder pretraining: loss is not finite at iteration " + std::to_string(it));
    running = it == 1 ? v : 0.98 * running + 0.02 * v;
    backward(loss);
    adam.step(params);
    if ((opts.eval_every > 0 && it % opts.eval_every == 0) || it == opts.iterations) {
      const double m = encoder_heldout_l1(e, cfg, heldout.empty() ? train : heldout, opts.max_eval);
      rep.curve.emplace_back(it, m);
      report(log, "pretrain_e", it, running, m);
    }
  }
  e.params().zero_grad();
  e.aux_params().zero_grad();
  e.params().set_trainable(false);
  e.aux_params().set_trainable(false);
  rep.final_metric = encoder_heldout_l1(e, cfg, heldout.empty() ? train : heldout, 0);
  return rep;
}

// ---- checkpoints ----

void save_model(const fs::path& path, Model& model, std::span<const std::string> networks,
                const std::map<std::string, std::string>& extra) {
  Checkpoint ck;
  ck.config = model.config.to_map();
  std::string names;
  for (ParamSet* ps : model.all_param_sets()) {
    if (!networks.empty() && std::find(networks.begin(), networks.end(), ps->prefix()) == networks.end()) continue;
    append_params(ck, *ps);
    names += (names.empty() ? "" : ",") + ps->prefix();
  }
  for (const auto& name : networks) {
    if (!model.param_set(name)) throw UsageError("unknown network '" + name + "'");
  }
  ck.config["meta.networks"] = names;
  for (const auto& [k, v] : extra) {
    if (k.rfind("meta.", 0) != 0) throw UsageError("extra checkpoint keys must start with 'meta.'");
    ck.config[k] = v;
  }
  save_checkpoint(path, ck);
}

namespace {

ModelConfig config_of(const Checkpoint& ck) {
  std::map<std::string, std::string> m;
  for (const auto& [k, v] : ck.config) {
    if (k.rfind("meta.", 0) != 0) m[k] = v;
  }
  return ModelConfig::from_map(m);
}

}  // namespace

std::vector<std::string> restore_networks(const Checkpoint& ckpt, Model& model) {
  std::vector<std::string> names;
  auto it = ckpt.config.find("meta.networks");
  if (it == ckpt.config.end()) throw DataError("checkpoint does not list its networks");
  std::stringstream ss(it->second);
  std::string name;
  while (std::getline(ss, name, ',')) {
    if (name.empty()) continue;
    ParamSet* ps = model.param_set(name);
    if (!ps) throw DataError("checkpoint carries unknown network '" + name + "'");
    restore_params(ckpt, *ps);
    names.push_back(name);
  }
  return names;
}

std::unique_ptr<Model> load_model(const fs::path& path) {
  Checkpoint ck = load_checkpoint(path);
  auto model = std::make_unique<Model>(config_of(ck), 0);
  restore_networks(ck, *model);
  return model;
}

}  // namespace hwgen
