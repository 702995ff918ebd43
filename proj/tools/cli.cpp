#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "hwgen/data.hpp"
#include "hwgen/error.hpp"
#include "hwgen/eval.hpp"
#include "hwgen/trainer.hpp"
#include "json.hpp"

namespace hwgen::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---- run config ----

std::map<std::string, std::string> RunConfig::defaults(const std::string& preset) {
  ModelConfig mc;
  if (preset == "desk") {
    mc = ModelConfig::desk();
  } else if (preset == "paper") {
    mc = ModelConfig::paper();
  } else {
    throw UsageError("unknown preset '" + preset + "' (expected desk or paper)");
  }
  const bool desk = preset == "desk";
  std::map<std::string, std::string> d{
      {"command", ""},
      {"seed", "1"},
      {"out", ""},
      {"data", ""},
      {"corpus", ""},
      {"checkpoint", ""},
      {"r_checkpoint", ""},
      {"e_checkpoint", ""},

      {"train.steps", desk ? "4000" : "175000"},
      {"train.lr", "0.0002"},
      {"train.d_lr", "0.0002"},
      {"train.beta1", "0.5"},
      {"train.beta2", "0.999"},
      {"train.weight.auto_r", "1.0"},
      {"train.weight.adv_g", "0.5"},
      {"train.weight.rec_g", "0.6"},
      {"train.weight.adv_r", "0.4"},
      {"train.weight.rec_r", "0.75"},
      {"train.slant_max_deg", "45"},
      {"train.log_every", "50"},
      {"train.checkpoint_every", "1000"},

      {"pretrain_r.iterations", desk ? "8000" : "20000"},
      {"pretrain_r.lr", "0.001"},
      {"pretrain_r.batch", "4"},
      {"pretrain_r.warp", "true"},
      {"pretrain_r.slant_max_deg", "0"},
      {"pretrain_r.eval_every", "500"},

      {"pretrain_e.iterations", "6000"},
      {"pretrain_e.lr", "0.0002"},
      {"pretrain_e.batch", "4"},
      {"pretrain_e.warp", "true"},
      {"pretrain_e.eval_every", "500"},

      {"synth.train_authors", "4"},
      {"synth.lines_per_author", "500"},
      {"synth.val_authors", "2"},
      {"synth.test_authors", "2"},
      {"synth.heldout_lines", "60"},
      {"synth.max_chars", "20"},

      {"eval.split", "val"}, {"eval.width_split", "train"},
      {"eval.max_lines", "0"},
      {"eval.generated", "100"},
      {"eval.width_text", desk ? "we like a good day" : "the quick brown fox"},

      {"reconstruct.split", "val"},
      {"reconstruct.count", "8"},
      {"interpolate.k", "5"},
      {"interpolate.style_a", ""},
      {"interpolate.style_b", ""},
      {"interpolate.text", ""},
      {"generate.text", ""},
      {"generate.style", ""},
      {"generate.spaced_from", ""},
      {"generate.output", ""},
      {"extract_style.images", ""},
      {"extract_style.output", ""},
      {"reconstruct.image", ""},
      {"reconstruct.text", ""},
  };
  for (const auto& [k, v] : mc.to_map()) {
    if (k == "preset") {
      d["preset"] = v;
    } else {
      d["model." + k] = v;
    }
  }
  return d;
}

RunConfig::RunConfig(const std::string& preset) : values_(defaults(preset)) {}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  if (key == "preset" && value != it->second) {
    throw UsageError("preset must be chosen before other keys are applied");
  }
  it->second = value;
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
  return it->second;
}

long RunConfig::integer(const std::string& key) const {
  const std::string& v = str(key);
  std::size_t used = 0;
  long x = 0;
  try {
    x = std::stol(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw UsageError(key + ": expected an integer, got '" + v + "'");
  return x;
}

double RunConfig::real(const std::string& key) const {
  const std::string& v = str(key);
  std::size_t used = 0;
  double x = 0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size() || !std::isfinite(x)) {
    throw UsageError(key + ": expected a number, got '" + v + "'");
  }
  return x;
}

bool RunConfig::flag(const std::string& key) const {
  const std::string& v = str(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw UsageError(key + ": expected true or false, got '" + v + "'");
}

ModelConfig RunConfig::model() const {
  std::map<std::string, std::string> m{{"preset", str("preset")}};
  for (const auto& [k, v] : values_) {
    if (k.rfind("model.", 0) == 0) m[k.substr(6)] = v;
  }
  ModelConfig c = ModelConfig::from_map(m);
  c.validate();
  return c;
}

namespace {

bool needs_quotes(const std::string& v) {
  if (v.empty()) return false;
  if (v.front() == ' ' || v.back() == ' ' || v.front() == '"') return true;
  return v.find_first_of("#\t\n") != std::string::npos;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::write(const fs::path& path) const {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# hwgen resolved config; replay with --config " << path.filename().string() << "\n";
  for (const auto& [k, v] : values_) {
    out << k << " = " << (needs_quotes(v) ? json(v).dump() : v) << '\n';
  }
}

std::map<std::string, std::string> RunConfig::read(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read config " + path.string());
  std::map<std::string, std::string> m;
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (!value.empty() && value.front() == '"') {
      try {
        value = json::parse(value).get<std::string>();
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(no) + ": malformed quoted value");
      }
    }
    m[key] = value;
  }
  return m;
}

// ---- style files ----

void write_style(const fs::path& path, const Tensor& style) {
  if (style.rank() != 1) throw ShapeError("style must be a vector");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "hwgen-style v1 " << style.size() << '\n';
  char buf[40];
  for (std::size_t i = 0; i < style.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", static_cast<double>(style[i]));
    out << (i ? " " : "") << buf;
  }
  out << '\n';
}

Tensor read_style(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read style file " + path.string());
  std::string magic, version;
  long dim = -1;
  in >> magic >> version >> dim;
  if (!in || magic != "hwgen-style" || version != "v1" || dim <= 0) {
    throw DataError("malformed style file " + path.string() + ": bad header");
  }
  Tensor t(Shape{static_cast<int>(dim)});
  for (long i = 0; i < dim; ++i) {
    double v = 0;
    if (!(in >> v) || !std::isfinite(v)) {
      throw DataError("malformed style file " + path.string() + ": value " + std::to_string(i) + " missing or invalid");
    }
    t[static_cast<std::size_t>(i)] = static_cast<Real>(v);
  }
  std::string extra;
  if (in >> extra) throw DataError("malformed style file " + path.string() + ": trailing data");
  return t;
}

// ---- commands ----

namespace {

struct Context {
  RunConfig cfg;
  fs::path out;
  std::ostream& log;
};

std::uint64_t seed_of(const RunConfig& c) {
  const long s = c.integer("seed");
  if (s < 0) throw UsageError("seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

const std::string& required(const RunConfig& c, const std::string& key, const std::string& flag) {
  const std::string& v = c.str(key);
  if (v.empty()) throw UsageError(c.str("command") + " needs " + flag);
  return v;
}

// Checkpoints loaded for inference fix the model keys of the run.
std::unique_ptr<Model> load_for_run(Context& ctx) {
  const fs::path p = required(ctx.cfg, "checkpoint", "--checkpoint");
  if (!fs::exists(p)) throw DataError("checkpoint not found: " + p.string());
  auto model = load_model(p);
  for (const auto& [k, v] : model->config.to_map()) {
    if (k != "preset") ctx.cfg.set("model." + k, v);
  }
  return model;
}

void load_networks_into(Model& model, const fs::path& p, const std::string& expect) {
  if (!fs::exists(p)) throw DataError("checkpoint not found: " + p.string());
  Checkpoint ck = load_checkpoint(p);
  const auto want = model.config.to_map();
  for (const auto& [k, v] : want) {
    auto it = ck.config.find(k);
    if (k != "preset" && (it == ck.config.end() || it->second != v)) {
      throw DataError(p.string() + " was written for a different model (" + k + ")");
    }
  }
  auto names = restore_networks(ck, model);
  if (std::find(names.begin(), names.end(), expect) == names.end()) {
    throw DataError(p.string() + " does not contain network " + expect);
  }
}

Split split_of(const RunConfig& c, const std::string& key) {
  try {
    return parse_split(c.str(key));
  } catch (const DataError& e) {
    throw UsageError(key + ": " + e.what());
  }
}

std::vector<Sample> heldout_samples(const DatasetManifest& m, const Alphabet& abc, int height) {
  for (Split s : {Split::kVal, Split::kTest}) {
    if (!m.split(s).empty()) return load_split(m, s, abc, height);
  }
  return {};
}

std::vector<int> encode_text(const Alphabet& abc, const std::string& text) {
  if (text.empty()) throw UsageError("text is empty");
  try {
    return abc.encode(text);
  } catch (const DataError& e) {
    throw DataError(std::string("text: ") + e.what());
  }
}

Tensor load_line(const fs::path& p, const ModelConfig& mc) {
  return pad_width_to_multiple(normalize_height(read_image(p), mc.height), mc.px_per_pos);
}

Tensor stack_rows(const std::vector<Tensor>& rows, int gap) {
  int w = 0, h = 0;
  for (const auto& r : rows) {
    w = std::max(w, r.dim(2));
    h += r.dim(1) + gap;
  }
  Tensor out(Shape{1, std::max(1, h - gap), std::max(1, w)}, Real(1));
  int y = 0;
  for (const auto& r : rows) {
    for (int i = 0; i < r.dim(1); ++i)
      for (int j = 0; j < r.dim(2); ++j) out.at(0, y + i, j) = r.at(0, i, j);
    y += r.dim(1) + gap;
  }
  return out;
}

TrainOptions train_options(const RunConfig& c) {
  TrainOptions o;
  o.steps = c.integer("train.steps");
  o.seed = seed_of(c);
  o.gen_adam = {c.real("train.lr"), c.real("train.beta1"), c.real("train.beta2"), 1e-8};
  o.disc_adam = {c.real("train.d_lr"), c.real("train.beta1"), c.real("train.beta2"), 1e-8};
  o.weights = {c.real("train.weight.auto_r"), c.real("train.weight.adv_g"), c.real("train.weight.rec_g"),
               c.real("train.weight.adv_r"), c.real("train.weight.rec_r")};
  o.slant_max_deg = c.real("train.slant_max_deg");
  o.log_every = static_cast<int>(c.integer("train.log_every"));
  o.checkpoint_every = static_cast<int>(c.integer("train.checkpoint_every"));
  if (o.steps < 0) throw UsageError("train.steps must be non-negative");
  return o;
}

PretrainOptions pretrain_options(const RunConfig& c, const std::string& prefix) {
  PretrainOptions o;
  o.iterations = static_cast<int>(c.integer(prefix + ".iterations"));
  o.lr = c.real(prefix + ".lr");
  o.batch = static_cast<int>(c.integer(prefix + ".batch"));
  o.warp = c.flag(prefix + ".warp");
  o.eval_every = static_cast<int>(c.integer(prefix + ".eval_every"));
  o.seed = seed_of(c);
  if (prefix == "pretrain_r") o.slant_max_deg = c.real("pretrain_r.slant_max_deg");
  if (o.iterations < 0 || o.batch <= 0) throw UsageError(prefix + ": iterations >= 0 and batch > 0 required");
  return o;
}

void cmd_synth(Context& ctx) {
  const ModelConfig mc = ctx.cfg.model();
  SynthConfig sc;
  sc.height = mc.height;
  sc.alphabet = mc.alphabet;
  sc.train_authors = static_cast<int>(ctx.cfg.integer("synth.train_authors"));
  sc.lines_per_author = static_cast<int>(ctx.cfg.integer("synth.lines_per_author"));
  sc.val_authors = static_cast<int>(ctx.cfg.integer("synth.val_authors"));
  sc.test_authors = static_cast<int>(ctx.cfg.integer("synth.test_authors"));
  sc.heldout_lines_per_author = static_cast<int>(ctx.cfg.integer("synth.heldout_lines"));
  sc.max_chars = static_cast<int>(ctx.cfg.integer("synth.max_chars"));
  SynthCorpus c = synth_generate(sc, seed_of(ctx.cfg), ctx.out);
  ctx.log << "wrote " << c.manifest.entries.size() << " lines by " << c.authors.size() << " authors to "
          << (ctx.out / "manifest.tsv").string() << '\n';
}

void cmd_pretrain(Context& ctx, bool recognizer) {
  const ModelConfig mc = ctx.cfg.model();
  DatasetManifest m = load_manifest(required(ctx.cfg, "data", "--data"));
  Model model(mc, seed_of(ctx.cfg));
  auto train = load_split(m, Split::kTrain, model.alphabet, mc.height);
  auto held = heldout_samples(m, model.alphabet, mc.height);
  std::ofstream metrics(ctx.out / "metrics.jsonl");
  auto log = [&](const std::string& line) {
    metrics << line << '\n' << std::flush;
    ctx.log << line << '\n';
  };
  const std::string prefix = recognizer ? "pretrain_r" : "pretrain_e";
  PretrainOptions o = pretrain_options(ctx.cfg, prefix);
  PretrainReport rep = recognizer ? pretrain_recognizer(*model.R, mc, train, held, o, log)
                                  : pretrain_encoder(*model.E, mc, train, held, o, log);
  const fs::path ck = ctx.out / (recognizer ? "recognizer.ckpt" : "encoder.ckpt");
  const std::vector<std::string> nets{recognizer ? "R" : "E"};
  save_model(ck, model, nets, {{"meta.heldout", std::to_string(rep.final_metric)}});
  json j{{"checkpoint", ck.string()}, {recognizer ? "heldout_cer" : "heldout_l1", rep.final_metric}};
  std::ofstream(ctx.out / "summary.json") << j.dump(2) << '\n';
  ctx.log << j.dump() << '\n';
}

void cmd_train(Context& ctx) {
  const ModelConfig mc = ctx.cfg.model();
  DatasetManifest m = load_manifest(required(ctx.cfg, "data", "--data"));
  Model model(mc, seed_of(ctx.cfg));
  load_networks_into(model, required(ctx.cfg, "r_checkpoint", "--r-checkpoint"), "R");
  load_networks_into(model, required(ctx.cfg, "e_checkpoint", "--e-checkpoint"), "E");
  auto train = load_split(m, Split::kTrain, model.alphabet, mc.height);
  std::vector<std::vector<int>> corpus;
  if (!ctx.cfg.str("corpus").empty()) {
    const auto lines = read_lines(ctx.cfg.str("corpus"));
    for (std::size_t i = 0; i < lines.size(); ++i) {
      try {
        corpus.push_back(model.alphabet.encode(lines[i]));
      } catch (const DataError& e) {
        throw DataError(ctx.cfg.str("corpus") + ":" + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
  Trainer tr(model, train_options(ctx.cfg), std::move(train), std::move(corpus));
  tr.run(ctx.out, [&](const std::string& line) { ctx.log << line << '\n'; });
  ctx.log << "wrote " << (ctx.out / "model.ckpt").string() << '\n';
}

void cmd_generate(Context& ctx) {
  const std::string text = required(ctx.cfg, "generate.text", "--text");
  const std::string style_path = ctx.cfg.str("generate.style");
  const std::string spaced_from = ctx.cfg.str("generate.spaced_from");
  const std::string output = ctx.cfg.str("generate.output");
  auto model = load_for_run(ctx);
  const auto labels = encode_text(model->alphabet, text);
  Tensor style;
  if (!style_path.empty()) {
    style = read_style(style_path);
  } else {
    NoiseSource rng(seed_of(ctx.cfg));
    style = Tensor(Shape{model->config.style_dim});
    rng.fill_normal(style);
  }
  if (style.size() != static_cast<std::size_t>(model->config.style_dim)) {
    throw DataError("style file has dimension " + std::to_string(style.size()) + ", model expects " +
                    std::to_string(model->config.style_dim));
  }
  Tensor img;
  if (!spaced_from.empty()) {
    Tensor src = load_line(spaced_from, model->config);
    img = render_spaced_line(*model, dataset_spaced_text(*model->R, src, labels), style, seed_of(ctx.cfg));
  } else {
    img = generate_line(*model, labels, style, seed_of(ctx.cfg));
  }
  const fs::path out = output.empty() ? ctx.out / "generated.png" : fs::path(output);
  write_image(out, img);
  ctx.log << "wrote " << out.string() << " (" << img.dim(2) << " px wide)\n";
}

void cmd_extract_style(Context& ctx) {
  std::vector<std::string> images;
  try {
    images = json::parse(required(ctx.cfg, "extract_style.images", "--image")).get<std::vector<std::string>>();
  } catch (const json::exception&) {
    throw UsageError("extract_style.images: expected a JSON list of paths");
  }
  if (images.empty()) throw UsageError("extract-style needs --image");
  const std::string output = ctx.cfg.str("extract_style.output");
  auto model = load_for_run(ctx);
  std::vector<Tensor> lines;
  for (const auto& p : images) lines.push_back(load_line(p, model->config));
  Tensor style = extract_style_from(*model, lines);
  const fs::path out = output.empty() ? ctx.out / "style.txt" : fs::path(output);
  write_style(out, style);
  ctx.log << "wrote " << out.string() << '\n';
}

void cmd_interpolate(Context& ctx) {
  const std::string a = required(ctx.cfg, "interpolate.style_a", "--style-a");
  const std::string b = required(ctx.cfg, "interpolate.style_b", "--style-b");
  const std::string text = required(ctx.cfg, "interpolate.text", "--text");
  auto model = load_for_run(ctx);
  const auto labels = encode_text(model->alphabet, text);
  const Tensor sa = read_style(a), sb = read_style(b);
  if (sa.shape() != sb.shape() || sa.size() != static_cast<std::size_t>(model->config.style_dim)) {
    throw DataError("style dimensions do not match the model");
  }
  const long k = ctx.cfg.integer("interpolate.k");
  if (k < 2) throw UsageError("interpolate.k must be at least 2");
  std::vector<Tensor> rows;
  for (long i = 0; i < k; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(k - 1);
    Tensor s(sa.shape());
    for (std::size_t d = 0; d < s.size(); ++d) {
      s[d] = static_cast<Real>((1 - alpha) * sa[d] + alpha * sb[d]);
    }
    rows.push_back(generate_line(*model, labels, s, seed_of(ctx.cfg)));
    char name[32];
    std::snprintf(name, sizeof name, "interp_%02ld.png", i);
    write_image(ctx.out / name, rows.back());
  }
  write_image(ctx.out / "strip.png", stack_rows(rows, 4));
  ctx.log << "wrote " << k << " images and " << (ctx.out / "strip.png").string() << '\n';
}

void cmd_reconstruct(Context& ctx) {
  const std::string image = ctx.cfg.str("reconstruct.image");
  const std::string text = ctx.cfg.str("reconstruct.text");
  if (!image.empty() && text.empty()) throw UsageError("--image needs --text");
  auto model = load_for_run(ctx);
  struct Item {
    Tensor image;
    std::vector<int> labels;
    std::string name;
  };
  std::vector<Item> items;
  if (!image.empty()) {
    items.push_back({load_line(image, model->config), encode_text(model->alphabet, text), "000"});
  } else {
    DatasetManifest m = load_manifest(required(ctx.cfg, "data", "--data or --image"));
    auto samples = load_split(m, split_of(ctx.cfg, "reconstruct.split"), model->alphabet, model->config.height);
    const long n = std::min<long>(ctx.cfg.integer("reconstruct.count"), static_cast<long>(samples.size()));
    for (long i = 0; i < n; ++i) {
      char name[24];
      std::snprintf(name, sizeof name, "%03ld", i);
      items.push_back({pad_width_to_multiple(samples[i].image, model->config.px_per_pos), samples[i].labels, name});
    }
  }
  std::ofstream records(ctx.out / "reconstruct.jsonl");
  for (const auto& it : items) {
    const std::vector<Tensor> one{it.image};
    Tensor style = extract_style_from(*model, one);
    Tensor recon = render_spaced_line(*model, dataset_spaced_text(*model->R, it.image, it.labels), style,
                                      seed_of(ctx.cfg));
    Tensor target = fit_width(it.image, recon.dim(2));
    double l1 = 0;
    for (std::size_t i = 0; i < recon.size(); ++i) l1 += std::abs(double(recon[i]) - target[i]);
    write_image(ctx.out / (it.name + "_original.png"), it.image);
    write_image(ctx.out / (it.name + "_reconstruction.png"), recon);
    write_image(ctx.out / (it.name + "_pair.png"), stack_rows({it.image, recon}, 4));
    records << json{{"item", it.name}, {"text", model->alphabet.decode(it.labels)}, {"l1", l1 / recon.size()}}.dump()
            << '\n';
  }
  ctx.log << "wrote " << items.size() << " reconstructions to " << ctx.out.string() << '\n';
}

void cmd_eval(Context& ctx) {
  auto model = load_for_run(ctx);
  const ModelConfig& mc = model->config;
  DatasetManifest m = load_manifest(required(ctx.cfg, "data", "--data"));
  auto samples = load_split(m, split_of(ctx.cfg, "eval.split"), model->alphabet, mc.height);
  const long max_lines = ctx.cfg.integer("eval.max_lines");
  if (max_lines > 0 && static_cast<long>(samples.size()) > max_lines) samples.resize(max_lines);
  if (samples.empty()) throw DataError("evaluation split is empty");

  std::vector<Tensor> styles;
  std::vector<std::string> authors;
  std::map<std::string, std::vector<Tensor>> lines_by_author;
  for (const auto& s : samples) {
    Tensor img = pad_width_to_multiple(s.image, mc.px_per_pos);
    const std::vector<Tensor> one{img};
    styles.push_back(extract_style_from(*model, one));
    authors.push_back(s.author);
    lines_by_author[s.author].push_back(img);
  }
  json report;
  report["split"] = ctx.cfg.str("eval.split");
  report["lines"] = samples.size();
  report["recognizer_cer"] = recognizer_cer(*model->R, mc, samples);
  if (lines_by_author.size() >= 2) {
    StyleStats st = style_stats(styles, authors);
    report["style_stats"] = {{"intra_mean", st.intra_mean}, {"intra_std", st.intra_std},
                             {"inter_mean", st.inter_mean}, {"inter_std", st.inter_std},
                             {"intra_pairs", st.intra_pairs}, {"inter_pairs", st.inter_pairs}};
  }

  // Legibility of lines generated from styles sampled around the extracted ones.
  StyleHistory hist;
  for (const auto& s : styles) hist.push(s);
  NoiseSource rng(seed_of(ctx.cfg));
  std::vector<Tensor> generated;
  std::vector<std::vector<int>> texts;
  const long n_gen = ctx.cfg.integer("eval.generated");
  for (long i = 0; i < n_gen; ++i) {
    const auto& text = samples[static_cast<std::size_t>(i) % samples.size()].labels;
    StyleSample ys = sample_style(hist, rng, mc.style_dim);
    generated.push_back(generate_line(*model, text, ys.style, seed_of(ctx.cfg) + static_cast<std::uint64_t>(i)));
    texts.push_back(text);
  }
  if (!generated.empty()) report["legibility_cer"] = legibility_cer(generated, texts, *model->R);
  if (!generated.empty()) write_image(ctx.out / "generated_examples.png",
                                      stack_rows({generated.begin(), generated.begin() + std::min<long>(8, n_gen)}, 4));

  // Width of a fixed text under each author's style (two lines per author, as in training).
  const auto width_labels = encode_text(model->alphabet, ctx.cfg.str("eval.width_text"));
  std::map<std::string, std::vector<Tensor>> width_lines;
  for (const auto& e : m.split(split_of(ctx.cfg, "eval.width_split"))) {
    auto& imgs = width_lines[e->author];
    if (imgs.size() < 2) {
      imgs.push_back(pad_width_to_multiple(normalize_height(read_image(e->path), mc.height), mc.px_per_pos));
    }
  }
  if (width_lines.empty()) throw DataError("width split is empty");
  std::vector<Tensor> author_styles;
  std::vector<std::string> author_ids;
  for (const auto& [a, imgs] : width_lines) {
    author_styles.push_back(extract_style_from(*model, imgs));
    author_ids.push_back(a);
  }
  report["width_split"] = ctx.cfg.str("eval.width_split");
  auto widths = width_variability(width_labels, author_styles, *model);
  json wj = json::object();
  for (std::size_t i = 0; i < widths.size(); ++i) wj[author_ids[i]] = widths[i];
  report["widths"] = wj;
  const auto [mn, mx] = std::minmax_element(widths.begin(), widths.end());
  report["width_ratio"] = static_cast<double>(*mx) / static_cast<double>(*mn);

  if (styles.size() >= 3) {
    PcaResult pca = pca_project(styles);
    write_scatter_svg(ctx.out / "styles_pca.svg", pca.coords, authors, "style vectors (PCA)");
  }
  std::ofstream(ctx.out / "eval.json") << report.dump(2) << '\n';
  std::ofstream rec(ctx.out / "eval.jsonl");
  for (auto it = report.begin(); it != report.end(); ++it) rec << json{{"metric", it.key()}, {"value", it.value()}}.dump() << '\n';
  ctx.log << report.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Handwriting line generator: data, pretraining, training, generation and evaluation", "hwgen"};
  app.require_subcommand(1);

  struct Common {
    std::string preset, config, out;
    std::vector<std::string> sets;
    long seed = -1;
  };
  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--preset", common.preset, "desk or paper");
    sub->add_option("--seed", common.seed, "random seed");
    sub->add_option("--config", common.config, "key = value file (e.g. a resolved_config.txt)");
    sub->add_option("--out", common.out, "output directory (default $HWGEN_OUT_DIR/<command> or runs/<command>)");
    sub->add_option("--set", common.sets, "override one config key: key=value")->take_all();
  };

  std::map<std::string, std::string> flag_keys;
  auto key_opt = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&flag_keys, key](const std::string& v) { flag_keys[key] = v; }, help);
  };

  auto* synth = app.add_subcommand("synth", "render a synthetic multi-author corpus");
  auto* pre_r = app.add_subcommand("pretrain-r", "pretrain the recognizer R with CTC");
  auto* pre_e = app.add_subcommand("pretrain-e", "pretrain the perceptual encoder E");
  auto* train = app.add_subcommand("train", "run the training curriculum");
  auto* gen = app.add_subcommand("generate", "render a text line in a style");
  auto* ext = app.add_subcommand("extract-style", "extract a style vector from line images");
  auto* interp = app.add_subcommand("interpolate", "render a text line along a path between two styles");
  auto* recon = app.add_subcommand("reconstruct", "reconstruct lines from their own style and spacing");
  auto* ev = app.add_subcommand("eval", "style statistics, legibility and width variability");
  for (auto* s : {synth, pre_r, pre_e, train, gen, ext, interp, recon, ev}) add_common(s);

  for (auto* s : {pre_r, pre_e, train, recon, ev}) key_opt(s, "--data", "data", "dataset manifest");
  key_opt(train, "--corpus", "corpus", "text lines for sampled content (default: training transcripts)");
  key_opt(train, "--r-checkpoint", "r_checkpoint", "pretrained recognizer");
  key_opt(train, "--e-checkpoint", "e_checkpoint", "pretrained encoder");
  key_opt(train, "--steps", "train.steps", "curriculum steps");
  for (auto* s : {gen, ext, interp, recon, ev}) key_opt(s, "--checkpoint", "checkpoint", "trained model");
  key_opt(interp, "--k", "interpolate.k", "number of evenly spaced styles");
  key_opt(recon, "--split", "reconstruct.split", "manifest split");
  key_opt(recon, "--count", "reconstruct.count", "lines to reconstruct");
  key_opt(ev, "--split", "eval.split", "manifest split");

  key_opt(gen, "--text", "generate.text", "text to render");
  key_opt(gen, "--style", "generate.style", "style file (default: standard-normal style from the seed)");
  key_opt(gen, "--spaced-from", "generate.spaced_from", "image whose dataset spaced text fixes the layout");
  key_opt(gen, "--output", "generate.output", "image path (default <out>/generated.png)");
  std::vector<std::string> ext_images;
  ext->add_option("--image", ext_images, "line image(s); several are concatenated");
  key_opt(ext, "--output", "extract_style.output", "style file path (default <out>/style.txt)");
  key_opt(interp, "--style-a", "interpolate.style_a", "first style file");
  key_opt(interp, "--style-b", "interpolate.style_b", "second style file");
  key_opt(interp, "--text", "interpolate.text", "text to render");
  key_opt(recon, "--image", "reconstruct.image", "single line image instead of a manifest split");
  key_opt(recon, "--text", "reconstruct.text", "transcript of --image");

  std::vector<std::string> argv_store{"hwgen"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string command = sub->get_name();
  try {
    if (sub->get_option("--help")->count() > 0) return kOk;
    std::map<std::string, std::string> file;
    if (!common.config.empty()) file = RunConfig::read(common.config);
    std::string preset = "desk";
    if (file.count("preset")) preset = file["preset"];
    for (const auto& s : common.sets) {
      if (s.rfind("preset=", 0) == 0) preset = s.substr(7);
    }
    if (!common.preset.empty()) preset = common.preset;
    RunConfig cfg(preset);
    for (const auto& [k, v] : file) {
      if (k == "preset") continue;
      if (k == "command" && !v.empty() && v != command) {
        throw UsageError("config was resolved for '" + v + "', not '" + command + "'");
      }
      cfg.set(k, v);
    }
    for (const auto& s : common.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
      if (s.substr(0, eq) == "preset") continue;
      cfg.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (!ext_images.empty()) flag_keys["extract_style.images"] = json(ext_images).dump();
    for (const auto& [k, v] : flag_keys) cfg.set(k, v);
    cfg.set("command", command);
    if (common.seed >= 0) cfg.set("seed", std::to_string(common.seed));
    if (!common.out.empty()) cfg.set("out", common.out);
    if (cfg.str("out").empty()) {
      const char* env = std::getenv("HWGEN_OUT_DIR");
      cfg.set("out", (fs::path(env && *env ? env : "runs") / command).string());
    }
    cfg.model();  // validate early

    Context ctx{cfg, cfg.str("out"), out};
    fs::create_directories(ctx.out);
    if (command == "synth") {
      cmd_synth(ctx);
    } else if (command == "pretrain-r") {
      cmd_pretrain(ctx, true);
    } else if (command == "pretrain-e") {
      cmd_pretrain(ctx, false);
    } else if (command == "train") {
      cmd_train(ctx);
    } else if (command == "generate") {
      cmd_generate(ctx);
    } else if (command == "extract-style") {
      cmd_extract_style(ctx);
    } else if (command == "interpolate") {
      cmd_interpolate(ctx);
    } else if (command == "reconstruct") {
      cmd_reconstruct(ctx);
    } else if (command == "eval") {
      cmd_eval(ctx);
    }
    ctx.cfg.write(ctx.out / "resolved_config.txt");
    return kOk;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUserError;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const InfeasibleTarget& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace hwgen::cli
