#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hwgen/alphabet.hpp"
#include "hwgen/autograd.hpp"
#include "hwgen/tensor.hpp"

namespace hwgen {

// Line images are [1, H, W] tensors in [0,1], background 1 and ink 0.

// Grayscale PGM (P2/P5) or PNG, chosen by extension.
Tensor read_image(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Tensor& image);
void write_pgm(const std::filesystem::path& path, const Tensor& image);
void write_image(const std::filesystem::path& path, const Tensor& image);

// Bilinear rescale to `height`, keeping the aspect ratio.
Tensor normalize_height(const Tensor& image, int height);
// Horizontal shear by `degrees`, background padded; the width grows by
// ceil(H * |tan|). Row H-1 (the bottom) stays in place for positive angles.
Tensor shear(const Tensor& image, double degrees);
Tensor mirror(const Tensor& image);
// Shear by an angle drawn uniformly from [-max_degrees, max_degrees].
Tensor slant_augment(const Tensor& image, NoiseSource& rng, double max_degrees = 45.0);
// Smooth random warp: Gaussian displacements (sigma px) on a grid x grid
// lattice, bilinearly interpolated, bilinear resampling.
Tensor warp_grid(const Tensor& image, NoiseSource& rng, int grid = 4, double sigma = 1.5);
// sigma = 1.5 px at height 64, scaled with the image height.
double warp_sigma_for_height(int height);

enum class Split { kTrain, kVal, kTest };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::filesystem::path path;  // absolute after loading
  std::string text;
  std::string author;
  Split split = Split::kTrain;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  std::vector<const ManifestEntry*> split(Split s) const;
};

// Tab-separated "path<TAB>text<TAB>author<TAB>split" lines; '#' starts a
// comment line. Relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path, bool check_files = true);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
// Throws DataError when an author appears in more than one split.
void check_author_disjoint(const DatasetManifest& m);

struct Sample {
  Tensor image;  // normalized to the model height
  std::string text;
  std::vector<int> labels;
  std::string author;
};

// Loads one split, normalizing heights and encoding transcripts.
std::vector<Sample> load_split(const DatasetManifest& m, Split s, const Alphabet& alphabet,
                               int height);

// ---- synthetic corpus ----

struct SynthAuthor {
  std::string id;
  double slant_deg = 0;
  double thickness = 1;    // stroke width in px at height 32
  double width_scale = 1;  // glyph width multiplier
  double jitter = 0;       // baseline jitter in px at height 32
  double spacing = 1;      // gap multiplier between glyphs and words
};

// Characters the stroke font can draw.
const std::string& synth_glyphs();

// Draws `count` authors with spacing spread across the range, so any two
// differ in at least two parameters.
std::vector<SynthAuthor> make_authors(int count, const std::string& prefix, NoiseSource& rng);

Tensor render_line(const std::string& text, const SynthAuthor& author, int height,
                   NoiseSource& rng);

// Random lines of words drawn from a vocabulary restricted to `alphabet`.
std::string random_line(const std::string& alphabet, NoiseSource& rng, int max_chars = 20);

struct SynthConfig {
  int height = 32;
  std::string alphabet = "abcdeghiklmnorstuwy ";
  int train_authors = 4;
  int lines_per_author = 500;
  int val_authors = 0;
  int test_authors = 0;
  int heldout_lines_per_author = 60;
  int max_chars = 20;
};

struct SynthCorpus {
  DatasetManifest manifest;
  std::vector<SynthAuthor> authors;
};

// Writes PNGs, manifest.tsv, authors.tsv and corpus.txt (train
// transcripts) under `out_dir`. Fully determined by (config, seed).
SynthCorpus synth_generate(const SynthConfig& config, std::uint64_t seed,
                           const std::filesystem::path& out_dir);

// One UTF-8 text line per entry; blank lines skipped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace hwgen
