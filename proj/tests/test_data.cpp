#include <cmath>
#include <fstream>
#include <numbers>
#include <unistd.h>

#include "doctest.h"
#include "hwgen/data.hpp"
#include "hwgen/error.hpp"
#include "hwgen/networks.hpp"

using namespace hwgen;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("hwgen_test_data_" + std::to_string(getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor gradient_image(int h, int w) {
  Tensor t(Shape{1, h, w});
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) t.at(0, i, j) = static_cast<Real>(((i * 7 + j * 3) % 17) / 16.0);
  return t;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

}  // namespace

TEST_CASE("normalize_height keeps the aspect ratio") {
  CHECK(normalize_height(gradient_image(128, 400), 64).shape() == Shape{1, 64, 200});
  Tensor same = gradient_image(64, 300);
  CHECK(normalize_height(same, 64) == same);
  Tensor up = normalize_height(gradient_image(32, 100), 64);
  CHECK(up.shape() == Shape{1, 64, 200});
  for (Real v : up.values()) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
  CHECK_THROWS_AS(normalize_height(Tensor(Shape{3, 4}), 64), ShapeError);
}

TEST_CASE("shear") {
  const Tensor img = gradient_image(32, 50);
  SUBCASE("zero angle is the identity") { CHECK(shear(img, 0) == img); }
  SUBCASE("width grows by H*|tan|") {
    for (double deg : {-45.0, -20.0, 10.0, 45.0}) {
      const int extra = static_cast<int>(std::ceil(32 * std::abs(std::tan(deg * std::numbers::pi / 180)) - 1e-9));
      Tensor s = shear(img, deg);
      CHECK(s.dim(1) == 32);
      CHECK(s.dim(2) == 50 + extra);
    }
  }
  SUBCASE("opposite angles are mirror conjugates") {
    for (double deg : {7.0, 30.0, 45.0}) {
      Tensor a = mirror(shear(img, deg));
      Tensor b = shear(mirror(img), -deg);
      REQUIRE(a.shape() == b.shape());
      double m = 0;
      for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
      CHECK(m < 1e-9);
    }
  }
  SUBCASE("slant augmentation keeps the height and value range") {
    NoiseSource rng(4);
    for (int k = 0; k < 20; ++k) {
      Tensor s = slant_augment(img, rng);
      CHECK(s.dim(1) == 32);
      CHECK(s.dim(2) >= 50);
      CHECK(s.dim(2) <= 50 + 32);
      for (Real v : s.values()) CHECK((v >= 0 && v <= 1));
    }
  }
}

TEST_CASE("warp grid") {
  NoiseSource rng(1);
  const SynthAuthor author{"x", 0, 2, 1, 0, 1};
  Tensor img = render_line("hello world", author, 32, rng);
  Tensor w = warp_grid(img, rng, 4, warp_sigma_for_height(32));
  CHECK(w.shape() == img.shape());
  double diff = 0;
  for (std::size_t i = 0; i < img.size(); ++i) diff += std::abs(double(img[i]) - w[i]);
  CHECK(diff > 1);
  for (Real v : w.values()) CHECK((v >= 0 && v <= 1));
  CHECK(warp_sigma_for_height(64) == 1.5);
  CHECK(warp_grid(img, rng, 4, 0.0) == img);
}

TEST_CASE("image round trips") {
  fs::path dir = scratch("io");
  Tensor img = gradient_image(8, 13);
  for (const char* name : {"a.png", "a.pgm"}) {
    write_image(dir / name, img);
    Tensor back = read_image(dir / name);
    REQUIRE(back.shape() == img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back[i] - img[i]) <= 0.5 / 255 + 1e-12);
  }
  write_text(dir / "ascii.pgm", "P2\n# comment\n3 1\n4\n0 2 4\n");
  Tensor ascii = read_image(dir / "ascii.pgm");
  CHECK(ascii.shape() == Shape{1, 1, 3});
  CHECK(ascii[1] == doctest::Approx(0.5));
  CHECK_THROWS_AS(read_image(dir / "missing.png"), DataError);
  CHECK_THROWS_AS(read_image(dir / "a.bmp"), DataError);
  write_text(dir / "bad.pgm", "P7\n");
  CHECK_THROWS_AS(read_image(dir / "bad.pgm"), DataError);
}

TEST_CASE("manifest") {
  fs::path dir = scratch("manifest");
  write_pgm(dir / "a.pgm", gradient_image(4, 4));
  SUBCASE("valid manifest loads all rows") {
    write_text(dir / "m.tsv",
               "# header\na.pgm\thello\tw1\ttrain\na.pgm\tworld\tw1\ttrain\n\na.pgm\tsky\tw2\tval\n");
    DatasetManifest m = load_manifest(dir / "m.tsv");
    CHECK(m.entries.size() == 3);
    CHECK(m.split(Split::kTrain).size() == 2);
    CHECK(m.split(Split::kVal).size() == 1);
    CHECK(m.entries[0].path == dir / "a.pgm");
    save_manifest(dir / "copy.tsv", m);
    CHECK(load_manifest(dir / "copy.tsv").entries.size() == 3);
  }
  SUBCASE("an author in two splits is rejected") {
    write_text(dir / "m.tsv", "a.pgm\thello\tw1\ttrain\na.pgm\tworld\tw1\ttest\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.tsv"), DataError);
  }
  SUBCASE("empty manifest") {
    write_text(dir / "m.tsv", "# nothing\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.tsv"), DataError);
  }
  SUBCASE("missing image, bad split, wrong field count") {
    write_text(dir / "m.tsv", "b.pgm\thello\tw1\ttrain\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.tsv"), DataError);
    CHECK_NOTHROW(load_manifest(dir / "m.tsv", false));
    write_text(dir / "m.tsv", "a.pgm\thello\tw1\tdev\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.tsv"), DataError);
    write_text(dir / "m.tsv", "a.pgm\thello\tw1\n");
    CHECK_THROWS_AS(load_manifest(dir / "m.tsv"), DataError);
  }
  SUBCASE("out-of-alphabet transcripts are reported with their position") {
    write_text(dir / "m.tsv", "a.pgm\thex\tw1\ttrain\n");
    DatasetManifest m = load_manifest(dir / "m.tsv");
    try {
      load_split(m, Split::kTrain, Alphabet::from_utf8("he"), 32);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("position 2") != std::string::npos);
    }
    auto samples = load_split(m, Split::kTrain, Alphabet::from_utf8("hex"), 32);
    REQUIRE(samples.size() == 1);
    CHECK(samples[0].image.dim(1) == 32);
    CHECK(samples[0].labels == std::vector<int>{1, 2, 3});
  }
}

TEST_CASE("synthetic authors") {
  NoiseSource rng(3);
  auto authors = make_authors(6, "a", rng);
  for (std::size_t i = 0; i < authors.size(); ++i) {
    for (std::size_t j = i + 1; j < authors.size(); ++j) {
      const auto& a = authors[i];
      const auto& b = authors[j];
      int differ = (a.slant_deg != b.slant_deg) + (a.thickness != b.thickness) +
                   (a.width_scale != b.width_scale) + (a.jitter != b.jitter) + (a.spacing != b.spacing);
      CHECK(differ >= 2);
      CHECK(a.spacing < b.spacing);
    }
  }
  SUBCASE("renders differ across authors for the same text") {
    NoiseSource r(9);
    std::vector<Tensor> imgs;
    int width = 0;
    for (const auto& a : authors) {
      imgs.push_back(render_line("good morning", a, 32, r));
      width = std::max(width, imgs.back().dim(2));
    }
    for (std::size_t i = 0; i + 1 < imgs.size(); ++i) {
      Tensor x = fit_width(imgs[i], width), y = fit_width(imgs[i + 1], width);
      double l1 = 0;
      for (std::size_t k = 0; k < x.size(); ++k) l1 += std::abs(double(x[k]) - y[k]);
      CHECK(l1 / x.size() > 0.02);
    }
  }
  SUBCASE("unknown glyph") {
    NoiseSource r(9);
    CHECK_THROWS_AS(render_line("zebra", authors[0], 32, r), DataError);
  }
  SUBCASE("random lines stay inside the alphabet") {
    NoiseSource r(2);
    Alphabet abc = Alphabet::from_utf8("abcdeghiklmnorstuwy ");
    for (int k = 0; k < 200; ++k) {
      std::string line = random_line(abc.utf8(), r, 20);
      CHECK_FALSE(line.empty());
      CHECK(line.size() <= 20);
      CHECK_NOTHROW(abc.encode(line));
    }
  }
}

TEST_CASE("synthetic corpus generation") {
  SynthConfig cfg;
  SUBCASE("4 authors x 500 lines") {
    fs::path dir = scratch("synth_full");
    SynthCorpus c = synth_generate(cfg, 11, dir);
    CHECK(c.manifest.entries.size() == 2000);
    CHECK(c.authors.size() == 4);
    DatasetManifest m = load_manifest(dir / "manifest.tsv");
    CHECK(m.entries.size() == 2000);
    CHECK(read_lines(dir / "corpus.txt").size() == 2000);
  }
  SUBCASE("relative output directory") {
    cfg.train_authors = 1;
    cfg.lines_per_author = 2;
    fs::path base = scratch("synth_rel");
    fs::create_directories(base);
    const fs::path cwd = fs::current_path();
    fs::current_path(base);
    synth_generate(cfg, 2, "rel");
    DatasetManifest m = load_manifest("rel/manifest.tsv");
    fs::current_path(cwd);
    REQUIRE(m.entries.size() == 2);
    CHECK(m.entries[0].path.string() == (base / "rel" / "images" / "train00_0000.png").string());
  }
  SUBCASE("reproducible from the seed, with author-disjoint held-out splits") {
    cfg.train_authors = 2;
    cfg.lines_per_author = 5;
    cfg.val_authors = 2;
    cfg.test_authors = 1;
    cfg.heldout_lines_per_author = 3;
    fs::path a = scratch("synth_a"), b = scratch("synth_b");
    SynthCorpus ca = synth_generate(cfg, 5, a);
    SynthCorpus cb = synth_generate(cfg, 5, b);
    REQUIRE(ca.manifest.entries.size() == 19);
    for (std::size_t i = 0; i < ca.manifest.entries.size(); ++i) {
      CHECK(ca.manifest.entries[i].text == cb.manifest.entries[i].text);
      CHECK(slurp(ca.manifest.entries[i].path) == slurp(cb.manifest.entries[i].path));
    }
    DatasetManifest m = load_manifest(a / "manifest.tsv");
    CHECK(m.split(Split::kVal).size() == 6);
    CHECK(m.split(Split::kTest).size() == 3);
    auto val = load_split(m, Split::kVal, Alphabet::from_utf8(cfg.alphabet), 32);
    for (const auto& s : val) {
      CHECK(s.image.dim(1) == 32);
      for (Real v : s.image.values()) CHECK((v >= 0 && v <= 1));
    }
  }
  SUBCASE("alphabet the font cannot draw") {
    cfg.alphabet = "abq";
    CHECK_THROWS_AS(synth_generate(cfg, 1, scratch("synth_bad")), DataError);
  }
}
