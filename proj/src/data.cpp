#include "hwgen/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>
#include <sstream>

#include "hwgen/error.hpp"

namespace fs = std::filesystem;

namespace hwgen {

namespace {

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

Real clamp01(double v) { return static_cast<Real>(std::clamp(v, 0.0, 1.0)); }

// Bilinear sample at continuous pixel-centre coordinates; `fill` outside.
double sample(const Tensor& img, double y, double x, double fill) {
  const int h = img.dim(1), w = img.dim(2);
  const double fy = y - 0.5, fx = x - 0.5;
  const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
  const double ty = fy - y0, tx = fx - x0;
  auto px = [&](int i, int j) {
    return (i < 0 || i >= h || j < 0 || j >= w) ? fill : static_cast<double>(img.at(0, i, j));
  };
  const double top = (1 - tx) * px(y0, x0) + tx * px(y0, x0 + 1);
  const double bot = (1 - tx) * px(y0 + 1, x0) + tx * px(y0 + 1, x0 + 1);
  return (1 - ty) * top + ty * bot;
}

void require_line_image(const Tensor& img, const char* what) {
  if (img.rank() != 3 || img.dim(0) != 1 || img.dim(1) < 1 || img.dim(2) < 1) {
    throw ShapeError(std::string(what) + ": expected a [1,H,W] image, got " + shape_str(img.shape()));
  }
}

// ---- PGM ----

Tensor read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open image " + path.string());
  std::string magic;
  in >> magic;
  if (magic != "P5" && magic != "P2") throw DataError("not a PGM file: " + path.string());
  auto next_int = [&]() {
    int v = 0;
    while (true) {
      in >> std::ws;
      if (in.peek() == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (!(in >> v)) throw DataError("malformed PGM header in " + path.string());
      return v;
    }
  };
  const int w = next_int(), h = next_int(), maxval = next_int();
  if (w < 1 || h < 1 || maxval < 1 || maxval > 65535) throw DataError("bad PGM header in " + path.string());
  Tensor img(Shape{1, h, w});
  if (magic == "P5") {
    in.get();
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(static_cast<std::size_t>(w) * h * bytes);
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()))) {
      throw DataError("truncated PGM data in " + path.string());
    }
    for (std::size_t i = 0; i < img.size(); ++i) {
      const int v = bytes == 2 ? (buf[2 * i] << 8 | buf[2 * i + 1]) : buf[i];
      img[i] = static_cast<Real>(static_cast<double>(v) / maxval);
    }
  } else {
    for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<Real>(double(next_int()) / maxval);
  }
  return img;
}

std::vector<unsigned char> to_bytes(const Tensor& image) {
  std::vector<unsigned char> out(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    out[i] = static_cast<unsigned char>(std::lround(std::clamp<double>(image[i], 0, 1) * 255.0));
  }
  return out;
}

// ---- stroke font ----

struct Pt {
  double x, y;
};
using Stroke = std::vector<Pt>;
struct Glyph {
  double width = 0;
  std::vector<Stroke> strokes;
};

// Vertical metrics in em units (1 em = image height).
constexpr double kAsc = 0.18, kTop = 0.42, kMid = 0.57, kBase = 0.72, kDesc = 0.88;

Stroke arc(double cx, double cy, double rx, double ry, double a0, double a1, int n = 14) {
  Stroke s;
  for (int i = 0; i <= n; ++i) {
    const double a = (a0 + (a1 - a0) * i / n) * std::numbers::pi / 180.0;
    s.push_back({cx + rx * std::cos(a), cy - ry * std::sin(a)});
  }
  return s;
}

Stroke line(double x0, double y0, double x1, double y1) { return {{x0, y0}, {x1, y1}}; }

Stroke join(Stroke a, const Stroke& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

const std::map<char32_t, Glyph>& font() {
  static const std::map<char32_t, Glyph> f = [] {
    std::map<char32_t, Glyph> g;
    const double r = 0.12, ry = 0.15;
    g[U'o'] = {0.28, {arc(0.14, kMid, r, ry, 0, 360, 20)}};
    g[U'a'] = {0.30, {arc(0.14, kMid, r, ry, 30, 330, 18), line(0.26, kTop, 0.26, kBase)}};
    g[U'c'] = {0.26, {arc(0.14, kMid, r, ry, 40, 320, 18)}};
    g[U'd'] = {0.30, {arc(0.14, kMid, r, ry, 30, 330, 18), line(0.26, kAsc, 0.26, kBase)}};
    g[U'b'] = {0.30, {line(0.04, kAsc, 0.04, kBase), arc(0.16, kMid, r, ry, 150, -150, 18)}};
    g[U'e'] = {0.28, {join(line(0.03, kMid, 0.26, kMid), arc(0.145, kMid, 0.115, ry, 0, 320, 18))}};
    g[U'g'] = {0.30,
               {arc(0.14, kMid, r, ry, 30, 330, 18),
                join(line(0.26, kTop, 0.26, 0.80), arc(0.15, 0.80, 0.11, 0.08, 0, -160, 10))}};
    g[U'h'] = {0.30,
               {line(0.04, kAsc, 0.04, kBase),
                join(arc(0.15, 0.53, 0.11, 0.09, 180, 0, 12), line(0.26, 0.53, 0.26, kBase))}};
    g[U'n'] = {0.30,
               {line(0.04, kTop, 0.04, kBase),
                join(arc(0.15, 0.53, 0.11, 0.09, 180, 0, 12), line(0.26, 0.53, 0.26, kBase))}};
    g[U'm'] = {0.40,
               {line(0.04, kTop, 0.04, kBase),
                join(arc(0.12, 0.53, 0.08, 0.09, 180, 0, 10), line(0.20, 0.53, 0.20, kBase)),
                join(arc(0.28, 0.53, 0.08, 0.09, 180, 0, 10), line(0.36, 0.53, 0.36, kBase))}};
    g[U'i'] = {0.14, {line(0.07, kTop, 0.07, kBase), line(0.07, 0.31, 0.07, 0.33)}};
    g[U'l'] = {0.14, {line(0.07, kAsc, 0.07, kBase)}};
    g[U'k'] = {0.26,
               {line(0.04, kAsc, 0.04, kBase), line(0.23, kTop, 0.04, 0.62),
                line(0.11, 0.57, 0.24, kBase)}};
    g[U'r'] = {0.20, {line(0.04, kTop, 0.04, kBase), arc(0.13, 0.52, 0.09, 0.08, 180, 60, 8)}};
    g[U's'] = {0.26,
               {join(arc(0.13, 0.495, 0.10, 0.075, 30, 270, 10),
                     arc(0.13, 0.645, 0.10, 0.075, 90, -150, 10))}};
    g[U't'] = {0.22,
               {join(line(0.10, 0.26, 0.10, 0.66), arc(0.15, 0.66, 0.05, 0.06, 180, 300, 6)),
                line(0.02, kTop, 0.20, kTop)}};
    g[U'u'] = {0.30,
               {join(line(0.04, kTop, 0.04, 0.62), arc(0.15, 0.62, 0.11, 0.10, 180, 360, 12)),
                line(0.26, kTop, 0.26, kBase)}};
    g[U'w'] = {0.38, {{{0.0, kTop}, {0.09, kBase}, {0.18, 0.50}, {0.27, kBase}, {0.36, kTop}}}};
    g[U'y'] = {0.30, {line(0.02, kTop, 0.15, kBase), line(0.28, kTop, 0.08, kDesc)}};
    g[U' '] = {0.18, {}};
    return g;
  }();
  return f;
}

void draw_segment(Tensor& cov, Pt a, Pt b, double radius) {
  const int h = cov.dim(1), w = cov.dim(2);
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - radius - 1)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - radius - 1)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + radius + 1)));
  const double dx = b.x - a.x, dy = b.y - a.y, len2 = dx * dx + dy * dy;
  for (int i = y0; i <= y1; ++i) {
    for (int j = x0; j <= x1; ++j) {
      const double px = j + 0.5, py = i + 0.5;
      double t = len2 > 0 ? ((px - a.x) * dx + (py - a.y) * dy) / len2 : 0;
      t = std::clamp(t, 0.0, 1.0);
      const double d = std::hypot(px - (a.x + t * dx), py - (a.y + t * dy));
      const double c = std::clamp(radius + 0.5 - d, 0.0, 1.0);
      Real& v = cov.at(0, i, j);
      v = std::max(v, static_cast<Real>(c));
    }
  }
}

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "the", "and", "this", "said", "could", "were", "blue", "night", "light", "more",
      "hand", "words", "are", "with", "house", "school", "mouse", "bird", "garden", "letter",
      "silent", "lemon", "ocean", "winter", "summer", "rain", "snow", "cloud", "road", "street",
      "market", "island", "kind", "child", "old", "good", "story", "history", "hold", "trees",
      "sister", "brother", "mother", "under", "around", "another", "nothing", "thinking",
      "running", "building", "reading", "writing", "listen", "soldier", "science", "remember",
      "side", "while", "why", "who", "week", "year", "day", "tomorrow", "morning", "kitchen",
      "table", "window", "door", "room", "music", "song", "dream", "smile", "cold", "warm",
      "brown", "green", "yellow", "red", "white", "black", "small", "little", "big", "long",
      "short", "tall", "slow", "sure", "true", "real", "line", "time", "lime", "mind", "ring",
      "king", "sing", "thing", "moon", "star", "sun", "sky", "sea", "wind", "stone", "sand",
      "tree", "leaf", "root", "seed", "grow", "build", "wall", "hill", "lake", "river",
      "boat", "ship", "train", "ticket", "city", "town", "world", "north", "south", "west",
      "east", "bread", "milk", "tea", "sugar", "salt", "butter", "cheese", "dinner", "lunch",
      "cake", "cookie", "honey", "meal", "glass", "bottle", "knife", "bowl", "dish", "stew",
      "we", "you", "they", "he", "she", "it", "is", "in", "on", "at", "to", "do", "go", "no",
      "so", "or", "as", "by", "be", "me", "my", "us", "our", "their", "her", "his", "its",
      "all", "some", "many", "most", "other", "each", "every", "such", "much", "still",
      "again", "soon", "once", "near", "best", "else", "here", "there", "where", "when"};
  return words;
}

}  // namespace

// ---- image I/O ----

Tensor read_image(const fs::path& path) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") return read_pgm(path);
  if (ext != ".png") throw DataError("unsupported image format: " + path.string());
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw DataError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_GRAY;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw DataError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  Tensor out(Shape{1, static_cast<int>(img.height), static_cast<int>(img.width)});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<Real>(buf[i] / 255.0);
  return out;
}

void write_png(const fs::path& path, const Tensor& image) {
  require_line_image(image, "write_png");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  auto bytes = to_bytes(image);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.dim(2));
  img.height = static_cast<png_uint_32>(image.dim(1));
  img.format = PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

void write_pgm(const fs::path& path, const Tensor& image) {
  require_line_image(image, "write_pgm");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << image.dim(2) << " " << image.dim(1) << "\n255\n";
  auto bytes = to_bytes(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_image(const fs::path& path, const Tensor& image) {
  const std::string ext = lower_ext(path);
  if (ext == ".pgm") {
    write_pgm(path, image);
  } else if (ext == ".png") {
    write_png(path, image);
  } else {
    throw UsageError("unsupported output image extension: " + path.string());
  }
}

// ---- geometry ----

Tensor normalize_height(const Tensor& image, int height) {
  require_line_image(image, "normalize_height");
  if (height < 1) throw UsageError("normalize_height: height must be positive");
  const int h = image.dim(1), w = image.dim(2);
  if (h == height) return image;
  const double f = static_cast<double>(height) / h;
  const int nw = std::max(1, static_cast<int>(std::lround(w * f)));
  const double fx = static_cast<double>(w) / nw, fy = static_cast<double>(h) / height;
  Tensor out(Shape{1, height, nw});
  for (int i = 0; i < height; ++i) {
    const double y = std::clamp((i + 0.5) * fy, 0.5, h - 0.5);
    for (int j = 0; j < nw; ++j) {
      const double x = std::clamp((j + 0.5) * fx, 0.5, w - 0.5);
      out.at(0, i, j) = clamp01(sample(image, y, x, 1.0));
    }
  }
  return out;
}

Tensor shear(const Tensor& image, double degrees) {
  require_line_image(image, "shear");
  const int h = image.dim(1), w = image.dim(2);
  const double t = std::tan(degrees * std::numbers::pi / 180.0);
  const int extra = static_cast<int>(std::ceil(h * std::abs(t) - 1e-9));
  const double c = t < 0 ? extra : 0;
  Tensor out(Shape{1, h, w + extra}, Real(1));
  for (int i = 0; i < h; ++i) {
    const double off = c + (h - (i + 0.5)) * t;
    for (int j = 0; j < w + extra; ++j) {
      out.at(0, i, j) = static_cast<Real>(sample(image, i + 0.5, j + 0.5 - off, 1.0));
    }
  }
  return out;
}

Tensor mirror(const Tensor& image) {
  require_line_image(image, "mirror");
  const int h = image.dim(1), w = image.dim(2);
  Tensor out(image.shape());
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) out.at(0, i, j) = image.at(0, i, w - 1 - j);
  return out;
}

Tensor slant_augment(const Tensor& image, NoiseSource& rng, double max_degrees) {
  return shear(image, (2 * rng.uniform() - 1) * max_degrees);
}

double warp_sigma_for_height(int height) { return 1.5 * height / 64.0; }

Tensor warp_grid(const Tensor& image, NoiseSource& rng, int grid, double sigma) {
  require_line_image(image, "warp_grid");
  if (grid < 2) throw UsageError("warp_grid: grid must be at least 2");
  const int h = image.dim(1), w = image.dim(2);
  std::vector<double> gx(grid * grid), gy(grid * grid);
  for (int k = 0; k < grid * grid; ++k) {
    gx[k] = sigma * rng.normal();
    gy[k] = sigma * rng.normal();
  }
  auto field = [&](const std::vector<double>& g, double u, double v) {
    // u, v in [0, grid-1]
    const int i0 = std::min(grid - 2, static_cast<int>(v)), j0 = std::min(grid - 2, static_cast<int>(u));
    const double tv = v - i0, tu = u - j0;
    auto at = [&](int i, int j) { return g[i * grid + j]; };
    return (1 - tv) * ((1 - tu) * at(i0, j0) + tu * at(i0, j0 + 1)) +
           tv * ((1 - tu) * at(i0 + 1, j0) + tu * at(i0 + 1, j0 + 1));
  };
  Tensor out(image.shape());
  for (int i = 0; i < h; ++i) {
    const double v = (i + 0.5) / h * (grid - 1);
    for (int j = 0; j < w; ++j) {
      const double u = (j + 0.5) / w * (grid - 1);
      const double dx = field(gx, u, v), dy = field(gy, u, v);
      out.at(0, i, j) = clamp01(sample(image, i + 0.5 + dy, j + 0.5 + dx, 1.0));
    }
  }
  return out;
}

// ---- manifest ----

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split '" + s + "' (expected train, val or test)");
}

std::vector<const ManifestEntry*> DatasetManifest::split(Split s) const {
  std::vector<const ManifestEntry*> out;
  for (const auto& e : entries) {
    if (e.split == s) out.push_back(&e);
  }
  return out;
}

void check_author_disjoint(const DatasetManifest& m) {
  std::map<std::string, Split> seen;
  for (const auto& e : m.entries) {
    auto [it, inserted] = seen.emplace(e.author, e.split);
    if (!inserted && it->second != e.split) {
      throw DataError("author '" + e.author + "' appears in both " + split_name(it->second) +
                      " and " + split_name(e.split) + " splits");
    }
  }
}

DatasetManifest load_manifest(const fs::path& path, bool check_files) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  const fs::path base = path.parent_path();
  DatasetManifest m;
  std::string row;
  int lineno = 0;
  while (std::getline(in, row)) {
    ++lineno;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty() || row[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(row);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    if (f.size() != 4) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected 4 tab-separated fields, got " +
                      std::to_string(f.size()));
    }
    ManifestEntry e;
    e.path = fs::path(f[0]).is_absolute() ? fs::path(f[0]) : fs::absolute(base / f[0]).lexically_normal();
    e.text = f[1];
    e.author = f[2];
    e.split = parse_split(f[3]);
    if (e.text.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": empty transcript");
    if (check_files && !fs::exists(e.path)) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": missing image " + e.path.string());
    }
    m.entries.push_back(std::move(e));
  }
  if (m.entries.empty()) throw DataError("manifest " + path.string() + " has no entries");
  check_author_disjoint(m);
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << "# path\ttext\tauthor\tsplit\n";
  const fs::path base = fs::absolute(path).parent_path();
  for (const auto& e : m.entries) {
    fs::path p = e.path.is_absolute() ? e.path.lexically_relative(base) : e.path;
    out << p.generic_string() << '\t' << e.text << '\t' << e.author << '\t' << split_name(e.split) << '\n';
  }
}

std::vector<Sample> load_split(const DatasetManifest& m, Split s, const Alphabet& alphabet,
                               int height) {
  std::vector<Sample> out;
  for (const ManifestEntry* e : m.split(s)) {
    Sample smp;
    try {
      smp.labels = alphabet.encode(e->text);
    } catch (const DataError& err) {
      throw DataError(e->path.string() + ": " + err.what());
    }
    smp.image = normalize_height(read_image(e->path), height);
    smp.text = e->text;
    smp.author = e->author;
    out.push_back(std::move(smp));
  }
  return out;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open text file " + path.string());
  std::vector<std::string> out;
  std::string row;
  while (std::getline(in, row)) {
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (!row.empty()) out.push_back(row);
  }
  return out;
}

// ---- synthetic corpus ----

const std::string& synth_glyphs() {
  static const std::string s = [] {
    std::u32string cs;
    for (const auto& [c, g] : font()) cs.push_back(c);
    return utf8_encode(cs);
  }();
  return s;
}

std::vector<SynthAuthor> make_authors(int count, const std::string& prefix, NoiseSource& rng) {
  std::vector<SynthAuthor> out;
  for (int i = 0; i < count; ++i) {
    SynthAuthor a;
    char id[32];
    std::snprintf(id, sizeof id, "%s%02d", prefix.c_str(), i);
    a.id = id;
    a.slant_deg = -25 + 50 * rng.uniform();
    a.thickness = 1.0 + 1.6 * rng.uniform();
    a.width_scale = 0.8 + 0.5 * rng.uniform();
    a.jitter = 1.5 * rng.uniform();
    // Stratified so spacing differs clearly between authors.
    a.spacing = 0.6 + 1.6 * (i + rng.uniform()) / count;
    out.push_back(a);
  }
  return out;
}

Tensor render_line(const std::string& text, const SynthAuthor& author, int height,
                   NoiseSource& rng) {
  const std::u32string chars = utf8_decode(text);
  const auto& f = font();
  const double em = height, px = height / 32.0;
  // Per-line variation around the author's habits.
  const double slant = (author.slant_deg + 2.0 * rng.normal()) * std::numbers::pi / 180.0;
  const double spacing = author.spacing * (1 + 0.05 * rng.normal());
  const double tan_s = std::tan(slant);

  std::vector<Stroke> strokes;
  double cursor = 0;
  for (std::size_t k = 0; k < chars.size(); ++k) {
    auto it = f.find(chars[k]);
    if (it == f.end()) {
      throw DataError("synthetic font has no glyph for '" + utf8_encode(std::u32string(1, chars[k])) +
                      "' at position " + std::to_string(k));
    }
    const Glyph& g = it->second;
    if (chars[k] == U' ') {
      cursor += g.width * em * spacing;
      continue;
    }
    const double dy = author.jitter * px * rng.normal();
    const double sx = author.width_scale * (1 + 0.04 * rng.normal());
    for (const Stroke& s : g.strokes) {
      Stroke t;
      for (const Pt& p : s) {
        double x = cursor + p.x * em * sx + 0.006 * em * rng.normal();
        double y = p.y * em + dy + 0.006 * em * rng.normal();
        x += (kBase * em - y) * tan_s;
        t.push_back({x, y});
      }
      strokes.push_back(std::move(t));
    }
    cursor += g.width * em * sx + 0.06 * em * spacing;
  }
  const double radius = author.thickness * px / 2;
  const double margin = 2 * px + radius;
  double minx = 1e300, maxx = -1e300;
  for (const auto& s : strokes)
    for (const Pt& p : s) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
    }
  if (strokes.empty()) {
    minx = 0;
    maxx = cursor;
  }
  const int w = std::max(1, static_cast<int>(std::ceil(maxx - minx + 2 * margin)));
  Tensor cov(Shape{1, height, w});
  for (const auto& s : strokes) {
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      Pt a{s[i].x - minx + margin, s[i].y}, b{s[i + 1].x - minx + margin, s[i + 1].y};
      draw_segment(cov, a, b, radius);
    }
  }
  for (auto& v : cov.values()) v = 1 - v;
  return cov;
}

std::string random_line(const std::string& alphabet, NoiseSource& rng, int max_chars) {
  const std::u32string allowed = utf8_decode(alphabet);
  std::vector<const std::string*> words;
  for (const auto& w : vocabulary()) {
    if (static_cast<int>(w.size()) > max_chars) continue;
    if (std::all_of(w.begin(), w.end(), [&](char c) { return allowed.find(char32_t(c)) != std::u32string::npos; })) {
      words.push_back(&w);
    }
  }
  if (words.empty()) throw DataError("no vocabulary word fits the alphabet");
  const bool has_space = allowed.find(U' ') != std::u32string::npos;
  std::string line;
  const int target = 2 + static_cast<int>(rng.uniform() * 3);
  for (int k = 0; k < target; ++k) {
    const std::string& w = *words[static_cast<std::size_t>(rng.uniform() * words.size()) % words.size()];
    const std::size_t extra = line.empty() ? w.size() : w.size() + 1;
    if (!line.empty() && (!has_space || line.size() + extra > static_cast<std::size_t>(max_chars))) break;
    if (!line.empty()) line += ' ';
    line += w;
  }
  return line;
}

SynthCorpus synth_generate(const SynthConfig& config, std::uint64_t seed, const fs::path& out_dir) {
  for (char32_t c : utf8_decode(config.alphabet)) {
    if (font().find(c) == font().end()) {
      throw DataError("synthetic font cannot draw alphabet symbol '" +
                      utf8_encode(std::u32string(1, c)) + "'");
    }
  }
  NoiseSource rng(seed);
  SynthCorpus corpus;
  struct Group {
    std::vector<SynthAuthor> authors;
    Split split;
    int lines;
  };
  std::vector<Group> groups;
  groups.push_back({make_authors(config.train_authors, "train", rng), Split::kTrain, config.lines_per_author});
  groups.push_back({make_authors(config.val_authors, "val", rng), Split::kVal, config.heldout_lines_per_author});
  groups.push_back({make_authors(config.test_authors, "test", rng), Split::kTest, config.heldout_lines_per_author});

  fs::create_directories(out_dir / "images");
  std::ofstream corpus_txt(out_dir / "corpus.txt");
  std::ofstream authors_tsv(out_dir / "authors.tsv");
  authors_tsv << "# author\tsplit\tslant_deg\tthickness\twidth_scale\tjitter\tspacing\n";
  for (const auto& g : groups) {
    for (const auto& a : g.authors) {
      authors_tsv << a.id << '\t' << split_name(g.split) << '\t' << a.slant_deg << '\t' << a.thickness << '\t'
                  << a.width_scale << '\t' << a.jitter << '\t' << a.spacing << '\n';
      for (int i = 0; i < g.lines; ++i) {
        const std::string text = random_line(config.alphabet, rng, config.max_chars);
        Tensor img = render_line(text, a, config.height, rng);
        char name[64];
        std::snprintf(name, sizeof name, "images/%s_%04d.png", a.id.c_str(), i);
        write_png(out_dir / name, img);
        corpus.manifest.entries.push_back({fs::absolute(out_dir / name), text, a.id, g.split});
        if (g.split == Split::kTrain) corpus_txt << text << '\n';
      }
      corpus.authors.push_back(a);
    }
  }
  save_manifest(out_dir / "manifest.tsv", corpus.manifest);
  return corpus;
}

}  // namespace hwgen
