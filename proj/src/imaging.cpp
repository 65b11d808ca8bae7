#include "couplevar/imaging.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace couplevar {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path);
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

class HeaderReader {
 public:
  explicit HeaderReader(std::string_view bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const char ch = bytes_[pos_];
      if (ch == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(ch))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) ++pos_;
    if (start == pos_) throw IoError(std::string("malformed header: expected ") + what);
    long value = 0;
    const auto [ptr, ec] = std::from_chars(bytes_.data() + start, bytes_.data() + pos_, value);
    if (ec != std::errc() || ptr != bytes_.data() + pos_) throw IoError(std::string("malformed header: bad ") + what);
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance() { ++pos_; }
  bool at_space() const {
    return pos_ < bytes_.size() && std::isspace(static_cast<unsigned char>(bytes_[pos_]));
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::uint8_t quantise(double value) {
  if (std::isnan(value)) return 0;
  const double clamped = std::clamp(value, 0.0, 255.0);
  return static_cast<std::uint8_t>(std::floor(clamped + 0.5));
}

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Image decode_pnm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
    throw IoError("not a binary PGM/PPM (expected P5 or P6)");
  }
  const Index channels = bytes[1] == '5' ? 1 : 3;
  HeaderReader header(bytes.substr(2));
  const long width = header.integer("width");
  const long height = header.integer("height");
  const long maxval = header.integer("maxval");
  if (width < 1 || height < 1) throw IoError("malformed header: non-positive dimensions");
  if (maxval != 255) throw IoError("unsupported maxval " + std::to_string(maxval) + " (only 255)");
  if (!header.at_space()) throw IoError("malformed header: missing separator after maxval");
  header.advance();
  const std::size_t offset = 2 + header.pos();
  const std::size_t expected = static_cast<std::size_t>(width) * static_cast<std::size_t>(height) *
                               static_cast<std::size_t>(channels);
  if (bytes.size() - offset < expected) {
    throw IoError("truncated payload: expected " + std::to_string(expected) + " bytes, got " +
                  std::to_string(bytes.size() - offset));
  }
  Image img(width, height, channels);
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + offset);
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      for (Index c = 0; c < channels; ++c) {
        img[c](i, j) = data[(j * width + i) * channels + c];
      }
    }
  }
  return img;
}

std::string encode_pnm(const Image& img) {
  const Index channels = img.channels();
  if (channels != 1 && channels != 3) throw IoError("PNM output needs 1 or 3 channels");
  std::string out = (channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width()) + " " +
                    std::to_string(img.height()) + "\n255\n";
  const std::size_t header = out.size();
  out.resize(header + static_cast<std::size_t>(img.width() * img.height() * channels));
  std::size_t k = header;
  for (Index j = 0; j < img.height(); ++j) {
    for (Index i = 0; i < img.width(); ++i) {
      for (Index c = 0; c < channels; ++c) out[k++] = static_cast<char>(quantise(img[c](i, j)));
    }
  }
  return out;
}

Image read_image(const std::string& path) { return decode_pnm(read_file(path)); }

void write_image(const Image& img, const std::string& path) { write_file(path, encode_pnm(img)); }

std::string encode_fgrid(const Image& img) {
  std::string out = "FGRID " + std::to_string(img.width()) + " " + std::to_string(img.height()) + " " +
                    std::to_string(img.channels()) + "\n";
  for (Index c = 0; c < img.channels(); ++c) {
    for (Index j = 0; j < img.height(); ++j) {
      for (Index i = 0; i < img.width(); ++i) {
        if (i > 0) out += ' ';
        out += format_double(img[c](i, j));
      }
      out += '\n';
    }
  }
  return out;
}

Image decode_fgrid(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string magic;
  long width = 0, height = 0, channels = 0;
  if (!(in >> magic >> width >> height >> channels) || magic != "FGRID") throw IoError("malformed FGRID header");
  if (width < 1 || height < 1 || channels < 1) throw IoError("malformed FGRID header: non-positive dimensions");
  Image img(width, height, channels);
  std::string token;
  for (Index c = 0; c < channels; ++c) {
    for (Index j = 0; j < height; ++j) {
      for (Index i = 0; i < width; ++i) {
        if (!(in >> token)) throw IoError("truncated FGRID payload");
        double v = 0;
        const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
        if (ec != std::errc() || ptr != token.data() + token.size()) throw IoError("bad FGRID value '" + token + "'");
        img[c](i, j) = v;
      }
    }
  }
  return img;
}

void write_fgrid(const Image& img, const std::string& path) { write_file(path, encode_fgrid(img)); }

Image read_fgrid(const std::string& path) { return decode_fgrid(read_file(path)); }

Image read_any(const std::string& path) { return ends_with(path, ".fgrid") ? read_fgrid(path) : read_image(path); }

void write_any(const Image& img, const std::string& path) {
  if (ends_with(path, ".fgrid")) {
    write_fgrid(img, path);
  } else {
    write_image(img, path);
  }
}

void write_mask(const BinaryMap& mask, const std::string& path) {
  Grid g(mask.cols(), mask.rows());
  g.values() = mask.cast<double>() * 255.0;
  write_image(Image(std::move(g)), path);
}

void write_trace_csv(const ConvergenceTrace& trace, const std::string& path) {
  std::ostringstream out;
  out << "iter,time_ms,rel_residual,energy\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& e : trace) {
    out << e.iteration << ',' << e.elapsed_ms << ',' << e.relative_residual << ',' << e.energy << '\n';
  }
  write_file(path, out.str());
}

Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw std::invalid_argument("noise sigma must be non-negative");
  Image out = img;
  if (sigma == 0) return out;
  std::mt19937_64 engine(seed);
  auto uniform = [&engine] { return static_cast<double>(engine() >> 11) * 0x1.0p-53; };
  bool have_spare = false;
  double spare = 0;
  auto normal = [&] {
    if (have_spare) {
      have_spare = false;
      return spare;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(1.0 - u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare = radius * std::sin(angle);
    have_spare = true;
    return radius * std::cos(angle);
  };
  for (Index c = 0; c < out.channels(); ++c) {
    for (Index j = 0; j < out.height(); ++j) {
      for (Index i = 0; i < out.width(); ++i) out[c](i, j) += sigma * normal();
    }
  }
  return out;
}

double mse(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: image shapes differ");
  double sum = 0;
  for (Index c = 0; c < a.channels(); ++c) sum += (a[c].array() - b[c].array()).square().sum();
  return sum / static_cast<double>(a.width() * a.height() * a.channels());
}

double psnr(const Image& a, const Image& b) {
  const double e = mse(a, b);
  if (e == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(255.0 * 255.0 / e);
}

bool Region::contains(double x, double y) const {
  switch (kind) {
    case Kind::background:
      return true;
    case Kind::half_plane:
      return g0 * x + g1 * y >= g2;
    case Kind::disk:
      return (x - g0) * (x - g0) + (y - g1) * (y - g1) <= g2 * g2;
  }
  return false;
}

namespace {

RegionSpec preset(std::string_view name, Index width, Index height) {
  const double w = static_cast<double>(width), h = static_cast<double>(height);
  const double sx = 256.0 / w, sy = 256.0 / h;
  RegionSpec spec;
  using K = Region::Kind;
  if (name == "step") {
    spec.regions = {{K::background, 0, 0, 0, 60, 0, 0}, {K::half_plane, 1, 0, w / 2, 180, 0, 0}};
  } else if (name == "twostep") {
    spec.regions = {{K::background, 0, 0, 0, 40, 0, 0},
                    {K::half_plane, 1, 0, w / 3, 120, 0, 0},
                    {K::half_plane, 1, 0, 2 * w / 3, 200, 0, 0}};
  } else if (name == "affine") {
    // Sloped background, a tilted half-plane and a shaded disk.
    spec.regions = {{K::background, 0, 0, 0, 50, 0.30 * sx, 0.15 * sy},
                    {K::half_plane, 0.8, -0.6, 0.35 * w, 215, -0.25 * sx, -0.10 * sy},
                    {K::disk, 0.30 * w, 0.68 * h, 0.18 * w, 60, 0.45 * sx, -0.20 * sy}};
  } else {
    throw std::invalid_argument("unknown region preset '" + std::string(name) + "'");
  }
  return spec;
}

}  // namespace

RegionSpec parse_region_spec(std::string_view text, Index width, Index height) {
  std::string normalised(text);
  std::replace(normalised.begin(), normalised.end(), '\n', ';');
  const auto trimmed_begin = normalised.find_first_not_of(" \t;");
  if (trimmed_begin == std::string::npos) throw std::invalid_argument("empty region spec");
  {
    const std::string word = normalised.substr(trimmed_begin, normalised.find_last_not_of(" \t;") - trimmed_begin + 1);
    if (word.find_first_of(" \t;") == std::string::npos && word != "bg") return preset(word, width, height);
  }

  RegionSpec spec;
  std::istringstream parts(normalised);
  std::string part;
  while (std::getline(parts, part, ';')) {
    std::istringstream in(part);
    std::string kind;
    if (!(in >> kind)) continue;
    Region r;
    std::vector<double> values;
    double v = 0;
    while (in >> v) values.push_back(v);
    if (!in.eof()) throw std::invalid_argument("bad number in region '" + part + "'");
    std::size_t geometry = 0;
    if (kind == "bg") {
      r.kind = Region::Kind::background;
    } else if (kind == "half") {
      r.kind = Region::Kind::half_plane;
      geometry = 3;
    } else if (kind == "disk") {
      r.kind = Region::Kind::disk;
      geometry = 3;
    } else {
      throw std::invalid_argument("unknown region kind '" + kind + "'");
    }
    if (values.size() != geometry + 3) {
      throw std::invalid_argument("region '" + kind + "' expects " + std::to_string(geometry + 3) + " numbers");
    }
    if (geometry == 3) {
      r.g0 = values[0];
      r.g1 = values[1];
      r.g2 = values[2];
    }
    r.a = values[geometry];
    r.b = values[geometry + 1];
    r.c = values[geometry + 2];
    spec.regions.push_back(r);
  }
  if (spec.regions.empty()) throw std::invalid_argument("empty region spec");
  return spec;
}

GridArray<int> region_labels(Index width, Index height, const RegionSpec& spec) {
  GridArray<int> labels = GridArray<int>::Constant(height, width, -1);
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      const double x = static_cast<double>(i) + 0.5, y = static_cast<double>(j) + 0.5;
      for (std::size_t r = 0; r < spec.regions.size(); ++r) {
        if (spec.regions[r].contains(x, y)) labels(j, i) = static_cast<int>(r);
      }
    }
  }
  return labels;
}

Grid synth_affine(Index width, Index height, const RegionSpec& spec, std::ostream* warnings) {
  const GridArray<int> labels = region_labels(width, height, spec);
  Grid g(width, height);
  Index clamped = 0;
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      const int label = labels(j, i);
      if (label < 0) continue;
      const Region& r = spec.regions[static_cast<std::size_t>(label)];
      const double x = static_cast<double>(i) + 0.5, y = static_cast<double>(j) + 0.5;
      const double value = r.a + r.b * x + r.c * y;
      const double bounded = std::clamp(value, 0.0, 255.0);
      if (bounded != value) ++clamped;
      g(i, j) = bounded;
    }
  }
  if (clamped > 0 && warnings != nullptr) {
    *warnings << "warning: " << clamped << " synthetic pixels clamped to [0, 255]\n";
  }
  return g;
}

void tune_allocator() {
#if defined(__GLIBC__)
  mallopt(M_MMAP_THRESHOLD, 64 * 1024 * 1024);
  mallopt(M_TRIM_THRESHOLD, 128 * 1024 * 1024);
#endif
}

}  // namespace couplevar
