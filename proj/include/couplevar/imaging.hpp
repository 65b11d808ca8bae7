#pragma once

// Image files, synthetic test images, noise and quality metrics.
//
// Intensities are doubles on the [0, 255] scale.
//
// File formats:
//   PGM (P5) / PPM (P6), maxval 255, binary. On write values are clamped to
//   [0, 255] and rounded half-up. Header comments are accepted on read.
//   FGRID: ASCII header "FGRID M N C\n" followed by C*N*M decimal values
//   (channel-major, then row-major with x fastest) in round-trip precision.

#include "couplevar/grid.hpp"
#include "couplevar/solver.hpp"

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace couplevar {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Image decode_pnm(std::string_view bytes);
std::string encode_pnm(const Image& img);

Image read_image(const std::string& path);
/// PGM for one channel, PPM for three; other channel counts are rejected.
void write_image(const Image& img, const std::string& path);

std::string encode_fgrid(const Image& img);
Image decode_fgrid(std::string_view text);
void write_fgrid(const Image& img, const std::string& path);
Image read_fgrid(const std::string& path);

/// Dispatches on the extension: ".fgrid" selects FGRID, anything else PNM.
Image read_any(const std::string& path);
void write_any(const Image& img, const std::string& path);

/// Writes an 8-bit PGM with 255 for set cells.
void write_mask(const BinaryMap& mask, const std::string& path);

/// CSV with header iter,time_ms,rel_residual,energy.
void write_trace_csv(const ConvergenceTrace& trace, const std::string& path);

/// Adds i.i.d. N(0, sigma^2) noise without clamping. Samples come from
/// std::mt19937_64 seeded with `seed`; uniforms are the top 53 bits scaled
/// to [0, 1) and pairs are mapped with the Box-Muller transform
/// z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2), z1 = ... sin(2 pi u2), consumed in
/// order over channels, rows and columns.
Image add_gaussian_noise(const Image& img, double sigma, std::uint64_t seed);

double mse(const Image& a, const Image& b);
/// 10 log10(255^2 / mse); +inf for identical images.
double psnr(const Image& a, const Image& b);

/// One region of a piecewise-affine image with intensity a + b x + c y at
/// cell centre (x, y) = (i + 1/2, j + 1/2).
struct Region {
  enum class Kind { background, half_plane, disk };
  Kind kind = Kind::background;
  // half_plane: nx, ny, offset (cells with nx x + ny y >= offset)
  // disk: cx, cy, radius (cells with |(x, y) - (cx, cy)| <= radius)
  double g0 = 0, g1 = 0, g2 = 0;
  double a = 0, b = 0, c = 0;

  bool contains(double x, double y) const;
};

/// Regions painted in order; later regions overwrite earlier ones.
struct RegionSpec {
  std::vector<Region> regions;
};

/// Parses "bg a b c; half nx ny d a b c; disk cx cy r a b c" (any order,
/// ';' or newline separated) or one of the presets "step", "twostep",
/// "affine", scaled to the given size.
RegionSpec parse_region_spec(std::string_view text, Index width, Index height);

/// Index of the region that owns each cell, -1 where no region applies.
GridArray<int> region_labels(Index width, Index height, const RegionSpec& spec);

/// Rasterises the spec. Values outside [0, 255] are clamped and a warning
/// is written to `warnings` (if non-null).
Grid synth_affine(Index width, Index height, const RegionSpec& spec, std::ostream* warnings = nullptr);

/// Raises glibc's mmap and trim thresholds so that the solvers' per-step
/// temporaries are recycled instead of being mapped and unmapped each time.
void tune_allocator();

}  // namespace couplevar
