#pragma once

// Edge detection from the coupling term, hysteresis thresholding and a
// Canny baseline.

#include "couplevar/energy.hpp"

namespace couplevar {

/// Squared coupling deviation |grad u - v|^2 sampled at cells (no epsilon),
/// summed over channels.
Grid edge_map(const Image& u, const FieldSet<double>& v);

/// Plain gradient strength |grad f|^2 with the same cell sampling; the
/// beta -> 0 limit of edge_map, i.e. a detector without presmoothing.
Grid gradient_strength(const Image& f);

struct HysteresisThresholds {
  double low = 0.80;
  double high = 0.95;
  /// When set, low/high are quantiles of the strictly positive strengths.
  bool quantile = true;
};

enum class Connectivity { four = 4, eight = 8 };

/// Nearest-rank quantile of the strictly positive values (0 if none).
double positive_quantile(const Grid& strength, double q);

/// Cells >= high are seeds; cells >= low are kept when linked to a seed
/// through kept cells. Cells with zero strength are never kept.
BinaryMap hysteresis(const Grid& strength, const HysteresisThresholds& thresholds,
                     Connectivity connectivity = Connectivity::eight);

BinaryMap hysteresis(const Grid& strength, double low, double high, Connectivity connectivity = Connectivity::eight);

/// Normalised Gaussian truncated at radius ceil(4 sigma), applied separably
/// with half-sample symmetric reflection at the boundary.
Grid gaussian_smooth(const Grid& f, double sigma);

struct CannyResult {
  /// Gradient magnitude after non-maximum suppression.
  Grid strength;
  BinaryMap edges;
};

/// Gaussian presmoothing, central differences, non-maximum suppression over
/// four quantised directions, then hysteresis on the suppressed magnitude.
CannyResult canny(const Grid& f, double sigma, const HysteresisThresholds& thresholds,
                  Connectivity connectivity = Connectivity::eight);

}  // namespace couplevar
