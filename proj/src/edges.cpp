#include "couplevar/edges.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace couplevar {

Grid edge_map(const Image& u, const FieldSet<double>& v) { return coupling_magnitude(u, v); }

Grid gradient_strength(const Image& f) {
  FieldSet<double> gradients;
  for (const auto& c : f.grids()) gradients.push_back(grad_forward(c));
  return cell_magnitude(gradients);
}

double positive_quantile(const Grid& strength, double q) {
  if (!(q >= 0 && q <= 1)) throw std::invalid_argument("quantile must lie in [0, 1]");
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(strength.size()));
  for (Index k = 0; k < strength.size(); ++k) {
    if (strength.data()[k] > 0) values.push_back(strength.data()[k]);
  }
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const auto n = static_cast<double>(values.size());
  const auto rank = static_cast<std::size_t>(std::max(1.0, std::ceil(q * n)));
  return values[std::min(rank, values.size()) - 1];
}

BinaryMap hysteresis(const Grid& strength, double low, double high, Connectivity connectivity) {
  if (!(low >= 0) || !(high >= 0)) throw std::invalid_argument("hysteresis thresholds must be non-negative");
  if (low > high) throw std::invalid_argument("hysteresis: low threshold exceeds high threshold");
  const Index width = strength.width(), height = strength.height();
  BinaryMap kept = BinaryMap::Constant(height, width, false);
  auto candidate = [&](Index i, Index j) { return strength(i, j) > 0 && strength(i, j) >= low; };

  std::vector<std::pair<Index, Index>> stack;
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      if (strength(i, j) > 0 && strength(i, j) >= high && !kept(j, i)) {
        kept(j, i) = true;
        stack.emplace_back(i, j);
      }
    }
  }
  const bool diagonal = connectivity == Connectivity::eight;
  while (!stack.empty()) {
    const auto [ci, cj] = stack.back();
    stack.pop_back();
    for (Index dj = -1; dj <= 1; ++dj) {
      for (Index di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        if (!diagonal && di != 0 && dj != 0) continue;
        const Index ni = ci + di, nj = cj + dj;
        if (ni < 0 || nj < 0 || ni >= width || nj >= height) continue;
        if (kept(nj, ni) || !candidate(ni, nj)) continue;
        kept(nj, ni) = true;
        stack.emplace_back(ni, nj);
      }
    }
  }
  return kept;
}

BinaryMap hysteresis(const Grid& strength, const HysteresisThresholds& thresholds, Connectivity connectivity) {
  if (!thresholds.quantile) return hysteresis(strength, thresholds.low, thresholds.high, connectivity);
  if (thresholds.low > thresholds.high) throw std::invalid_argument("hysteresis: low quantile exceeds high quantile");
  const double low = positive_quantile(strength, thresholds.low);
  const double high = positive_quantile(strength, thresholds.high);
  return hysteresis(strength, low, high, connectivity);
}

namespace {

// Half-sample symmetric reflection into [0, n).
Index reflect(Index k, Index n) {
  const Index period = 2 * n;
  k %= period;
  if (k < 0) k += period;
  return k < n ? k : period - 1 - k;
}

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<Index>(std::ceil(4.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (Index k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
    kernel[static_cast<std::size_t>(k + radius)] = w;
    sum += w;
  }
  for (double& w : kernel) w /= sum;
  return kernel;
}

}  // namespace

Grid gaussian_smooth(const Grid& f, double sigma) {
  if (!(sigma > 0)) throw std::invalid_argument("gaussian sigma must be positive");
  const std::vector<double> kernel = gaussian_kernel(sigma);
  const auto radius = static_cast<Index>(kernel.size() / 2);
  const Index width = f.width(), height = f.height();
  Grid tmp(width, height), out(width, height);
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      double s = 0;
      for (Index k = -radius; k <= radius; ++k) s += kernel[static_cast<std::size_t>(k + radius)] * f(reflect(i + k, width), j);
      tmp(i, j) = s;
    }
  }
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      double s = 0;
      for (Index k = -radius; k <= radius; ++k) s += kernel[static_cast<std::size_t>(k + radius)] * tmp(i, reflect(j + k, height));
      out(i, j) = s;
    }
  }
  return out;
}

CannyResult canny(const Grid& f, double sigma, const HysteresisThresholds& thresholds, Connectivity connectivity) {
  const Grid s = gaussian_smooth(f, sigma);
  const Index width = f.width(), height = f.height();
  Grid gx(width, height), gy(width, height), magnitude(width, height);
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      gx(i, j) = 0.5 * (s(reflect(i + 1, width), j) - s(reflect(i - 1, width), j));
      gy(i, j) = 0.5 * (s(i, reflect(j + 1, height)) - s(i, reflect(j - 1, height)));
      magnitude(i, j) = std::hypot(gx(i, j), gy(i, j));
    }
  }
  auto at = [&](Index i, Index j) {
    return (i < 0 || j < 0 || i >= width || j >= height) ? 0.0 : magnitude(i, j);
  };

  CannyResult result{Grid(width, height), BinaryMap()};
  for (Index j = 0; j < height; ++j) {
    for (Index i = 0; i < width; ++i) {
      const double m = magnitude(i, j);
      if (!(m > 0)) continue;
      double angle = std::atan2(gy(i, j), gx(i, j)) * 180.0 / std::numbers::pi;
      if (angle < 0) angle += 180.0;
      Index di = 1, dj = 0;
      if (angle >= 22.5 && angle < 67.5) {
        di = 1, dj = 1;
      } else if (angle >= 67.5 && angle < 112.5) {
        di = 0, dj = 1;
      } else if (angle >= 112.5 && angle < 157.5) {
        di = -1, dj = 1;
      }
      // Ties along the gradient go to the cell on the positive side.
      if (m >= at(i - di, j - dj) && m > at(i + di, j + dj)) result.strength(i, j) = m;
    }
  }
  result.edges = hysteresis(result.strength, thresholds, connectivity);
  return result;
}

}  // namespace couplevar
