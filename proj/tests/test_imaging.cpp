#include <doctest.h>

#include "couplevar/imaging.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace couplevar;

namespace {

Image random_bytes(Index M, Index N, Index C, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(0, 255);
  Image img(M, N, C);
  for (Index c = 0; c < C; ++c)
    for (Index k = 0; k < img[c].size(); ++k) img[c].data()[k] = d(rng);
  return img;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("couplevar_test_" + name)).string();
}

}  // namespace

TEST_CASE("PNM round trip is bitwise exact") {
  for (Index C : {1, 3}) {
    const Image img = random_bytes(16, 16, C, 80 + static_cast<std::uint64_t>(C));
    const std::string bytes = encode_pnm(img);
    const Image back = decode_pnm(bytes);
    REQUIRE(back.channels() == C);
    for (Index c = 0; c < C; ++c) CHECK((back[c].array() == img[c].array()).all());
    CHECK(encode_pnm(back) == bytes);
  }
  const Image img = random_bytes(7, 5, 3, 83);
  const std::string path = temp_path("rt.ppm");
  write_image(img, path);
  CHECK(read_image(path)[2].array().isApprox(img[2].array()));
  std::filesystem::remove(path);
}

TEST_CASE("PNM write clamps and rounds half up") {
  Image img(4, 1, 1);
  img[0](0, 0) = 255.7;
  img[0](1, 0) = -3;
  img[0](2, 0) = 10.5;
  img[0](3, 0) = 10.49;
  const Image back = decode_pnm(encode_pnm(img));
  CHECK(back[0](0, 0) == 255);
  CHECK(back[0](1, 0) == 0);
  CHECK(back[0](2, 0) == 11);
  CHECK(back[0](3, 0) == 10);
}

TEST_CASE("PNM header parsing") {
  const std::string body(6, '\x07');
  const Image img = decode_pnm("P5\n# a comment\n3 # width\n2\n255\n" + body);
  CHECK(img.width() == 3);
  CHECK(img.height() == 2);
  CHECK(img[0](2, 1) == 7);
  const Image colour = decode_pnm("P6 1 1 255\n" + std::string("\x01\x02\x03", 3));
  CHECK(colour.channels() == 3);
  CHECK(colour[1](0, 0) == 2);

  CHECK_THROWS_AS(decode_pnm("P2\n3 2\n255\n" + body), IoError);
  CHECK_THROWS_AS(decode_pnm("P5\n3 2\n65535\n" + body), IoError);
  CHECK_THROWS_AS(decode_pnm("P5\n3 2\n255\n" + body.substr(1)), IoError);
  CHECK_THROWS_AS(decode_pnm("P5\n3\n"), IoError);
  CHECK_THROWS_AS(decode_pnm("P5\n0 2\n255\n"), IoError);
  CHECK_THROWS_AS(read_image(temp_path("missing.pgm")), IoError);
  CHECK_THROWS_AS(encode_pnm(Image(2, 2, 2)), IoError);
}

TEST_CASE("FGRID preserves doubles exactly") {
  std::mt19937_64 rng(84);
  const Image img(std::vector<Grid>{oracle::random_grid(5, 4, rng, -1e3, 1e3), oracle::random_grid(5, 4, rng)});
  const Image back = decode_fgrid(encode_fgrid(img));
  REQUIRE(back.channels() == 2);
  CHECK((back[0].array() == img[0].array()).all());
  CHECK((back[1].array() == img[1].array()).all());
  CHECK(encode_fgrid(Image(Grid(2, 1, 0.1))).rfind("FGRID 2 1 1\n", 0) == 0);
  CHECK_THROWS_AS(decode_fgrid("FGRID 2 2 1\n1 2 3"), IoError);
  CHECK_THROWS_AS(decode_fgrid("GRID 1 1 1\n1"), IoError);

  const std::string path = temp_path("x.fgrid");
  write_any(img, path);
  CHECK((read_any(path)[1].array() == img[1].array()).all());
  std::filesystem::remove(path);
}

TEST_CASE("mask and trace writers") {
  BinaryMap m = BinaryMap::Constant(2, 3, false);
  m(1, 2) = true;
  const std::string path = temp_path("mask.pgm");
  write_mask(m, path);
  const Image back = read_image(path);
  CHECK(back[0](2, 1) == 255);
  CHECK(back[0].array().sum() == 255);
  std::filesystem::remove(path);

  const std::string csv = temp_path("trace.csv");
  write_trace_csv({{0, 0.0, 1.0, 10.0}, {1, 0.5, 0.25, 8.0}}, csv);
  std::ifstream in(csv);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "iter,time_ms,rel_residual,energy");
  CHECK(first.rfind("0,0,1,10", 0) == 0);
  std::filesystem::remove(csv);
}

TEST_CASE("gaussian noise statistics") {
  const Image clean(256, 256, 1, 100.0);
  CHECK((add_gaussian_noise(clean, 0, 1)[0].array() == 100.0).all());
  for (double sigma : {10.0, 40.0, 100.0}) {
    CAPTURE(sigma);
    const Image noisy = add_gaussian_noise(clean, sigma, 2024);
    const auto n = noisy[0].array() - 100.0;
    const double mean = n.mean();
    const double sd = std::sqrt((n - mean).square().sum() / static_cast<double>(n.size() - 1));
    CHECK(std::abs(mean) <= 1.0 * sigma / 40.0);
    CHECK(std::abs(sd - sigma) <= 2.0 * sigma / 40.0);
    if (sigma == 100) CHECK(noisy[0].array().maxCoeff() > 255);  // unclamped
  }
  const Image a = add_gaussian_noise(clean, 40, 7), b = add_gaussian_noise(clean, 40, 7);
  CHECK((a[0].array() == b[0].array()).all());
  CHECK_FALSE((add_gaussian_noise(clean, 40, 8)[0].array() == a[0].array()).all());
}

TEST_CASE("mse and psnr") {
  const Image a = random_bytes(9, 8, 3, 85);
  CHECK(mse(a, a) == 0);
  CHECK(std::isinf(psnr(a, a)));
  Image b = a;
  for (Index c = 0; c < 3; ++c) b[c].values() += 3.0;
  CHECK(mse(a, b) == 9);
  CHECK(psnr(a, b) == doctest::Approx(10 * std::log10(255.0 * 255.0 / 9)));
  CHECK_THROWS_AS(mse(a, Image(9, 8, 1)), std::invalid_argument);

  // Reordered accumulation: reversed cells, channels last.
  std::mt19937_64 rng(86);
  const Image x(std::vector<Grid>{oracle::random_grid(31, 17, rng), oracle::random_grid(31, 17, rng)});
  const Image y(std::vector<Grid>{oracle::random_grid(31, 17, rng), oracle::random_grid(31, 17, rng)});
  long double acc = 0;
  for (Index k = x[0].size() - 1; k >= 0; --k)
    for (Index c = 1; c >= 0; --c) {
      const long double d = x[c].data()[k] - y[c].data()[k];
      acc += d * d;
    }
  const double ref = static_cast<double>(acc / (2 * x[0].size()));
  CHECK(std::abs(mse(x, y) - ref) <= 1e-10 * ref);
}

TEST_CASE("region specs and synthetic images") {
  const Grid flat = synth_affine(10, 6, parse_region_spec("bg 77 0 0", 10, 6));
  CHECK((flat.array() == 77).all());

  const Index M = 32, N = 20;
  const Grid step = synth_affine(M, N, parse_region_spec("step", M, N));
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < M; ++i) CHECK(step(i, j) == (i < M / 2 ? 60 : 180));

  // Disk of radius M/4 over a ramp: labels partition the grid.
  const double r = M / 4.0;
  const RegionSpec spec = parse_region_spec("bg 20 1 0.5; disk 16 10 " + std::to_string(r) + " 200 -1 0", M, N);
  const GridArray<int> labels = region_labels(M, N, spec);
  Index inside = 0;
  for (Index j = 0; j < N; ++j)
    for (Index i = 0; i < M; ++i) {
      const double dx = i + 0.5 - 16, dy = j + 0.5 - 10;
      if (dx * dx + dy * dy <= r * r) ++inside;
    }
  CHECK((labels == 1).count() == inside);
  CHECK((labels == 0).count() == M * N - inside);
  const Grid img = synth_affine(M, N, spec);
  CHECK(img(16, 10) == doctest::Approx(200 - 16.5));
  CHECK(img(0, 0) == doctest::Approx(20 + 0.5 + 0.25));

  std::ostringstream warnings;
  const Grid clamped = synth_affine(4, 4, parse_region_spec("bg 300 0 0", 4, 4), &warnings);
  CHECK((clamped.array() == 255).all());
  CHECK_FALSE(warnings.str().empty());

  CHECK_THROWS_AS(parse_region_spec("blob 1 2 3", 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(parse_region_spec("disk 1 2", 4, 4), std::invalid_argument);

  const Grid affine = synth_affine(64, 64, parse_region_spec("affine", 64, 64));
  CHECK(affine.array().minCoeff() >= 0);
  CHECK(affine.array().maxCoeff() <= 255);
  CHECK((region_labels(64, 64, parse_region_spec("affine", 64, 64)) >= 0).all());
}
