#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "qunet/rng.hpp"
#include "qunet/tensor.hpp"

namespace qunet::data {

// One image/mask pair. Image values live in [0,1]; the mask is strictly
// binary with the same spatial dims.
struct Sample {
  Tensor image;  // (3, H, W)
  Tensor mask;   // (1, H, W), values in {0, 1}
  std::string id;
};

// Channelwise bilinear resampling, align-corners-false convention:
// source coordinate = (dst + 0.5) * (in / out) - 0.5, clamped to the image.
inline Tensor bilinear_resize(const Tensor& img, int out_h, int out_w) {
  require_shape(img.dims() == 3, "bilinear_resize: input must be (C,H,W)");
  if (out_h <= 0 || out_w <= 0)
    throw std::invalid_argument("bilinear_resize: target dims must be positive");
  const int C = img.dim(0), H = img.dim(1), W = img.dim(2);
  Tensor out({C, out_h, out_w});
  const double sy = static_cast<double>(H) / out_h;
  const double sx = static_cast<double>(W) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::min(std::max((y + 0.5) * sy - 0.5, 0.0), H - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, H - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::min(std::max((x + 0.5) * sx - 0.5, 0.0), W - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, W - 1);
      const double wx = fx - x0;
      for (int c = 0; c < C; ++c) {
        const double top = img.at3(c, y0, x0) * (1.0 - wx) + img.at3(c, y0, x1) * wx;
        const double bot = img.at3(c, y1, x0) * (1.0 - wx) + img.at3(c, y1, x1) * wx;
        out.at3(c, y, x) = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

// Resizes a sample to size x size. The mask goes through the same bilinear
// kernel and is re-binarized at 0.5.
inline Sample resize_sample(const Sample& s, int size) {
  Sample out;
  out.id = s.id;
  out.image = bilinear_resize(s.image, size, size);
  out.mask = bilinear_resize(s.mask, size, size);
  for (double& v : out.mask.data) v = v >= 0.5 ? 1.0 : 0.0;
  return out;
}

struct Partition {
  int seed = 0;
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

// Partition k shuffles the id list with the LCG Fisher-Yates seeded with k
// and takes the first round(n * train_fraction) ids (clamped so neither side
// is empty) as the training split. Reproducible across platforms.
inline std::vector<Partition> make_partitions(const std::vector<std::string>& ids,
                                              int n_partitions = 10,
                                              double train_fraction = 0.8) {
  if (ids.empty()) throw std::invalid_argument("make_partitions: empty id list");
  if (n_partitions < 1)
    throw std::invalid_argument("make_partitions: need at least one partition");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw std::invalid_argument("make_partitions: train_fraction must be in (0,1)");

  const long long n = static_cast<long long>(ids.size());
  long long train_n = std::llround(static_cast<double>(n) * train_fraction);
  train_n = std::max(1LL, std::min(n - 1, train_n));

  std::vector<Partition> parts;
  for (int k = 0; k < n_partitions; ++k) {
    std::vector<std::string> shuffled = ids;
    Rng rng(static_cast<std::uint64_t>(k));
    shuffle(shuffled, rng);
    Partition p;
    p.seed = k;
    p.train_ids.assign(shuffled.begin(), shuffled.begin() + train_n);
    p.test_ids.assign(shuffled.begin() + train_n, shuffled.end());
    parts.push_back(std::move(p));
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Synthetic segmentation set: one bright ellipse or rectangle on a darker
// textured noise background. Foreground fraction is kept inside (0.05, 0.6).
// ---------------------------------------------------------------------------

inline std::vector<Sample> synth_dataset(int n, int size, std::uint64_t seed) {
  if (size != 16 && size != 32 && size != 64)
    throw std::invalid_argument("synth_dataset: size must be 16, 32 or 64");
  Rng rng(seed);
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(n));

  for (int i = 0; i < n; ++i) {
    Sample s;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synth_%05d", i);
    s.id = idbuf;
    s.image = Tensor({3, size, size});
    s.mask = Tensor({1, size, size});

    // Colors are drawn from disjoint hue families (reddish ground, greenish
    // figure) and disjoint brightness bands, and the shape is centered with
    // a near-balanced fill: several independent cues, so even a very short
    // training budget separates the classes.
    double base[3] = {rng.uniform(0.55, 0.75), rng.uniform(0.08, 0.22),
                      rng.uniform(0.08, 0.22)};
    double fg[3] = {rng.uniform(0.08, 0.22), rng.uniform(0.70, 0.90),
                    rng.uniform(0.60, 0.85)};
    const double freq_x = rng.uniform(0.5, 2.5);
    const double freq_y = rng.uniform(0.5, 2.5);
    const double phase = rng.uniform(0.0, 6.28318530717958647692);

    // Geometry is redrawn until the mask fraction lands in range; the
    // parameter ranges make that the overwhelmingly common case.
    for (int attempt = 0; attempt < 64; ++attempt) {
      std::fill(s.mask.data.begin(), s.mask.data.end(), 0.0);
      const bool ellipse = rng.coin();
      const double cx = rng.uniform(0.44, 0.56) * size;
      const double cy = rng.uniform(0.44, 0.56) * size;
      const double ax = rng.uniform(0.30, 0.42) * size;
      const double ay = rng.uniform(0.30, 0.42) * size;
      long long area = 0;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
          const double dx = (x + 0.5 - cx) / ax;
          const double dy = (y + 0.5 - cy) / ay;
          const bool inside =
              ellipse ? dx * dx + dy * dy <= 1.0
                      : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
          if (inside) {
            s.mask.at3(0, y, x) = 1.0;
            ++area;
          }
        }
      const double frac = static_cast<double>(area) / (size * size);
      if (frac > 0.38 && frac < 0.55) break;
    }

    for (int y = 0; y < size; ++y)
      for (int x = 0; x < size; ++x) {
        const bool inside = s.mask.at3(0, y, x) > 0.5;
        const double texture =
            0.02 * std::sin(6.28318530717958647692 * (freq_x * x + freq_y * y) / size + phase);
        for (int c = 0; c < 3; ++c) {
          const double v = (inside ? fg[c] : base[c]) + texture + rng.uniform(-0.01, 0.01);
          s.image.at3(c, y, x) = std::min(std::max(v, 0.0), 1.0);
        }
      }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace qunet::data
