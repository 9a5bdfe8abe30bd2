#include "damext/augment.hpp"

#include <algorithm>

namespace damext {

namespace {

Raster flip_raster(const Raster& r, bool horizontal) {
  Raster out(r.width, r.height, r.channels);
  for (int row = 0; row < r.height; ++row) {
    for (int col = 0; col < r.width; ++col) {
      const int sr = horizontal ? row : r.height - 1 - row;
      const int sc = horizontal ? r.width - 1 - col : col;
      for (int ch = 0; ch < r.channels; ++ch) out.at(row, col, ch) = r.at(sr, sc, ch);
    }
  }
  return out;
}

LabelMask flip_mask(const LabelMask& m, bool horizontal) {
  LabelMask out(m.width, m.height, m.arity);
  for (int row = 0; row < m.height; ++row) {
    for (int col = 0; col < m.width; ++col) {
      const int sr = horizontal ? row : m.height - 1 - row;
      const int sc = horizontal ? m.width - 1 - col : col;
      out.at(row, col) = m.at(sr, sc);
    }
  }
  return out;
}

// One 90-degree counter-clockwise turn: out(r, c) = in(c, W_out - 1 - r)
// where the output is H_out x W_out = W_in x H_in.
Raster rot90_raster(const Raster& r) {
  Raster out(r.height, r.width, r.channels);
  for (int row = 0; row < out.height; ++row) {
    for (int col = 0; col < out.width; ++col) {
      for (int ch = 0; ch < r.channels; ++ch) {
        out.at(row, col, ch) = r.at(col, out.height - 1 - row, ch);
      }
    }
  }
  return out;
}

LabelMask rot90_mask(const LabelMask& m) {
  LabelMask out(m.height, m.width, m.arity);
  for (int row = 0; row < out.height; ++row) {
    for (int col = 0; col < out.width; ++col) {
      out.at(row, col) = m.at(col, out.height - 1 - row);
    }
  }
  return out;
}

}  // namespace

AugmentDraws sample_augment(const AugmentConfig& cfg, Rng& rng) {
  AugmentDraws d;
  d.hflip = rng.bernoulli(0.5);
  d.vflip = rng.bernoulli(0.5);
  d.quarter_turns = rng.uniform_int(0, 3);
  d.brightness = rng.uniform(-cfg.brightness_delta, cfg.brightness_delta);
  for (double& s : d.channel_shift) s = rng.uniform(-cfg.channel_delta, cfg.channel_delta);
  return d;
}

void apply_augment(Raster& r, LabelMask& m, const AugmentDraws& d) {
  if (r.width != m.width || r.height != m.height) {
    throw DataError("augment: raster and mask dimensions differ");
  }
  if (d.hflip) {
    r = flip_raster(r, true);
    m = flip_mask(m, true);
  }
  if (d.vflip) {
    r = flip_raster(r, false);
    m = flip_mask(m, false);
  }
  for (int t = 0; t < d.quarter_turns; ++t) {
    r = rot90_raster(r);
    m = rot90_mask(m);
  }
  if (d.brightness != 0.0 || d.channel_shift[0] != 0.0 || d.channel_shift[1] != 0.0 ||
      d.channel_shift[2] != 0.0) {
    for (int row = 0; row < r.height; ++row) {
      for (int col = 0; col < r.width; ++col) {
        for (int ch = 0; ch < r.channels; ++ch) {
          const double shift = d.brightness + (ch < 3 ? d.channel_shift[ch] : 0.0);
          r.at(row, col, ch) = std::clamp(r.at(row, col, ch) + shift, 0.0, 1.0);
        }
      }
    }
  }
}

void augment(Raster& r, LabelMask& m, const AugmentConfig& cfg, Rng& rng) {
  apply_augment(r, m, sample_augment(cfg, rng));
}

}  // namespace damext
