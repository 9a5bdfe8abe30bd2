#include "damext/scene.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <utility>

#include "damext/extract.hpp"
#include "damext/rng.hpp"

namespace damext {

void SceneSpec::validate() const {
  if (width < 16 || height < 16) throw ConfigError("scene size must be at least 16x16");
  if (num_bodies < 0) throw ConfigError("num_bodies must be non-negative");
  auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (!prob(mix_dam) || !prob(mix_lake) || !prob(mix_river)) {
    throw ConfigError("shape mix entries must lie in [0,1]");
  }
  if (std::abs(mix_dam + mix_lake + mix_river - 1.0) > 1e-6) {
    throw ConfigError("shape mix must sum to 1");
  }
  if (noise_level < 0.0) throw ConfigError("noise_level must be non-negative");
  if (!prob(contour_jitter)) throw ConfigError("contour_jitter must lie in [0,1]");
  if (!prob(cloud_probability)) throw ConfigError("cloud_probability must lie in [0,1]");
}

namespace {

constexpr int kRawMinArea = 205;    // jitter falls back to the raw outline
constexpr int kFinalMinArea = 200;  // whenever erosion would dip below this
constexpr int kKeepoutRadius = 5;   // bodies stay >= 6 px apart, so +-2 px
                                    // jitter can never 8-connect two of them

struct Grid {
  int w, h;
  std::vector<std::uint8_t> v;
  Grid(int w_, int h_) : w(w_), h(h_), v(static_cast<std::size_t>(w_) * h_, 0) {}
  std::uint8_t& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  std::uint8_t at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
  bool inside(int r, int c) const { return r >= 0 && r < h && c >= 0 && c < w; }
};

// Out-of-bounds counts as inside so bodies clipped by the image border do
// not erode away from the cut side.
Grid erode_once(const Grid& g) {
  Grid out(g.w, g.h);
  for (int r = 0; r < g.h; ++r) {
    for (int c = 0; c < g.w; ++c) {
      if (!g.at(r, c)) continue;
      bool keep = true;
      for (int dr = -1; dr <= 1 && keep; ++dr) {
        for (int dc = -1; dc <= 1 && keep; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (g.inside(rr, cc) && !g.at(rr, cc)) keep = false;
        }
      }
      out.at(r, c) = keep ? 1 : 0;
    }
  }
  return out;
}

Grid dilate_once(const Grid& g) {
  Grid out(g.w, g.h);
  for (int r = 0; r < g.h; ++r) {
    for (int c = 0; c < g.w; ++c) {
      if (!g.at(r, c)) continue;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (g.inside(rr, cc)) out.at(rr, cc) = 1;
        }
      }
    }
  }
  return out;
}

bool single_component(const Grid& g, int area) {
  if (area == 0) return false;
  int sr = -1, sc = -1;
  for (int r = 0; r < g.h && sr < 0; ++r)
    for (int c = 0; c < g.w; ++c)
      if (g.at(r, c)) { sr = r; sc = c; break; }
  Grid seen(g.w, g.h);
  std::deque<std::pair<int, int>> q{{sr, sc}};
  seen.at(sr, sc) = 1;
  int visited = 0;
  while (!q.empty()) {
    auto [r, c] = q.front();
    q.pop_front();
    ++visited;
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        const int rr = r + dr, cc = c + dc;
        if (g.inside(rr, cc) && g.at(rr, cc) && !seen.at(rr, cc)) {
          seen.at(rr, cc) = 1;
          q.emplace_back(rr, cc);
        }
      }
    }
  }
  return visited == area;
}

int grid_area(const Grid& g) {
  int n = 0;
  for (auto px : g.v) n += px;
  return n;
}

// The crop window a body will own downstream: its x2-expanded tight bbox,
// padded a few pixels because the pipeline crops around predicted segments,
// whose boxes wobble relative to the label ones.
BBox crop_window(const Grid& m, int w, int h) {
  BBox tight{h, w, -1, -1};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!m.at(r, c)) continue;
      tight.r0 = std::min(tight.r0, r);
      tight.c0 = std::min(tight.c0, c);
      tight.r1 = std::max(tight.r1, r);
      tight.c1 = std::max(tight.c1, c);
    }
  }
  constexpr int kGuard = 3;
  BBox out = expand_bbox(tight, 2.0, h, w);
  out.r0 = std::max(0, out.r0 - kGuard);
  out.c0 = std::max(0, out.c0 - kGuard);
  out.r1 = std::min(h - 1, out.r1 + kGuard);
  out.c1 = std::min(w - 1, out.c1 + kGuard);
  return out;
}

// --- shape rasterizers ------------------------------------------------

Grid rasterize_lake(int w, int h, Rng& rng) {
  Grid g(w, h);
  const double r0 = rng.uniform(8.3, 9.5);
  const double margin = r0 * 1.2 + 1.0;
  const double cx = rng.uniform(margin, w - 1 - margin);
  const double cy = rng.uniform(margin, h - 1 - margin);
  const double a1 = rng.uniform(0.05, 0.14);
  const double a2 = rng.uniform(0.03, 0.10);
  const double p1 = rng.uniform(0.0, 2.0 * M_PI);
  const double p2 = rng.uniform(0.0, 2.0 * M_PI);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dy = r - cy, dx = c - cx;
      const double d = std::hypot(dx, dy);
      const double th = std::atan2(dy, dx);
      const double rad = r0 * (1.0 + a1 * std::sin(2.0 * th + p1) + a2 * std::sin(3.0 * th + p2));
      if (d <= rad) g.at(r, c) = 1;
    }
  }
  return g;
}

// Dams carry a visible wall: a thin bright stripe of pixels hugging the
// straight edge, land in the mask but painted like concrete. This is the
// class signature the recognizer keys on.
struct DamShape {
  Grid water;
  Grid wall;
  DamShape(int w, int h) : water(w, h), wall(w, h) {}
};

// D-shaped reservoir: wobbled disc cut by a straight wall whose normal is a
// multiple of 45 degrees. The chord is the dam wall; it sits well off the
// disc center so the rest of the scene keeps room for natural crop windows.
DamShape rasterize_dam_dshape(int w, int h, Rng& rng) {
  DamShape out(w, h);
  const double r0 = rng.uniform(9.5, 11.0);
  const double margin = r0 * 1.1 + 1.0;
  const double cx = rng.uniform(margin, w - 1 - margin);
  const double cy = rng.uniform(margin, h - 1 - margin);
  const double a1 = rng.uniform(0.03, 0.08);
  const double p1 = rng.uniform(0.0, 2.0 * M_PI);
  const int wall_octant = rng.uniform_int(0, 7);
  const double wall_angle = wall_octant * (M_PI / 4.0);
  const double nx = std::cos(wall_angle), ny = std::sin(wall_angle);
  const double cut = rng.uniform(0.35, 0.55) * r0;
  const double wall_t = rng.uniform(1.8, 2.6);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double dy = r - cy, dx = c - cx;
      const double d = std::hypot(dx, dy);
      const double th = std::atan2(dy, dx);
      const double rad = r0 * (1.0 + a1 * std::sin(2.0 * th + p1));
      if (d > rad) continue;
      const double proj = dx * nx + dy * ny;
      if (proj <= cut) out.water.at(r, c) = 1;
      else if (proj <= cut + wall_t) out.wall.at(r, c) = 1;
    }
  }
  return out;
}

// Triangle with an axis-aligned base: a river valley dammed at one end.
DamShape rasterize_dam_triangle(int w, int h, Rng& rng) {
  DamShape out(w, h);
  double base = rng.uniform(17.0, 21.0);
  double depth = rng.uniform(20.0, 24.0);
  if (base * depth < 2.0 * kRawMinArea) depth = 2.0 * kRawMinArea / base;
  const double skew = rng.uniform(-4.0, 4.0);
  const int orient = rng.uniform_int(0, 3);  // which side the wall faces
  const double wall_t = rng.uniform(1.8, 2.6);
  const double mx = std::max(base, depth) / 2.0 + wall_t + 1.0;
  const double cx = rng.uniform(mx, w - 1 - mx);
  const double cy = rng.uniform(mx, h - 1 - mx);
  // canonical triangle in local coords: base spans y = -depth/2,
  // apex at (skew, +depth/2); the wall hugs the base from outside
  const double x0 = -base / 2.0, x1 = base / 2.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double lx = c - cx, ly = r - cy;
      // rotate local frame by -orient * 90 deg
      for (int t = 0; t < orient; ++t) {
        const double tmp = lx;
        lx = ly;
        ly = -tmp;
      }
      if (ly < -depth / 2.0 - wall_t || ly > depth / 2.0) continue;
      if (ly < -depth / 2.0) {
        if (lx >= x0 && lx <= x1) out.wall.at(r, c) = 1;
        continue;
      }
      const double f = (ly + depth / 2.0) / depth;  // 0 at base, 1 at apex
      const double left = x0 + f * (skew - x0);
      const double right = x1 + f * (skew - x1);
      if (lx >= left && lx <= right) out.water.at(r, c) = 1;
    }
  }
  return out;
}

// Kept short and wide: a river spanning the scene would own a crop window
// covering everything, leaving no room for the wall-exclusion rule below.
Grid rasterize_river(int w, int h, Rng& rng) {
  Grid g(w, h);
  const double theta = rng.uniform(0.0, M_PI);
  const double dirx = std::cos(theta), diry = std::sin(theta);
  const double cx = rng.uniform(w * 0.3, w * 0.7);
  const double cy = rng.uniform(h * 0.3, h * 0.7);
  const double half_len = rng.uniform(15.0, 20.0);
  const double amp = rng.uniform(2.0, 4.0);
  const double wavelen = rng.uniform(22.0, 44.0);
  const double phase = rng.uniform(0.0, 2.0 * M_PI);
  const double half_width = rng.uniform(8.0, 10.0) / 2.0;
  const int rad = static_cast<int>(std::ceil(half_width));
  for (double t = -half_len; t <= half_len; t += 0.5) {
    const double off = amp * std::sin(2.0 * M_PI * t / wavelen + phase);
    const double px = cx + t * dirx - off * diry;
    const double py = cy + t * diry + off * dirx;
    const int pr = static_cast<int>(std::lround(py));
    const int pc = static_cast<int>(std::lround(px));
    for (int dr = -rad; dr <= rad; ++dr) {
      for (int dc = -rad; dc <= rad; ++dc) {
        const int rr = pr + dr, cc = pc + dc;
        if (!g.inside(rr, cc)) continue;
        const double dd = std::hypot(py - rr, px - cc);
        if (dd <= half_width) g.at(rr, cc) = 1;
      }
    }
  }
  return g;
}

// --- raster painting ---------------------------------------------------

// Low-frequency field from a bilinearly upsampled coarse noise grid.
std::vector<double> smooth_field(int w, int h, double amp, Rng& rng) {
  constexpr int kCoarse = 9;
  std::vector<double> coarse(kCoarse * kCoarse);
  for (double& v : coarse) v = rng.normal() * amp;
  std::vector<double> out(static_cast<std::size_t>(w) * h);
  for (int r = 0; r < h; ++r) {
    const double fy = static_cast<double>(r) / (h - 1) * (kCoarse - 1);
    const int y0 = std::min(static_cast<int>(fy), kCoarse - 2);
    const double wy = fy - y0;
    for (int c = 0; c < w; ++c) {
      const double fx = static_cast<double>(c) / (w - 1) * (kCoarse - 1);
      const int x0 = std::min(static_cast<int>(fx), kCoarse - 2);
      const double wx = fx - x0;
      const double top = coarse[y0 * kCoarse + x0] * (1 - wx) + coarse[y0 * kCoarse + x0 + 1] * wx;
      const double bot =
          coarse[(y0 + 1) * kCoarse + x0] * (1 - wx) + coarse[(y0 + 1) * kCoarse + x0 + 1] * wx;
      out[static_cast<std::size_t>(r) * w + c] = top * (1 - wy) + bot * wy;
    }
  }
  return out;
}

}  // namespace

Scene generate_scene(const SceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng = Rng::substream(seed, "scene");
  const int w = spec.width, h = spec.height;

  Scene scene;
  scene.raster = Raster(w, h, 3);
  scene.mask = LabelMask(w, h, 3);

  // Per-scene appearance: global brightness and land/water tints vary from
  // scene to scene, which is what cross-image triplet mining feeds on.
  const double brightness = rng.uniform(0.85, 1.15);
  double land[3] = {0.30 + rng.uniform(-0.08, 0.08), 0.38 + rng.uniform(-0.08, 0.08),
                    0.22 + rng.uniform(-0.06, 0.06)};
  const auto field = smooth_field(w, h, 0.06, rng);

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        scene.raster.at(r, c, ch) = land[ch] * brightness + field[static_cast<std::size_t>(r) * w + c];
      }
    }
  }

  // Place bodies. Keepout enforces a 6 px Chebyshev gap between bodies. On
  // top of that, dam walls must stay out of every natural body's crop window
  // (the x2-expanded bbox emitted downstream, padded for prediction wobble):
  // a wall leaking into a natural crop would hand the recognizer a dam cue on
  // a natural label, which is exactly the ambiguity the generator promises
  // not to produce. A body that cannot be placed after bounded attempts means
  // the arrangement so far boxed it out, so re-roll the whole scene.
  struct PlacedBody {
    Grid shape;       // pre-jitter pixels, used for painting
    Grid wall;        // dam wall stripe, painted but never labeled water
    Grid final_mask;  // post-jitter pixels, used for labels
    int body_class;
    PlacedBody(int w_, int h_)
        : shape(w_, h_), wall(w_, h_), final_mask(w_, h_), body_class(1) {}
  };
  std::vector<PlacedBody> placed;

  const double mix[3] = {spec.mix_dam, spec.mix_lake, spec.mix_river};
  auto place_pass = [&]() -> bool {
    Grid keepout(w, h);
    Grid walls_sofar(w, h);
    std::vector<BBox> natural_crops;
    placed.clear();
    // Plan the archetypes up front and commit dams first: a wall constrains
    // every natural placed later, and fitting naturals around a fixed wall is
    // far easier than threading a wall between claimed crop windows. Rivers
    // go last; their windows are the largest but they only dodge walls.
    std::vector<int> plan(spec.num_bodies);
    for (int& a : plan) a = rng.categorical(mix);
    std::stable_sort(plan.begin(), plan.end());
    for (int b = 0; b < spec.num_bodies; ++b) {
      const int archetype = plan[b];
      bool ok = false;
      for (int attempt = 0; attempt < 300 && !ok; ++attempt) {
        Grid cand(w, h);
        Grid wall(w, h);
        int body_class = 1;
        switch (static_cast<BodyShape>(archetype)) {
          case BodyShape::TriangularDam: {
            DamShape ds = rng.bernoulli(0.5) ? rasterize_dam_dshape(w, h, rng)
                                             : rasterize_dam_triangle(w, h, rng);
            cand = std::move(ds.water);
            wall = std::move(ds.wall);
            body_class = 2;
            break;
          }
          case BodyShape::RoundedLake:
            cand = rasterize_lake(w, h, rng);
            break;
          case BodyShape::LinearRiver:
            cand = rasterize_river(w, h, rng);
            break;
        }
        const int area = grid_area(cand);
        if (area < kRawMinArea || !single_component(cand, area)) continue;
        bool collides = false;
        for (int r = 0; r < h && !collides; ++r)
          for (int c = 0; c < w; ++c)
            if ((cand.at(r, c) || wall.at(r, c)) && keepout.at(r, c)) { collides = true; break; }
        if (collides) continue;

        // Contour jitter: the label outline moves, the painted water does not.
        Grid final_mask = cand;
        if (rng.bernoulli(spec.contour_jitter)) {
          const bool grow = rng.bernoulli(0.5);
          int amount = rng.bernoulli(0.5) ? 2 : 1;
          for (; amount >= 1; --amount) {
            Grid jittered = cand;
            for (int k = 0; k < amount; ++k) {
              jittered = grow ? dilate_once(jittered) : erode_once(jittered);
            }
            const int ja = grid_area(jittered);
            if (ja >= kFinalMinArea && single_component(jittered, ja)) {
              final_mask = jittered;
              break;
            }
          }
        }

        if (body_class == 2) {
          // this wall may not sit inside any placed natural body's crop window
          bool leak = false;
          for (const BBox& nb : natural_crops) {
            for (int r = nb.r0; r <= nb.r1 && !leak; ++r)
              for (int c = nb.c0; c <= nb.c1; ++c)
                if (wall.at(r, c)) { leak = true; break; }
            if (leak) break;
          }
          if (leak) continue;
        } else {
          // this crop window may not contain any already-placed wall
          const BBox cw = crop_window(final_mask, w, h);
          bool leak = false;
          for (int r = cw.r0; r <= cw.r1 && !leak; ++r)
            for (int c = cw.c0; c <= cw.c1; ++c)
              if (walls_sofar.at(r, c)) { leak = true; break; }
          if (leak) continue;
          natural_crops.push_back(cw);
        }

        PlacedBody pb(w, h);
        pb.shape = cand;
        pb.wall = wall;
        pb.body_class = body_class;
        pb.final_mask = final_mask;

        for (int r = 0; r < h; ++r) {
          for (int c = 0; c < w; ++c) {
            if (wall.at(r, c)) walls_sofar.at(r, c) = 1;
            if (!cand.at(r, c)) continue;
            for (int dr = -kKeepoutRadius; dr <= kKeepoutRadius; ++dr) {
              for (int dc = -kKeepoutRadius; dc <= kKeepoutRadius; ++dc) {
                const int rr = r + dr, cc = c + dc;
                if (keepout.inside(rr, cc)) keepout.at(rr, cc) = 1;
              }
            }
          }
        }
        placed.push_back(std::move(pb));
        ok = true;
      }
      if (!ok) return false;
    }
    return true;
  };
  bool arranged = false;
  for (int restart = 0; restart < 128 && !arranged; ++restart) arranged = place_pass();
  if (!arranged) {
    throw PlacementError("could not place " + std::to_string(spec.num_bodies) +
                         " bodies after bounded retries");
  }

  for (const auto& pb : placed) {
    double water[3] = {0.10 + rng.uniform(-0.04, 0.04), 0.16 + rng.uniform(-0.05, 0.05),
                       0.42 + rng.uniform(-0.10, 0.10)};
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (!pb.shape.at(r, c)) continue;
        for (int ch = 0; ch < 3; ++ch) {
          scene.raster.at(r, c, ch) =
              water[ch] * brightness + 0.5 * field[static_cast<std::size_t>(r) * w + c];
        }
      }
    }
    if (pb.body_class == 2) {
      const double gray = 0.80 + rng.uniform(-0.05, 0.05);
      const double concrete[3] = {gray, gray * (1.0 + rng.uniform(-0.03, 0.03)),
                                  gray * (1.0 + rng.uniform(-0.03, 0.03))};
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          if (!pb.wall.at(r, c)) continue;
          for (int ch = 0; ch < 3; ++ch) {
            scene.raster.at(r, c, ch) =
                concrete[ch] * brightness + 0.3 * field[static_cast<std::size_t>(r) * w + c];
          }
        }
      }
    }
    BodyRecord rec;
    rec.body_class = pb.body_class;
    rec.r0 = h;
    rec.c0 = w;
    rec.r1 = -1;
    rec.c1 = -1;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        if (!pb.final_mask.at(r, c)) continue;
        scene.mask.at(r, c) = static_cast<std::uint8_t>(pb.body_class);
        ++rec.area;
        rec.r0 = std::min(rec.r0, r);
        rec.c0 = std::min(rec.c0, c);
        rec.r1 = std::max(rec.r1, r);
        rec.c1 = std::max(rec.c1, c);
      }
    }
    scene.bodies.push_back(rec);
  }

  // Haze blobs: bluish, so they never read as concrete, and kept off the
  // walls themselves, so occlusion cannot delete a dam's cue either.
  if (rng.bernoulli(spec.cloud_probability)) {
    const int blobs = rng.uniform_int(1, 2);
    for (int i = 0; i < blobs; ++i) {
      double cx = 0, cy = 0, radius = 0;
      bool clear = false;
      for (int tries = 0; tries < 20 && !clear; ++tries) {
        cx = rng.uniform(0.0, w - 1.0);
        cy = rng.uniform(0.0, h - 1.0);
        radius = rng.uniform(3.0, 6.0);
        clear = true;
        for (const auto& pb : placed) {
          if (pb.body_class != 2) continue;
          for (int r = 0; r < h && clear; ++r)
            for (int c = 0; c < w; ++c)
              if (pb.wall.at(r, c) && std::hypot(r - cy, c - cx) <= 2.0 * radius + 1.0) {
                clear = false;
                break;
              }
          if (!clear) break;
        }
      }
      if (!clear) continue;
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          const double d = std::hypot(r - cy, c - cx);
          if (d > 2.0 * radius) continue;
          const double alpha = 0.85 * std::exp(-2.0 * (d / radius) * (d / radius));
          const double haze[3] = {0.70, 0.80, 0.97};
          for (int ch = 0; ch < 3; ++ch) {
            scene.raster.at(r, c, ch) =
                (1.0 - alpha) * scene.raster.at(r, c, ch) + alpha * haze[ch];
          }
        }
      }
    }
  }

  if (spec.noise_level > 0.0) {
    for (Eigen::Index i = 0; i < scene.raster.size(); ++i) {
      scene.raster.data[i] += rng.normal() * spec.noise_level * 0.5;
    }
  }
  quantize(scene.raster);
  return scene;
}

}  // namespace damext
