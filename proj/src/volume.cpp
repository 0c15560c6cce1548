#include "posevolume/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "posevolume/error.hpp"

namespace posevolume {

bool GridSpec::contains(const Vec3& p) const {
  for (int axis = 0; axis < 3; ++axis) {
    const double f = fractional_index(axis, p[axis]);
    if (!(f >= -0.5 && f <= dims[axis] - 0.5)) return false;
  }
  return true;
}

GridSpec build_grid(const Vec3& center, const Vec3& half_range, double cell_size,
                    std::size_t max_cells) {
  if (!(cell_size > 0.0) || !(half_range.array() > 0.0).all() || !center.allFinite()) {
    throw Error(ErrorCode::InvalidRange, "half range and cell size must be positive");
  }
  GridSpec spec;
  spec.center = center;
  spec.cell_size = Vec3::Constant(cell_size);
  double total = 1.0;
  for (int axis = 0; axis < 3; ++axis) {
    const double ratio = 2.0 * half_range[axis] / cell_size;
    // Absorb round-off such as 0.1 / 0.005 = 20.000000000000004.
    const double n = std::max(2.0, std::ceil(ratio - 1e-9 * std::max(1.0, ratio)));
    total *= n;
    if (total > static_cast<double>(max_cells)) {
      std::ostringstream os;
      os << "grid would exceed the cap of " << max_cells << " cells";
      throw Error(ErrorCode::InvalidRange, os.str());
    }
    spec.dims[axis] = static_cast<int>(n);
  }
  return spec;
}

FeatureMap::FeatureMap(int w, int h, int c)
    : width(w),
      height(h),
      channels(c),
      data(static_cast<std::size_t>(w) * h * c, 0.0f),
      mask(static_cast<std::size_t>(w) * h, 0.0f) {}

void FeatureMap::validate() const {
  if (width < 1 || height < 1 || channels < 0 ||
      data.size() != static_cast<std::size_t>(width) * height * channels ||
      mask.size() != static_cast<std::size_t>(width) * height) {
    throw Error(ErrorCode::InvalidArgument, "feature map buffers do not match its shape");
  }
}

namespace {

struct BilinearTaps {
  std::size_t p00, p10, p01, p11;
  double w00, w10, w01, w11;
};

bool bilinear_taps(int width, int height, double u, double v, BilinearTaps& taps) {
  if (!(u >= 0.0 && v >= 0.0 && u <= width - 1 && v <= height - 1)) return false;
  const int u0 = std::min(static_cast<int>(u), std::max(width - 2, 0));
  const int v0 = std::min(static_cast<int>(v), std::max(height - 2, 0));
  const int u1 = std::min(u0 + 1, width - 1);
  const int v1 = std::min(v0 + 1, height - 1);
  const double a = u - u0;
  const double b = v - v0;
  const auto w = static_cast<std::size_t>(width);
  taps.p00 = v0 * w + u0;
  taps.p10 = v0 * w + u1;
  taps.p01 = v1 * w + u0;
  taps.p11 = v1 * w + u1;
  taps.w00 = (1.0 - a) * (1.0 - b);
  taps.w10 = a * (1.0 - b);
  taps.w01 = (1.0 - a) * b;
  taps.w11 = a * b;
  return true;
}

}  // namespace

void bilinear_sample(const FeatureMap& map, double u, double v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  BilinearTaps t;
  if (!bilinear_taps(map.width, map.height, u, v, t)) return;
  const auto c = static_cast<std::size_t>(map.channels);
  const float* d00 = map.data.data() + t.p00 * c;
  const float* d10 = map.data.data() + t.p10 * c;
  const float* d01 = map.data.data() + t.p01 * c;
  const float* d11 = map.data.data() + t.p11 * c;
  for (std::size_t k = 0; k < c; ++k) {
    out[k] = t.w00 * d00[k] + t.w10 * d10[k] + t.w01 * d01[k] + t.w11 * d11[k];
  }
}

std::vector<double> bilinear_sample(const FeatureMap& map, double u, double v) {
  std::vector<double> out(static_cast<std::size_t>(map.channels));
  bilinear_sample(map, u, v, out);
  return out;
}

double bilinear_sample_mask(const FeatureMap& map, double u, double v) {
  BilinearTaps t;
  if (!bilinear_taps(map.width, map.height, u, v, t)) return 0.0;
  return t.w00 * map.mask[t.p00] + t.w10 * map.mask[t.p10] + t.w01 * map.mask[t.p01] +
         t.w11 * map.mask[t.p11];
}

GeometricVolume lift_features(const GridSpec& spec, const ViewFeatures& ref,
                              const ViewFeatures& query, const ViewPair& pair) {
  int ref_channels = 0;
  int query_channels = 0;
  for (const auto& m : ref) {
    m.validate();
    ref_channels += m.channels;
  }
  for (const auto& m : query) {
    m.validate();
    query_channels += m.channels;
  }
  if (ref_channels != query_channels) {
    throw Error(ErrorCode::InvalidArgument, "reference and query views must share a channel count");
  }

  GeometricVolume volume;
  volume.spec = spec;
  volume.channels = ref_channels + query_channels;
  volume.values.assign(spec.cell_count() * volume.channels, 0.0f);

  struct Tap {
    const FeatureMap* map;
    CameraIntrinsics k;
  };
  struct View {
    RigidTransform from_world;
    std::vector<Tap> taps;
  };
  const CameraIntrinsics& k = pair.intrinsics();
  std::array<View, 2> views{View{pair.ref_from_world(), {}}, View{pair.query_from_world(), {}}};
  for (const auto& m : ref) views[0].taps.push_back({&m, k.scaled_to(m.width, m.height)});
  for (const auto& m : query) views[1].taps.push_back({&m, k.scaled_to(m.width, m.height)});

  const auto channels = static_cast<std::size_t>(volume.channels);
  for (int iz = 0; iz < spec.dims[2]; ++iz) {
    for (int iy = 0; iy < spec.dims[1]; ++iy) {
      for (int ix = 0; ix < spec.dims[0]; ++ix) {
        const Vec3 world = spec.cell_center(ix, iy, iz);
        float* out = volume.values.data() + spec.linear_index(ix, iy, iz) * channels;
        for (const View& view : views) {
          const Vec3 p = view.from_world.apply(world);
          for (const Tap& tap : view.taps) {
            const int c = tap.map->channels;
            if (p.z() > 0.0) {
              const double u = tap.k.fx * p.x() / p.z() + tap.k.cx;
              const double v = tap.k.fy * p.y() / p.z() + tap.k.cy;
              BilinearTaps t;
              if (bilinear_taps(tap.map->width, tap.map->height, u, v, t)) {
                const std::vector<float>& m = tap.map->mask;
                const double gate = t.w00 * m[t.p00] + t.w10 * m[t.p10] + t.w01 * m[t.p01] +
                                    t.w11 * m[t.p11];
                if (gate != 0.0) {
                  const float* base = tap.map->data.data();
                  const float* d00 = base + t.p00 * c;
                  const float* d10 = base + t.p10 * c;
                  const float* d01 = base + t.p01 * c;
                  const float* d11 = base + t.p11 * c;
                  for (int ch = 0; ch < c; ++ch) {
                    const double f = t.w00 * d00[ch] + t.w10 * d10[ch] + t.w01 * d01[ch] + t.w11 * d11[ch];
                    out[ch] = static_cast<float>(gate * f);
                  }
                }
              }
            }
            out += c;
          }
        }
      }
    }
  }
  return volume;
}

TrilinearStencil trilinear_stencil(const GridSpec& spec, const Vec3& p) {
  TrilinearStencil s;
  if (!spec.contains(p)) return s;
  std::array<int, 3> lo{};
  std::array<int, 3> hi{};
  std::array<double, 3> frac{};
  for (int axis = 0; axis < 3; ++axis) {
    const int n = spec.dims[axis];
    const double f = std::clamp(spec.fractional_index(axis, p[axis]), 0.0, n - 1.0);
    lo[axis] = std::min(static_cast<int>(f), n - 2);
    hi[axis] = lo[axis] + 1;
    frac[axis] = f - lo[axis];
  }
  for (int corner = 0; corner < 8; ++corner) {
    const int bx = corner & 1;
    const int by = (corner >> 1) & 1;
    const int bz = (corner >> 2) & 1;
    s.cells[corner] = spec.linear_index(bx ? hi[0] : lo[0], by ? hi[1] : lo[1], bz ? hi[2] : lo[2]);
    s.weights[corner] = (bx ? frac[0] : 1.0 - frac[0]) * (by ? frac[1] : 1.0 - frac[1]) *
                        (bz ? frac[2] : 1.0 - frac[2]);
  }
  s.inside = true;
  return s;
}

double trilinear_sample(const GridSpec& spec, std::span<const double> values, const Vec3& p) {
  if (values.size() != spec.cell_count()) {
    throw Error(ErrorCode::SpecMismatch, "grid values do not match the grid shape");
  }
  const TrilinearStencil s = trilinear_stencil(spec, p);
  if (!s.inside) return 0.0;
  double out = 0.0;
  for (int j = 0; j < 8; ++j) out += s.weights[j] * values[s.cells[j]];
  return out;
}

std::vector<double> trilinear_sample(const GeometricVolume& volume, const Vec3& p) {
  std::vector<double> out(static_cast<std::size_t>(volume.channels), 0.0);
  const TrilinearStencil s = trilinear_stencil(volume.spec, p);
  if (!s.inside) return out;
  for (int j = 0; j < 8; ++j) {
    const auto cell = volume.cell(s.cells[j]);
    for (int ch = 0; ch < volume.channels; ++ch) out[ch] += s.weights[j] * cell[ch];
  }
  return out;
}

}  // namespace posevolume
