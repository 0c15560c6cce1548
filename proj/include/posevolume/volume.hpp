#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "posevolume/geometry.hpp"

namespace posevolume {

/// Regular grid whose axes are parallel to the world (= reference camera)
/// axes. Cells are indexed x-fastest: index = ix + nx * (iy + ny * iz).
struct GridSpec {
  Vec3 center = Vec3::Zero();
  std::array<int, 3> dims{2, 2, 2};
  Vec3 cell_size = Vec3::Constant(0.01);

  std::size_t cell_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
  std::size_t linear_index(int ix, int iy, int iz) const {
    return static_cast<std::size_t>(ix) + static_cast<std::size_t>(dims[0]) * (iy + static_cast<std::size_t>(dims[1]) * iz);
  }
  double axis_coordinate(int axis, double index) const {
    return center[axis] + (index - 0.5 * (dims[axis] - 1)) * cell_size[axis];
  }
  Vec3 cell_center(int ix, int iy, int iz) const {
    return {axis_coordinate(0, ix), axis_coordinate(1, iy), axis_coordinate(2, iz)};
  }
  /// Continuous (fractional) cell index of a world coordinate along one axis.
  double fractional_index(int axis, double coordinate) const {
    return (coordinate - center[axis]) / cell_size[axis] + 0.5 * (dims[axis] - 1);
  }
  /// True when p lies within the outer faces of the boundary cells.
  bool contains(const Vec3& p) const;

  bool operator==(const GridSpec& other) const {
    return center == other.center && dims == other.dims && cell_size == other.cell_size;
  }
};

/// Default cap on the number of cells build_grid will accept (256^3).
inline constexpr std::size_t kDefaultMaxCells = std::size_t{256} * 256 * 256;

/// Grid of ceil(2 * half_range / cell_size) cells per axis around center.
GridSpec build_grid(const Vec3& center, const Vec3& half_range, double cell_size,
                    std::size_t max_cells = kDefaultMaxCells);

/// Dense per-pixel feature image plus a per-pixel object mask in [0, 1].
/// Pixel (u, v) with channel c lives at data[(v * width + u) * channels + c].
struct FeatureMap {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<float> data;
  std::vector<float> mask;

  FeatureMap() = default;
  FeatureMap(int width, int height, int channels);

  std::span<float> pixel(int u, int v) {
    return {data.data() + (static_cast<std::size_t>(v) * width + u) * channels,
            static_cast<std::size_t>(channels)};
  }
  std::span<const float> pixel(int u, int v) const {
    return {data.data() + (static_cast<std::size_t>(v) * width + u) * channels,
            static_cast<std::size_t>(channels)};
  }
  float& mask_at(int u, int v) { return mask[static_cast<std::size_t>(v) * width + u]; }
  float mask_at(int u, int v) const { return mask[static_cast<std::size_t>(v) * width + u]; }

  void validate() const;
};

/// All feature maps of one view, e.g. a full-resolution and a quarter-resolution tap.
using ViewFeatures = std::vector<FeatureMap>;

/// Bilinear sample of every channel at continuous pixel (u, v) into out.
/// Locations outside [0, width-1] x [0, height-1] yield zeros.
void bilinear_sample(const FeatureMap& map, double u, double v, std::span<double> out);
std::vector<double> bilinear_sample(const FeatureMap& map, double u, double v);

/// Mask value at (u, v) with the same interpolation and out-of-image rule.
double bilinear_sample_mask(const FeatureMap& map, double u, double v);

/// Per-cell feature vectors lifted from two views. Channel layout is the
/// concatenation of every reference-view map followed by every query-view map.
struct GeometricVolume {
  GridSpec spec;
  int channels = 0;
  std::vector<float> values;

  std::span<const float> cell(std::size_t index) const {
    return {values.data() + index * channels, static_cast<std::size_t>(channels)};
  }
};

/// Projects every cell center into both views, samples each map bilinearly,
/// gates the sample by that view's mask, and concatenates ref-then-query.
/// Maps may have any resolution; they are addressed through intrinsics scaled
/// to the map size.
GeometricVolume lift_features(const GridSpec& spec, const ViewFeatures& ref,
                              const ViewFeatures& query, const ViewPair& pair);

/// The 8-cell interpolation stencil of a world point.
struct TrilinearStencil {
  std::array<std::size_t, 8> cells{};
  std::array<double, 8> weights{};
  bool inside = false;
};

TrilinearStencil trilinear_stencil(const GridSpec& spec, const Vec3& p);

/// Trilinear interpolation of a scalar grid; zero outside the grid.
double trilinear_sample(const GridSpec& spec, std::span<const double> values, const Vec3& p);

/// Trilinear interpolation of every channel of a volume; zeros outside.
std::vector<double> trilinear_sample(const GeometricVolume& volume, const Vec3& p);

}  // namespace posevolume
