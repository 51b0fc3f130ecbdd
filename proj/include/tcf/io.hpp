#pragma once

#include <optional>
#include <string>

#include "tcf/synthetic.hpp"
#include "tcf/tcf_core.hpp"

namespace tcf {

/// Settings shared by ingestion and the CLI. Scale/k defaults depend on
/// the input kind and are resolved where the field is constructed.
struct ComputeConfig {
  std::optional<double> scale;  // isotropic kernel scale sigma^2
  std::optional<int> k;         // knn truncation
  bool negate = false;          // dark tubes on light background
  double mask_threshold = 1e-3;
  int workers = 0;

  double scale_or(double def) const { return scale.value_or(def); }
};

/// 8/16-bit grayscale raster (row 0 = image top); color PNGs are reduced
/// to luma on load.
struct GrayImage {
  int width = 0, height = 0;
  std::vector<double> pixels;  // row-major, [0, maxval]
  double maxval = 255.0;

  double& at(int row, int col) { return pixels[static_cast<std::size_t>(row) * width + col]; }
  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

GrayImage read_gray_image(const std::string& path);   // PNG or PGM by content
void write_gray_png(const GrayImage& img, const std::string& path);

/// One kernel per positive pixel; weight = intensity / max, pixel (row,
/// col) maps to the point (x=col, y=row). Default scale 0.5*I2, k = 440.
IntensityField<2> load_image_field(const std::string& path, const ComputeConfig& cfg);

/// Raw little-endian volume plus JSON sidecar {dims, dtype, spacing,
/// order:"x-fastest"}. Default scale I3, k = 20.
IntensityField<3> load_volume_field(const std::string& raw_path, const std::string& sidecar_path,
                                    const ComputeConfig& cfg);

/// 2-D fields go to PFM (Pf, -1.0 scale, float32, bottom-to-top rows;
/// non-Ok points stored as NaN). 3-D fields go to raw float32 x-fastest
/// with a JSON sidecar (path + ".json") carrying dims, bounds and
/// run-length encoded statuses.
void write_curvature(const CurvatureField& field, const std::string& path);
CurvatureField read_curvature(const std::string& path);

struct RenderOptions {
  bool equalize = false;
  std::optional<int> slice_axis;   // 3-D: extract one slice...
  std::optional<int> slice_index;
  std::optional<int> mip_axis;     // ...or a max-intensity projection
};

/// Min-max normalized 8-bit grayscale; histogram equalization over Ok
/// values only; masked/degenerate points render black.
void render_png(const CurvatureField& field, const std::string& path,
                const RenderOptions& opts = {});

/// Field serialization (the CLI's field.json): backend, centers, weights,
/// scales, knn.
void save_field_json(const FieldVariant& field, const std::string& path);
FieldVariant load_field_json(const std::string& path);

}  // namespace tcf
