#include "tcf/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <png.h>

#include <json.hpp>

namespace tcf {

using json = nlohmann::json;

namespace {

// ---------------------------------------------------------------- PGM ---

int pnm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c;
  for (;;) {
    c = in.get();
    if (c == EOF) return -1;
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
      continue;
    }
    if (!std::isspace(c)) break;
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(static_cast<char>(c));
    c = in.get();
  }
  return 0;
}

GrayImage read_pgm(std::istream& in) {
  std::string magic, tok;
  if (pnm_next_token(in, magic) < 0 || (magic != "P5" && magic != "P2"))
    throw IoError("PGM: bad magic");
  auto next_int = [&](const char* what) {
    if (pnm_next_token(in, tok) < 0) throw IoError(std::string("PGM: missing ") + what);
    return std::stol(tok);
  };
  const long w = next_int("width"), h = next_int("height"), maxval = next_int("maxval");
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535) throw IoError("PGM: bad header");

  GrayImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.maxval = static_cast<double>(maxval);
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  if (magic == "P2") {
    for (auto& p : img.pixels) {
      if (pnm_next_token(in, tok) < 0) throw IoError("PGM: truncated ascii data");
      p = std::stod(tok);
    }
  } else {
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(img.pixels.size() * bytes);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() != static_cast<std::streamsize>(buf.size()))
      throw IoError("PGM: truncated binary data");
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
      img.pixels[i] = bytes == 1 ? buf[i] : buf[2 * i] * 256.0 + buf[2 * i + 1];
  }
  return img;
}

// ---------------------------------------------------------------- PNG ---

struct PngReadCloser {
  png_structp png = nullptr;
  png_infop info = nullptr;
  FILE* fp = nullptr;
  ~PngReadCloser() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
    if (fp) std::fclose(fp);
  }
};

GrayImage read_png(const std::string& path) {
  PngReadCloser s;
  s.fp = std::fopen(path.c_str(), "rb");
  if (!s.fp) throw IoError("cannot open " + path);
  s.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  s.info = png_create_info_struct(s.png);
  if (!s.png || !s.info || setjmp(png_jmpbuf(s.png))) throw IoError("PNG: read failed: " + path);

  png_init_io(s.png, s.fp);
  png_read_info(s.png, s.info);
  png_set_expand(s.png);          // palette/low-bit-depth to 8-bit
  png_set_strip_alpha(s.png);
  const int color = png_get_color_type(s.png, s.info);
  if (color & PNG_COLOR_MASK_COLOR)
    png_set_rgb_to_gray(s.png, 1, -1, -1);  // luma reduction, default weights
  png_read_update_info(s.png, s.info);

  const int w = static_cast<int>(png_get_image_width(s.png, s.info));
  const int h = static_cast<int>(png_get_image_height(s.png, s.info));
  const int depth = png_get_bit_depth(s.png, s.info);
  if (depth != 8 && depth != 16) throw IoError("PNG: unsupported bit depth");

  GrayImage img;
  img.width = w;
  img.height = h;
  img.maxval = depth == 8 ? 255.0 : 65535.0;
  img.pixels.resize(static_cast<std::size_t>(w) * h);
  const int stride = w * depth / 8;
  std::vector<unsigned char> row(stride);
  for (int y = 0; y < h; ++y) {
    png_read_row(s.png, row.data(), nullptr);
    for (int x = 0; x < w; ++x)
      img.at(y, x) = depth == 8 ? row[x] : row[2 * x] * 256.0 + row[2 * x + 1];
  }
  return img;
}

// ------------------------------------------------------- little-endian ---

void put_f32_le(std::vector<unsigned char>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  out.push_back(static_cast<unsigned char>(bits & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 8) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 16) & 0xff));
  out.push_back(static_cast<unsigned char>((bits >> 24) & 0xff));
}

float get_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

std::vector<unsigned char> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

float stored_value(const CurvatureField& f, std::size_t i) {
  return f.status[i] == Status::Ok ? static_cast<float>(f.values[i])
                                   : std::numeric_limits<float>::quiet_NaN();
}

const char* status_name(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::Degenerate: return "degenerate";
    case Status::MaskedLowIntensity: return "masked";
    default: return "nonfinite";
  }
}

Status status_from_name(const std::string& s) {
  if (s == "ok") return Status::Ok;
  if (s == "degenerate") return Status::Degenerate;
  if (s == "masked") return Status::MaskedLowIntensity;
  if (s == "nonfinite") return Status::NonFinite;
  throw IoError("unknown status name: " + s);
}

}  // namespace

GrayImage read_gray_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw IoError("cannot open " + path);
  unsigned char magic[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(magic), 2);
  probe.seekg(0);
  if (magic[0] == 'P' && (magic[1] == '5' || magic[1] == '2')) return read_pgm(probe);
  if (magic[0] == 0x89 && magic[1] == 'P') return read_png(path);
  throw IoError("unrecognized image format: " + path);
}

void write_gray_png(const GrayImage& img, const std::string& path) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw IoError("cannot open " + path + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(fp);
    throw IoError("PNG: write failed: " + path);
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<unsigned char> row(img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x)
      row[x] = static_cast<unsigned char>(std::clamp(img.at(y, x), 0.0, 255.0));
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

IntensityField<2> load_image_field(const std::string& path, const ComputeConfig& cfg) {
  const GrayImage img = read_gray_image(path);
  std::vector<double> w(img.pixels);
  if (cfg.negate)
    for (auto& v : w) v = img.maxval - v;
  const double wmax = *std::max_element(w.begin(), w.end());
  if (!(wmax > 0.0)) throw EmptyField("image has no positive intensity: " + path);

  std::vector<Vec<2>> centers;
  std::vector<double> weights;
  for (int row = 0; row < img.height; ++row)
    for (int col = 0; col < img.width; ++col) {
      const double v = w[static_cast<std::size_t>(row) * img.width + col];
      if (v > 0.0) {
        centers.push_back({static_cast<double>(col), static_cast<double>(row)});
        weights.push_back(v / wmax);
      }
    }
  const double sigma2 = cfg.scale_or(0.5);
  std::optional<int> k = cfg.k.value_or(440);
  if (*k > static_cast<int>(centers.size())) k = static_cast<int>(centers.size());
  return IntensityField<2>::gaussian_mixture(std::move(centers), std::move(weights), sigma2, k);
}

IntensityField<3> load_volume_field(const std::string& raw_path, const std::string& sidecar_path,
                                    const ComputeConfig& cfg) {
  json meta;
  {
    std::ifstream in(sidecar_path);
    if (!in) throw IoError("cannot open " + sidecar_path);
    in >> meta;
  }
  const auto dims = meta.at("dims").get<std::vector<long>>();
  const std::string dtype = meta.at("dtype").get<std::string>();
  std::vector<double> spacing = meta.value("spacing", std::vector<double>{1.0, 1.0, 1.0});
  if (dims.size() != 3 || spacing.size() != 3) throw IoError("volume sidecar: need 3 dims");
  if (meta.value("order", "x-fastest") != std::string("x-fastest"))
    throw IoError("volume sidecar: unsupported order");

  std::size_t elem;
  if (dtype == "uint8") elem = 1;
  else if (dtype == "uint16") elem = 2;
  else if (dtype == "float32") elem = 4;
  else throw IoError("volume sidecar: unsupported dtype " + dtype);

  const auto bytes = read_file_bytes(raw_path);
  const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  if (bytes.size() != n * elem) throw IoError("volume payload size does not match dims/dtype");

  std::vector<Vec<3>> centers;
  std::vector<double> weights;
  double wmax = 0.0;
  std::size_t idx = 0;
  for (long z = 0; z < dims[2]; ++z)
    for (long y = 0; y < dims[1]; ++y)
      for (long x = 0; x < dims[0]; ++x, ++idx) {
        double v;
        const unsigned char* p = bytes.data() + idx * elem;
        if (elem == 1) v = *p;
        else if (elem == 2) v = p[0] | (p[1] << 8);
        else v = get_f32_le(p);
        if (v > 0.0) {
          centers.push_back({x * spacing[0], y * spacing[1], z * spacing[2]});
          weights.push_back(v);
          wmax = std::max(wmax, v);
        }
      }
  if (centers.empty()) throw EmptyField("volume has no positive voxels: " + raw_path);
  for (auto& v : weights) v /= wmax;

  const double sigma2 = cfg.scale_or(1.0);
  std::optional<int> k = cfg.k.value_or(20);
  if (*k > static_cast<int>(centers.size())) k = static_cast<int>(centers.size());
  return IntensityField<3>::gaussian_mixture(std::move(centers), std::move(weights), sigma2, k);
}

void write_curvature(const CurvatureField& field, const std::string& path) {
  if (field.dim() == 2) {
    const int nx = field.grid.axes[0].samples, ny = field.grid.axes[1].samples;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "Pf\n" << nx << " " << ny << "\n-1.0\n";
    std::vector<unsigned char> buf;
    buf.reserve(static_cast<std::size_t>(nx) * ny * 4);
    // bottom-to-top scanlines: y = ny-1 first
    for (int y = ny - 1; y >= 0; --y)
      for (int x = 0; x < nx; ++x)
        put_f32_le(buf, stored_value(field, static_cast<std::size_t>(y) * nx + x));
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!out) throw IoError("short write: " + path);
    return;
  }
  if (field.dim() != 3) throw IoError("write_curvature: only 2-D and 3-D fields supported");

  std::vector<unsigned char> buf;
  buf.reserve(field.size() * 4);
  for (std::size_t i = 0; i < field.size(); ++i) put_f32_le(buf, stored_value(field, i));
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  json meta;
  meta["dims"] = {field.grid.axes[0].samples, field.grid.axes[1].samples,
                  field.grid.axes[2].samples};
  meta["bounds"] = json::array();
  for (const auto& ax : field.grid.axes) meta["bounds"].push_back({ax.lo, ax.hi});
  json rle = json::array();
  std::size_t i = 0;
  while (i < field.status.size()) {
    std::size_t j = i;
    while (j < field.status.size() && field.status[j] == field.status[i]) ++j;
    rle.push_back({status_name(field.status[i]), j - i});
    i = j;
  }
  meta["statuses"] = rle;
  std::ofstream side(path + ".json");
  side << meta.dump(2) << "\n";
  if (!side) throw IoError("cannot write " + path + ".json");
}

CurvatureField read_curvature(const std::string& path) {
  const auto bytes = read_file_bytes(path);
  CurvatureField out;
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == 'f') {
    std::istringstream header(std::string(bytes.begin(), bytes.begin() + std::min<std::size_t>(
                                                             bytes.size(), 128)));
    std::string magic;
    int nx = 0, ny = 0;
    double scale = 0.0;
    header >> magic >> nx >> ny >> scale;
    if (!header || nx <= 0 || ny <= 0 || scale >= 0.0) throw IoError("PFM: malformed header");
    header.get();  // single whitespace after the scale line
    const std::size_t offset = static_cast<std::size_t>(header.tellg());
    const std::size_t n = static_cast<std::size_t>(nx) * ny;
    if (bytes.size() < offset + n * 4) throw IoError("PFM: truncated payload");
    out.grid.axes = {{nx, 0.0, static_cast<double>(nx - 1)},
                     {ny, 0.0, static_cast<double>(ny - 1)}};
    out.values.assign(n, 0.0);
    out.status.assign(n, Status::Ok);
    for (int y = ny - 1; y >= 0; --y)
      for (int x = 0; x < nx; ++x) {
        const std::size_t file_i =
            (static_cast<std::size_t>(ny - 1 - y) * nx + x) * 4 + offset;
        const float v = get_f32_le(bytes.data() + file_i);
        const std::size_t i = static_cast<std::size_t>(y) * nx + x;
        out.values[i] = v;
        if (std::isnan(v)) out.status[i] = Status::MaskedLowIntensity;
      }
    return out;
  }

  json meta;
  {
    std::ifstream in(path + ".json");
    if (!in) throw IoError("cannot open " + path + ".json");
    in >> meta;
  }
  const auto dims = meta.at("dims").get<std::vector<int>>();
  const auto bounds = meta.at("bounds").get<std::vector<std::vector<double>>>();
  if (dims.size() != 3 || bounds.size() != 3) throw IoError("curvature sidecar: need 3 dims");
  std::size_t n = 1;
  for (int d = 0; d < 3; ++d) {
    out.grid.axes.push_back({dims[d], bounds[d][0], bounds[d][1]});
    n *= static_cast<std::size_t>(dims[d]);
  }
  if (bytes.size() != n * 4) throw IoError("curvature payload size mismatch");
  out.values.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.values[i] = get_f32_le(bytes.data() + i * 4);
  out.status.assign(n, Status::Ok);
  std::size_t i = 0;
  for (const auto& run : meta.at("statuses")) {
    const Status s = status_from_name(run[0].get<std::string>());
    const std::size_t len = run[1].get<std::size_t>();
    if (i + len > n) throw IoError("curvature sidecar: status runs exceed volume");
    std::fill(out.status.begin() + i, out.status.begin() + i + len, s);
    i += len;
  }
  if (i != n) throw IoError("curvature sidecar: status runs do not cover volume");
  return out;
}

namespace {

// Collapse a 3-D field to a 2-D plane for rendering.
CurvatureField project_for_render(const CurvatureField& field, const RenderOptions& opts) {
  if (field.dim() == 2) return field;
  if (field.dim() != 3) throw IoError("render: only 2-D and 3-D fields supported");
  const int nx = field.grid.axes[0].samples, ny = field.grid.axes[1].samples,
            nz = field.grid.axes[2].samples;
  auto at = [&](int x, int y, int z) {
    return (static_cast<std::size_t>(z) * ny + y) * nx + x;
  };
  int axis;
  if (opts.slice_axis) {
    axis = *opts.slice_axis;
  } else if (opts.mip_axis) {
    axis = *opts.mip_axis;
  } else {
    throw IoError("render: 3-D field needs a slice or MIP axis");
  }
  if (axis < 0 || axis > 2) throw IoError("render: axis out of range");

  const int keep[2] = {axis == 0 ? 1 : 0, axis == 2 ? 1 : 2};
  CurvatureField plane;
  plane.grid.axes = {field.grid.axes[keep[0]], field.grid.axes[keep[1]]};
  const int pw = plane.grid.axes[0].samples, ph = plane.grid.axes[1].samples;
  plane.values.assign(static_cast<std::size_t>(pw) * ph, 0.0);
  plane.status.assign(plane.values.size(), Status::MaskedLowIntensity);

  const int span = field.grid.axes[axis].samples;
  for (int v = 0; v < ph; ++v)
    for (int u = 0; u < pw; ++u) {
      const std::size_t pi = static_cast<std::size_t>(v) * pw + u;
      auto src = [&](int s) {
        int c[3];
        c[axis] = s;
        c[keep[0]] = u;
        c[keep[1]] = v;
        return at(c[0], c[1], c[2]);
      };
      if (opts.slice_axis) {
        const int s = opts.slice_index.value_or(span / 2);
        if (s < 0 || s >= span) throw IoError("render: slice index out of range");
        const std::size_t si = src(s);
        plane.values[pi] = field.values[si];
        plane.status[pi] = field.status[si];
      } else {
        for (int s = 0; s < span; ++s) {
          const std::size_t si = src(s);
          if (field.status[si] == Status::Ok &&
              (plane.status[pi] != Status::Ok || field.values[si] > plane.values[pi])) {
            plane.values[pi] = field.values[si];
            plane.status[pi] = Status::Ok;
          }
        }
      }
    }
  return plane;
}

}  // namespace

void render_png(const CurvatureField& field, const std::string& path, const RenderOptions& opts) {
  const CurvatureField plane = project_for_render(field, opts);
  const int w = plane.grid.axes[0].samples, h = plane.grid.axes[1].samples;

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  std::size_t n_ok = 0;
  for (std::size_t i = 0; i < plane.size(); ++i)
    if (plane.status[i] == Status::Ok) {
      lo = std::min(lo, plane.values[i]);
      hi = std::max(hi, plane.values[i]);
      ++n_ok;
    }
  if (n_ok == 0) throw EmptyRender("render: every point is masked");

  std::vector<double> gray(plane.size(), 0.0);
  const bool flat = !(hi > lo);
  for (std::size_t i = 0; i < plane.size(); ++i)
    if (plane.status[i] == Status::Ok)
      gray[i] = flat ? 128.0 : 255.0 * (plane.values[i] - lo) / (hi - lo);

  if (opts.equalize && !flat) {
    constexpr int kBins = 256;
    std::array<std::size_t, kBins> hist{};
    auto bin_of = [&](double g) { return std::min(kBins - 1, static_cast<int>(g)); };
    for (std::size_t i = 0; i < plane.size(); ++i)
      if (plane.status[i] == Status::Ok) ++hist[bin_of(gray[i])];
    std::array<double, kBins> cdf{};
    std::size_t acc = 0;
    for (int b = 0; b < kBins; ++b) {
      acc += hist[b];
      cdf[b] = static_cast<double>(acc);
    }
    double cdf_min = 0.0;
    for (int b = 0; b < kBins; ++b)
      if (hist[b] > 0) {
        cdf_min = cdf[b];
        break;
      }
    const double denom = std::max<double>(1.0, static_cast<double>(n_ok) - cdf_min);
    for (std::size_t i = 0; i < plane.size(); ++i)
      if (plane.status[i] == Status::Ok)
        gray[i] = 255.0 * (cdf[bin_of(gray[i])] - cdf_min) / denom;
  }

  GrayImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(gray.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      img.at(y, x) = plane.status[i] == Status::Ok ? std::round(gray[i]) : 0.0;
    }
  write_gray_png(img, path);
}

namespace {

template <int N>
json field_to_json(const IntensityField<N>& f) {
  json j;
  j["dim"] = N;
  if (f.backend() == IntensityField<N>::Backend::AnalyticRing) {
    j["backend"] = "analytic_ring";
    j["ring"] = {{"r", f.ring_params().r}, {"m", f.ring_params().m}};
    return j;
  }
  j["backend"] = "gaussian_mixture";
  json centers = json::array(), scales = json::array();
  for (const auto& c : f.centers()) {
    json p = json::array();
    for (int d = 0; d < N; ++d) p.push_back(c(d));
    centers.push_back(std::move(p));
  }
  for (const auto& S : f.scales()) {
    json m = json::array();
    for (int r = 0; r < N; ++r) {
      json row = json::array();
      for (int c = 0; c < N; ++c) row.push_back(S(r, c));
      m.push_back(std::move(row));
    }
    scales.push_back(std::move(m));
  }
  j["centers"] = std::move(centers);
  j["weights"] = f.weights();
  j["scales"] = std::move(scales);
  if (f.knn_k()) j["knn_k"] = *f.knn_k();
  return j;
}

template <int N>
IntensityField<N> field_from_json(const json& j) {
  if (j.at("backend") == "analytic_ring") {
    if constexpr (N == 2)
      return IntensityField<2>::analytic_ring(j.at("ring").at("r").get<double>(),
                                              j.at("ring").at("m").get<double>());
    else
      throw IoError("field.json: analytic_ring is 2-D only");
  }
  std::vector<Vec<N>> centers;
  for (const auto& p : j.at("centers")) {
    Vec<N> c;
    for (int d = 0; d < N; ++d) c(d) = p.at(d).get<double>();
    centers.push_back(c);
  }
  std::vector<Mat<N>> scales;
  for (const auto& m : j.at("scales")) {
    Mat<N> S;
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) S(r, c) = m.at(r).at(c).get<double>();
    scales.push_back(S);
  }
  std::optional<int> k;
  if (j.contains("knn_k") && !j.at("knn_k").is_null()) k = j.at("knn_k").get<int>();
  return IntensityField<N>::gaussian_mixture(std::move(centers),
                                             j.at("weights").get<std::vector<double>>(),
                                             std::move(scales), k);
}

}  // namespace

void save_field_json(const FieldVariant& field, const std::string& path) {
  const json j = std::visit([](const auto& f) { return field_to_json(f); }, field);
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw IoError("cannot write " + path);
}

FieldVariant load_field_json(const std::string& path) {
  json j;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    in >> j;
    if (j.at("dim").get<int>() == 2) return field_from_json<2>(j);
    if (j.at("dim").get<int>() == 3) return field_from_json<3>(j);
  } catch (const json::exception& e) {
    throw IoError("field.json parse error: " + std::string(e.what()));
  }
  throw IoError("field.json: dim must be 2 or 3");
}

}  // namespace tcf
