#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossmask/geometry.hpp"
#include "crossmask/grid.hpp"
#include "crossmask/multi_category.hpp"
#include "crossmask/pseudo_mask.hpp"

namespace crossmask::io {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Files

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temp file and renames it over the target.
inline void write_file_atomic(const fs::path& path, std::string_view bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::IoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::IoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "rename to " + path.string() + ": " + ec.message());
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    fail(ErrorKind::SchemaError, path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Annotation documents

struct CrossEntry {
  int category = 1;
  Segment seg_ab;
  Segment seg_cd;
  std::optional<double> direction_deg;

  CrossScribble build() const { return build_cross(seg_ab, seg_cd, direction_deg); }
};

/// One image's scribbles: a cross per foreground target and an optional
/// background segment.
struct AnnotationDoc {
  std::string image;
  std::size_t width = 0;
  std::size_t height = 0;
  bool multi_instance = false;
  std::vector<CrossEntry> entries;
  std::optional<Segment> background;
};

namespace detail {
inline json point_json(Point2 p) { return json::array({p.x, p.y}); }
inline json segment_json(const Segment& s) { return json::array({point_json(s.a), point_json(s.b)}); }

inline Point2 parse_point(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
    fail(ErrorKind::SchemaError, where + ": point must be [x, y]");
  }
  return {j[0].get<double>(), j[1].get<double>()};
}

inline Segment parse_segment(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) fail(ErrorKind::SchemaError, where + ": segment must be [[x,y],[x,y]]");
  return {parse_point(j[0], where), parse_point(j[1], where)};
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) fail(ErrorKind::SchemaError, where + ": missing field '" + key + "'");
  return j[key];
}

inline void check_bounds(const Segment& s, const AnnotationDoc& doc, const std::string& where) {
  for (Point2 p : {s.a, s.b}) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || p.x < 0.0 || p.y < 0.0 ||
        p.x > static_cast<double>(doc.width) || p.y > static_cast<double>(doc.height)) {
      fail(ErrorKind::BoundsError, where + ": endpoint (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                       ") outside [0," + std::to_string(doc.width) + "]x[0," +
                                       std::to_string(doc.height) + "]");
    }
  }
}
}  // namespace detail

inline json to_json(const AnnotationDoc& doc) {
  json entries = json::array();
  for (const auto& e : doc.entries) {
    json entry = {{"category", e.category},
                  {"cross", {{"seg_ab", detail::segment_json(e.seg_ab)}, {"seg_cd", detail::segment_json(e.seg_cd)}}}};
    if (e.direction_deg) entry["direction_deg"] = *e.direction_deg;
    entries.push_back(std::move(entry));
  }
  json j = {{"schema_version", kSchemaVersion},
            {"image", doc.image},
            {"width", doc.width},
            {"height", doc.height},
            {"entries", std::move(entries)}};
  if (doc.multi_instance) j["multi_instance"] = true;
  if (doc.background) j["background"] = {{"seg", detail::segment_json(*doc.background)}};
  return j;
}

/// Checks bounds, category uniqueness and cross geometry. Geometry failures
/// are rethrown as GeometryError naming the entry.
inline void validate(const AnnotationDoc& doc) {
  if (doc.width == 0 || doc.height == 0) fail(ErrorKind::SchemaError, "width and height must be >= 1");
  std::set<int> seen;
  for (std::size_t i = 0; i < doc.entries.size(); ++i) {
    const auto& e = doc.entries[i];
    const std::string where = "entries[" + std::to_string(i) + "]";
    if (e.category < 1 || e.category > 255) fail(ErrorKind::SchemaError, where + ": category must be in [1, 255]");
    if (!doc.multi_instance && !seen.insert(e.category).second) {
      fail(ErrorKind::SchemaError, where + ": category " + std::to_string(e.category) + " repeated");
    }
    detail::check_bounds(e.seg_ab, doc, where);
    detail::check_bounds(e.seg_cd, doc, where);
    try {
      (void)e.build();
    } catch (const Error& err) {
      fail(ErrorKind::GeometryError, where + ": " + err.what());
    }
  }
  if (doc.background) {
    detail::check_bounds(*doc.background, doc, "background");
    if (!(doc.background->length() > 0.0)) fail(ErrorKind::GeometryError, "background: zero-length segment");
  }
}

inline AnnotationDoc annotation_from_json(const json& j) {
  using detail::require;
  const std::string root = "annotation";
  const json& version = require(j, "schema_version", root);
  if (!version.is_number_integer() || version.get<int>() != kSchemaVersion) {
    fail(ErrorKind::SchemaError, "unsupported schema_version");
  }
  AnnotationDoc doc;
  const json& image = require(j, "image", root);
  const json& width = require(j, "width", root);
  const json& height = require(j, "height", root);
  if (!image.is_string()) fail(ErrorKind::SchemaError, "image must be a string");
  if (!width.is_number_unsigned() || !height.is_number_unsigned()) {
    fail(ErrorKind::SchemaError, "width and height must be positive integers");
  }
  doc.image = image.get<std::string>();
  doc.width = width.get<std::size_t>();
  doc.height = height.get<std::size_t>();
  if (j.contains("multi_instance")) {
    if (!j["multi_instance"].is_boolean()) fail(ErrorKind::SchemaError, "multi_instance must be a boolean");
    doc.multi_instance = j["multi_instance"].get<bool>();
  }
  const json& entries = require(j, "entries", root);
  if (!entries.is_array()) fail(ErrorKind::SchemaError, "entries must be an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string where = "entries[" + std::to_string(i) + "]";
    const json& e = entries[i];
    const json& cat = require(e, "category", where);
    if (!cat.is_number_integer()) fail(ErrorKind::SchemaError, where + ": category must be an integer");
    const json& cross = require(e, "cross", where);
    CrossEntry entry;
    entry.category = cat.get<int>();
    entry.seg_ab = detail::parse_segment(require(cross, "seg_ab", where), where + ".seg_ab");
    entry.seg_cd = detail::parse_segment(require(cross, "seg_cd", where), where + ".seg_cd");
    if (e.contains("direction_deg") && !e["direction_deg"].is_null()) {
      if (!e["direction_deg"].is_number()) fail(ErrorKind::SchemaError, where + ": direction_deg must be a number");
      entry.direction_deg = e["direction_deg"].get<double>();
    }
    doc.entries.push_back(entry);
  }
  if (j.contains("background") && !j["background"].is_null()) {
    doc.background = detail::parse_segment(require(j["background"], "seg", "background"), "background.seg");
  }
  validate(doc);
  return doc;
}

inline AnnotationDoc load_annotation(const fs::path& path) { return annotation_from_json(read_json(path)); }

inline void save_annotation(const AnnotationDoc& doc, const fs::path& path) {
  validate(doc);
  write_json(path, to_json(doc));
}

/// Sorted list of *.json annotation files directly inside `dir`.
inline std::vector<fs::path> list_files(const fs::path& dir, std::string_view extension) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == extension) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// PNG

struct PngInfo {
  std::size_t width = 0;
  std::size_t height = 0;
  int bit_depth = 0;
  int color_type = 0;
};

namespace detail {
struct PngReadBuffer {
  std::string_view bytes;
  std::size_t offset = 0;
};

inline void png_error_fn(png_structp png, png_const_charp msg) {
  auto* text = static_cast<std::string*>(png_get_error_ptr(png));
  if (text) *text = msg;
  png_longjmp(png, 1);
}
inline void png_warning_fn(png_structp, png_const_charp) {}

inline void png_read_fn(png_structp png, png_bytep out, png_size_t len) {
  auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
  if (buf->offset + len > buf->bytes.size()) png_error(png, "truncated PNG");
  std::memcpy(out, buf->bytes.data() + buf->offset, len);
  buf->offset += len;
}

inline void png_write_fn(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), len);
}
inline void png_flush_fn(png_structp) {}
}  // namespace detail

/// Encodes an 8-bit grayscale PNG in memory. Output is deterministic for a
/// given pixel buffer.
inline std::string encode_png_gray8(std::span<const std::uint8_t> pixels, std::size_t width, std::size_t height) {
  if (pixels.size() != width * height) fail(ErrorKind::DimensionMismatch, "pixel buffer size");
  std::string out;
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_fn,
                                            detail::png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::IoError, "png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::IoError, "png encode: " + error);
  }
  png_set_write_fn(png, &out, detail::png_write_fn, detail::png_flush_fn);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (std::size_t r = 0; r < height; ++r) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + r * width));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

inline PngInfo png_info(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    fail(ErrorKind::IoError, "not a PNG file");
  }
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_fn,
                                           detail::png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::IoError, "png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::IoError, "png header: " + error);
  }
  detail::PngReadBuffer buf{bytes, 0};
  png_set_read_fn(png, &buf, detail::png_read_fn);
  png_read_info(png, info);
  PngInfo out{png_get_image_width(png, info), png_get_image_height(png, info), png_get_bit_depth(png, info),
              png_get_color_type(png, info)};
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

/// Decodes an 8-bit single-channel PNG.
inline Grid<std::uint8_t> decode_png_gray8(std::string_view bytes) {
  const PngInfo hdr = png_info(bytes);
  if (hdr.bit_depth != 8 || hdr.color_type != PNG_COLOR_TYPE_GRAY) {
    fail(ErrorKind::UnsupportedBitDepth, "expected 8-bit grayscale PNG (depth " + std::to_string(hdr.bit_depth) +
                                             ", color type " + std::to_string(hdr.color_type) + ")");
  }
  Grid<std::uint8_t> out(hdr.width, hdr.height, 0);
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, detail::png_error_fn,
                                           detail::png_warning_fn);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::IoError, "png: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::IoError, "png decode: " + error);
  }
  detail::PngReadBuffer buf{bytes, 0};
  png_set_read_fn(png, &buf, detail::png_read_fn);
  png_read_info(png, info);
  for (std::size_t r = 0; r < hdr.height; ++r) png_read_row(png, &out(r, 0), nullptr);
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

inline std::uint8_t quantize(double w) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(w, 0.0, 1.0) * 255.0));
}

/// Soft or binary mask as 8-bit grayscale: v = round(255 w).
inline std::string encode_mask_png(const MaskGrid& mask) {
  std::vector<std::uint8_t> px(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) px[i] = quantize(mask[i]);
  return encode_png_gray8(px, mask.width(), mask.height());
}

/// Label map with raw category indices as pixel values.
inline std::string encode_label_png(const LabelMap& labels) {
  return encode_png_gray8(labels.values(), labels.width(), labels.height());
}

inline void write_mask(const MaskGrid& mask, const fs::path& path) { write_file_atomic(path, encode_mask_png(mask)); }
inline void write_mask(const LabelMap& labels, const fs::path& path) {
  write_file_atomic(path, encode_label_png(labels));
}

/// Inverse of the mask quantization: w = v / 255.
inline MaskGrid read_mask(const fs::path& path) {
  const auto raw = decode_png_gray8(read_file(path));
  MaskGrid out(raw.width(), raw.height());
  for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<double>(raw[i]) / 255.0;
  return out;
}

inline LabelMap read_label_map(const fs::path& path) { return decode_png_gray8(read_file(path)); }

/// Grayscale image as intensities in [0, 1].
inline MaskGrid read_image(const fs::path& path) { return read_mask(path); }

// ---------------------------------------------------------------------------
// Raw float masks: 8-byte header ("CMSK", uint16 LE height, uint16 LE width)
// followed by H*W little-endian IEEE-754 float32 values in row-major order.

inline constexpr std::array<char, 4> kFloatMagic{'C', 'M', 'S', 'K'};

inline std::string encode_float_mask(const MaskGrid& mask) {
  if (mask.width() > 0xFFFF || mask.height() > 0xFFFF) fail(ErrorKind::InvalidArgument, "mask too large");
  std::string out(kFloatMagic.begin(), kFloatMagic.end());
  auto put16 = [&](std::size_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
  };
  put16(mask.height());
  put16(mask.width());
  for (double w : mask) {
    std::uint32_t bits = 0;
    const float f = static_cast<float>(w);
    std::memcpy(&bits, &f, sizeof(bits));
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
  return out;
}

inline MaskGrid decode_float_mask(std::string_view bytes) {
  if (bytes.size() < 8 || !std::equal(kFloatMagic.begin(), kFloatMagic.end(), bytes.begin())) {
    fail(ErrorKind::IoError, "not a float mask stream");
  }
  auto byte = [&](std::size_t i) { return static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i])); };
  const std::size_t height = byte(4) | (byte(5) << 8);
  const std::size_t width = byte(6) | (byte(7) << 8);
  if (bytes.size() != 8 + 4 * width * height) fail(ErrorKind::IoError, "float mask stream has the wrong length");
  MaskGrid out(width, height);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t at = 8 + 4 * i;
    const std::uint32_t bits = byte(at) | (byte(at + 1) << 8) | (byte(at + 2) << 16) | (byte(at + 3) << 24);
    float f = 0.0f;
    std::memcpy(&f, &bits, sizeof(f));
    out[i] = f;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifests

enum class Split { Train, Val, Test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

struct ManifestItem {
  std::string image;
  std::string annotation;
  std::optional<std::string> gt_mask;
  Split split = Split::Train;
};

/// Refs are relative to the manifest's directory.
struct DatasetManifest {
  fs::path base_dir;
  std::vector<ManifestItem> items;

  fs::path resolve(const std::string& ref) const { return base_dir / ref; }
};

inline json to_json(const DatasetManifest& m) {
  json items = json::array();
  for (const auto& it : m.items) {
    json j = {{"image", it.image}, {"annotation", it.annotation}, {"split", std::string(to_string(it.split))}};
    if (it.gt_mask) j["gt_mask"] = *it.gt_mask;
    items.push_back(std::move(j));
  }
  return {{"items", std::move(items)}};
}

inline DatasetManifest load_manifest(const fs::path& path) {
  const json j = read_json(path);
  DatasetManifest m;
  m.base_dir = path.parent_path();
  const json& items = detail::require(j, "items", "manifest");
  if (!items.is_array()) fail(ErrorKind::SchemaError, "manifest items must be an array");
  std::set<std::string> images;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const std::string where = "items[" + std::to_string(i) + "]";
    const json& it = items[i];
    ManifestItem item;
    const json& image = detail::require(it, "image", where);
    const json& annotation = detail::require(it, "annotation", where);
    if (!image.is_string() || !annotation.is_string()) fail(ErrorKind::SchemaError, where + ": refs must be strings");
    item.image = image.get<std::string>();
    item.annotation = annotation.get<std::string>();
    if (it.contains("gt_mask") && !it["gt_mask"].is_null()) item.gt_mask = it["gt_mask"].get<std::string>();
    if (it.contains("split")) {
      const auto split = it["split"].get<std::string>();
      if (split == "train") item.split = Split::Train;
      else if (split == "val") item.split = Split::Val;
      else if (split == "test") item.split = Split::Test;
      else fail(ErrorKind::SchemaError, where + ": unknown split '" + split + "'");
    }
    if (!images.insert(item.image).second) fail(ErrorKind::SchemaError, where + ": duplicate image " + item.image);
    if (!fs::exists(m.resolve(item.annotation))) {
      fail(ErrorKind::IoError, where + ": annotation " + item.annotation + " not found");
    }
    m.items.push_back(std::move(item));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Pseudo masks from documents

struct MaskOptions {
  SigmaSpec sigma = SigmaSpec::infinite();
  MaskOp op = MaskOp::Multiply;
  double shrink = 0.0;
};

/// One pseudo mask per entry, in entry order.
inline std::vector<CategoryMask> pseudo_masks(const AnnotationDoc& doc, const MaskOptions& opt) {
  std::vector<CategoryMask> out;
  for (const auto& e : doc.entries) {
    const CrossScribble cross = shrink_cross(e.build(), opt.shrink);
    out.push_back({CategoryId(e.category), rasterize_pseudo_mask(cross, opt.sigma, opt.op, doc.width, doc.height)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Annotation statistics

/// 1-pixel-wide Bresenham rasterization of a segment, endpoints mapped to
/// the pixels containing them and clipped to the grid.
inline void draw_segment(BinaryMask& canvas, const Segment& s) {
  auto to_px = [](double v, std::size_t n) {
    return std::clamp(static_cast<long>(std::floor(v)), 0L, static_cast<long>(n) - 1);
  };
  long x0 = to_px(s.a.x, canvas.width()), y0 = to_px(s.a.y, canvas.height());
  const long x1 = to_px(s.b.x, canvas.width()), y1 = to_px(s.b.y, canvas.height());
  const long dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const long sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  long err = dx + dy;
  while (true) {
    canvas(static_cast<std::size_t>(y0), static_cast<std::size_t>(x0)) = 1;
    if (x0 == x1 && y0 == y1) break;
    const long e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

inline constexpr std::size_t kHistogramBins = 100;

struct ImageStats {
  std::string image;
  double fg_rate = 0.0;
  double bg_rate = 0.0;
  std::size_t fg_scribble_px = 0;
  std::size_t fg_area_px = 0;
  std::size_t bg_scribble_px = 0;
  std::size_t bg_area_px = 0;
  std::optional<double> coverage;
  std::size_t gt_px = 0;
  std::size_t covered_px = 0;
};

struct StatsReport {
  std::vector<ImageStats> per_image;
  double mean_fg_rate = 0.0;
  double mean_bg_rate = 0.0;
  double pooled_fg_rate = 0.0;
  double pooled_bg_rate = 0.0;
  std::optional<double> mean_coverage;
  std::optional<double> pooled_coverage;
  std::vector<std::size_t> coverage_histogram;
  std::string fg_area_source;
};

/// Ground-truth pixels for one category: label == category, or any non-zero
/// label when the document has a single category.
inline BinaryMask gt_for_category(const LabelMap& gt, int category, bool single_category) {
  BinaryMask out(gt.width(), gt.height(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    out[i] = (single_category ? gt[i] != 0 : gt[i] == category) ? 1 : 0;
  }
  return out;
}

struct StatsInput {
  AnnotationDoc doc;
  std::optional<LabelMap> gt;
};

/// Annotated-rate and pseudo-mask coverage statistics.
///
/// Foreground rate: scribble pixels of all crosses over the foreground area
/// (ground truth when available, else the union of the pseudo masks).
/// Background rate: background scribble pixels over the remaining pixels.
/// Coverage: ground-truth foreground pixels inside the pseudo masks over
/// all ground-truth foreground pixels.
inline StatsReport annotation_stats(std::span<const StatsInput> inputs, bool require_gt, const MaskOptions& opt = {}) {
  StatsReport report;
  report.coverage_histogram.assign(kHistogramBins, 0);
  const bool have_gt = !inputs.empty() && std::all_of(inputs.begin(), inputs.end(), [](const StatsInput& in) {
    return in.gt.has_value();
  });
  if (require_gt && !have_gt) fail(ErrorKind::MissingGt, "coverage statistics need a ground-truth mask per image");
  report.fg_area_source = have_gt ? "ground_truth" : "pseudo_mask";

  std::size_t fg_scr = 0, fg_area = 0, bg_scr = 0, bg_area = 0, gt_total = 0, cov_total = 0;
  for (const auto& in : inputs) {
    const AnnotationDoc& doc = in.doc;
    ImageStats st;
    st.image = doc.image;
    BinaryMask scribbles(doc.width, doc.height, 0);
    for (const auto& e : doc.entries) {
      draw_segment(scribbles, e.seg_ab);
      draw_segment(scribbles, e.seg_cd);
    }
    BinaryMask pseudo_union(doc.width, doc.height, 0);
    for (const auto& cm : pseudo_masks(doc, opt)) {
      for (std::size_t i = 0; i < cm.mask.size(); ++i) pseudo_union[i] |= cm.mask[i] > 0.0 ? 1 : 0;
    }
    BinaryMask fg(doc.width, doc.height, 0);
    if (have_gt) {
      require_same_shape(scribbles, *in.gt, doc.image.c_str());
      fg = gt_for_category(*in.gt, 0, true);
    } else {
      fg = pseudo_union;
    }
    st.fg_scribble_px = count_positive(scribbles);
    st.fg_area_px = count_positive(fg);
    st.bg_area_px = fg.size() - st.fg_area_px;
    if (doc.background) {
      BinaryMask bg(doc.width, doc.height, 0);
      draw_segment(bg, *doc.background);
      st.bg_scribble_px = count_positive(bg);
    }
    st.fg_rate = st.fg_area_px ? static_cast<double>(st.fg_scribble_px) / static_cast<double>(st.fg_area_px) : 0.0;
    st.bg_rate = st.bg_area_px ? static_cast<double>(st.bg_scribble_px) / static_cast<double>(st.bg_area_px) : 0.0;
    if (have_gt) {
      for (std::size_t i = 0; i < fg.size(); ++i) {
        if (fg[i]) {
          ++st.gt_px;
          st.covered_px += pseudo_union[i] ? 1 : 0;
        }
      }
      if (st.gt_px > 0) {
        const double cov = static_cast<double>(st.covered_px) / static_cast<double>(st.gt_px);
        st.coverage = cov;
        const auto bin = std::min(kHistogramBins - 1, static_cast<std::size_t>(std::floor(cov * kHistogramBins)));
        ++report.coverage_histogram[bin];
      }
    }
    fg_scr += st.fg_scribble_px;
    fg_area += st.fg_area_px;
    bg_scr += st.bg_scribble_px;
    bg_area += st.bg_area_px;
    gt_total += st.gt_px;
    cov_total += st.covered_px;
    report.per_image.push_back(std::move(st));
  }
  std::sort(report.per_image.begin(), report.per_image.end(),
            [](const ImageStats& a, const ImageStats& b) { return a.image < b.image; });

  const double n = static_cast<double>(report.per_image.size());
  if (n > 0) {
    double fg_sum = 0.0, bg_sum = 0.0, cov_sum = 0.0;
    std::size_t cov_n = 0;
    for (const auto& st : report.per_image) {
      fg_sum += st.fg_rate;
      bg_sum += st.bg_rate;
      if (st.coverage) {
        cov_sum += *st.coverage;
        ++cov_n;
      }
    }
    report.mean_fg_rate = fg_sum / n;
    report.mean_bg_rate = bg_sum / n;
    if (cov_n > 0) report.mean_coverage = cov_sum / static_cast<double>(cov_n);
  }
  report.pooled_fg_rate = fg_area ? static_cast<double>(fg_scr) / static_cast<double>(fg_area) : 0.0;
  report.pooled_bg_rate = bg_area ? static_cast<double>(bg_scr) / static_cast<double>(bg_area) : 0.0;
  if (have_gt && gt_total > 0) report.pooled_coverage = static_cast<double>(cov_total) / static_cast<double>(gt_total);
  return report;
}

inline json to_json(const StatsReport& r) {
  json per_image = json::array();
  for (const auto& st : r.per_image) {
    json j = {{"image", st.image},
              {"fg_rate", st.fg_rate},
              {"bg_rate", st.bg_rate},
              {"fg_scribble_px", st.fg_scribble_px},
              {"fg_area_px", st.fg_area_px},
              {"bg_scribble_px", st.bg_scribble_px},
              {"bg_area_px", st.bg_area_px}};
    if (st.coverage) j["coverage"] = *st.coverage;
    per_image.push_back(std::move(j));
  }
  json j = {{"per_image", std::move(per_image)},
            {"count", r.per_image.size()},
            {"fg_area_source", r.fg_area_source},
            {"mean_fg_rate", r.mean_fg_rate},
            {"mean_bg_rate", r.mean_bg_rate},
            {"pooled_fg_rate", r.pooled_fg_rate},
            {"pooled_bg_rate", r.pooled_bg_rate}};
  if (r.mean_coverage) {
    j["mean_coverage"] = *r.mean_coverage;
    j["pooled_coverage"] = r.pooled_coverage.value_or(0.0);
    j["coverage_histogram"] = {{"bin_width", 1.0 / kHistogramBins}, {"counts", r.coverage_histogram}};
  }
  return j;
}

}  // namespace crossmask::io
