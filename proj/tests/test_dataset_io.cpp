#include <algorithm>
#include <fstream>

#include <gtest/gtest.h>
#include <png.h>

#include "crossmask/dataset_io.hpp"
#include "support.hpp"

using namespace crossmask;
using namespace crossmask::io;
using testing_support::Rng;
using testing_support::TempDir;
using nlohmann::json;

namespace {

ErrorKind kind_of(auto fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::InvalidArgument;
}

AnnotationDoc random_doc(Rng& rng) {
  AnnotationDoc doc;
  doc.width = rng.integer(40, 128);
  doc.height = rng.integer(40, 128);
  doc.image = "img_" + std::to_string(rng.integer(0, 99999)) + ".png";
  const int n = rng.integer(0, 3);
  for (int k = 0; k < n; ++k) {
    const Point2 c{rng.uniform(15, doc.width - 15.0), rng.uniform(15, doc.height - 15.0)};
    const auto cross = testing_support::random_cross(rng, c, 3.0, 12.0);
    CrossEntry e;
    e.category = k + 1 + rng.integer(0, 50) * 3;
    e.seg_ab = cross.seg_ab;
    e.seg_cd = cross.seg_cd;
    if (rng.coin(0.3)) e.direction_deg = rng.uniform(-180, 180);
    doc.entries.push_back(e);
  }
  if (rng.coin(0.5)) doc.background = Segment{{1.0, 1.0}, {rng.uniform(2, 20), rng.uniform(2, 20)}};
  return doc;
}

AnnotationDoc simple_doc() {
  AnnotationDoc doc;
  doc.image = "a.png";
  doc.width = 20;
  doc.height = 20;
  doc.entries.push_back({1, {{10.5, 2.5}, {10.5, 18.5}}, {{2.5, 10.5}, {18.5, 10.5}}, std::nullopt});
  return doc;
}

/// PNG with an arbitrary depth and colour type, for the rejection paths.
std::string encode_raw_png(std::size_t w, std::size_t h, int depth, int color_type, int channels) {
  std::string out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  png_set_write_fn(
      png, &out,
      [](png_structp p, png_bytep data, png_size_t len) {
        static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
      },
      [](png_structp) {});
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(w * channels * (depth / 8), 0x7F);
  for (std::size_t r = 0; r < h; ++r) png_write_row(png, row.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

TEST(Annotation, RandomRoundTrip) {
  Rng rng(91);
  TempDir dir("annotations");
  for (int n = 0; n < 100; ++n) {
    const AnnotationDoc doc = random_doc(rng);
    const auto path = dir / ("doc" + std::to_string(n) + ".json");
    save_annotation(doc, path);
    const AnnotationDoc back = load_annotation(path);
    EXPECT_EQ(to_json(back), to_json(doc));
    EXPECT_EQ(back.entries.size(), doc.entries.size());
  }
}

TEST(Annotation, ParsesDocumentedShape) {
  const auto j = json::parse(R"({
    "schema_version": 1, "image": "x.png", "width": 64, "height": 48,
    "entries": [{"category": 2, "cross": {"seg_ab": [[30, 5], [30, 40]], "seg_cd": [[10, 20], [50, 20]]},
                 "direction_deg": null}],
    "background": {"seg": [[1, 1], [5, 1]]}
  })");
  const AnnotationDoc doc = annotation_from_json(j);
  EXPECT_EQ(doc.width, 64u);
  ASSERT_EQ(doc.entries.size(), 1u);
  EXPECT_EQ(doc.entries[0].category, 2);
  EXPECT_FALSE(doc.entries[0].direction_deg);
  EXPECT_EQ(doc.entries[0].seg_cd.b.x, 50.0);
  ASSERT_TRUE(doc.background);
  EXPECT_FALSE(doc.multi_instance);
}

TEST(Annotation, Errors) {
  auto with = [](auto edit) {
    AnnotationDoc doc = simple_doc();
    edit(doc);
    return [doc] { validate(doc); };
  };
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.entries[0].seg_ab.b.y = 20.5; })), ErrorKind::BoundsError);
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.entries[0].seg_cd.a.x = -0.1; })), ErrorKind::BoundsError);
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.entries[0].seg_cd = {{2.5, 2.6}, {18.5, 2.6}}; })),
            ErrorKind::GeometryError);
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.entries[0].seg_cd = {{11.5, 2.5}, {11.5, 18.5}}; })),
            ErrorKind::GeometryError);
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.entries[0].category = 0; })), ErrorKind::SchemaError);
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.entries.push_back(d.entries[0]); })), ErrorKind::SchemaError);
  EXPECT_NO_THROW(with([](AnnotationDoc& d) {
    d.multi_instance = true;
    d.entries.push_back(d.entries[0]);
  })());
  EXPECT_EQ(kind_of(with([](AnnotationDoc& d) { d.background = Segment{{3, 3}, {3, 3}}; })),
            ErrorKind::GeometryError);

  const json good = to_json(simple_doc());
  auto parse_without = [&](const char* key) {
    json j = good;
    j.erase(key);
    return [j] { annotation_from_json(j); };
  };
  for (const char* key : {"schema_version", "image", "width", "height", "entries"}) {
    EXPECT_EQ(kind_of(parse_without(key)), ErrorKind::SchemaError) << key;
  }
  json bad_version = good;
  bad_version["schema_version"] = 2;
  EXPECT_EQ(kind_of([&] { annotation_from_json(bad_version); }), ErrorKind::SchemaError);
  json bad_point = good;
  bad_point["entries"][0]["cross"]["seg_ab"][0] = json::array({1});
  EXPECT_EQ(kind_of([&] { annotation_from_json(bad_point); }), ErrorKind::SchemaError);
  json bad_width = good;
  bad_width["width"] = -4;
  EXPECT_EQ(kind_of([&] { annotation_from_json(bad_width); }), ErrorKind::SchemaError);
}

TEST(Png, BinaryRoundTrip) {
  Rng rng(92);
  TempDir dir("png");
  const MaskGrid m = testing_support::random_binary(rng, 17, 9, 0.4);
  write_mask(m, dir / "m.png");
  EXPECT_EQ(read_mask(dir / "m.png"), m);
  const auto raw = decode_png_gray8(read_file(dir / "m.png"));
  for (auto v : raw) EXPECT_TRUE(v == 0 || v == 255);
}

TEST(Png, SoftRoundTripWithinHalfStep) {
  Rng rng(93);
  TempDir dir("png");
  MaskGrid m(31, 12);
  for (double& v : m) v = rng.uniform(0, 1);
  write_mask(m, dir / "soft.png");
  const MaskGrid back = read_mask(dir / "soft.png");
  ASSERT_EQ(back.width(), 31u);
  ASSERT_EQ(back.height(), 12u);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_LE(std::abs(back[i] - m[i]), 1.0 / 510.0 + 1e-12);
}

TEST(Png, LabelRoundTrip) {
  Rng rng(94);
  TempDir dir("png");
  LabelMap labels(13, 7, 0);
  for (auto& v : labels) v = static_cast<std::uint8_t>(rng.integer(0, 255));
  write_mask(labels, dir / "labels.png");
  EXPECT_EQ(read_label_map(dir / "labels.png"), labels);
}

TEST(Png, RejectsOtherFormats) {
  EXPECT_EQ(kind_of([] { decode_png_gray8(encode_raw_png(4, 3, 16, PNG_COLOR_TYPE_GRAY, 1)); }),
            ErrorKind::UnsupportedBitDepth);
  EXPECT_EQ(kind_of([] { decode_png_gray8(encode_raw_png(4, 3, 8, PNG_COLOR_TYPE_RGB, 3)); }),
            ErrorKind::UnsupportedBitDepth);
  EXPECT_THROW(decode_png_gray8("not a png"), Error);
  const std::string good = encode_raw_png(4, 3, 8, PNG_COLOR_TYPE_GRAY, 1);
  EXPECT_THROW(decode_png_gray8(good.substr(0, good.size() / 2)), Error);
}

TEST(FloatMask, RoundTripAndHeader) {
  Rng rng(95);
  MaskGrid m(300, 2);
  for (double& v : m) v = static_cast<float>(rng.uniform(0, 1));
  const std::string bytes = encode_float_mask(m);
  ASSERT_EQ(bytes.size(), 8 + 4 * m.size());
  EXPECT_EQ(bytes.substr(0, 4), "CMSK");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 2);    // height, low byte
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 44);   // 300 & 0xFF
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 1);    // 300 >> 8
  EXPECT_EQ(decode_float_mask(bytes), m);
  EXPECT_THROW(decode_float_mask(bytes.substr(0, 20)), Error);
  EXPECT_THROW(decode_float_mask("XXXX" + bytes.substr(4)), Error);
}

TEST(Manifest, LoadResolveAndErrors) {
  TempDir dir("manifest");
  save_annotation(simple_doc(), dir / "ann" / "a.json");
  DatasetManifest m;
  m.base_dir = dir.path();
  m.items.push_back({"img/a.png", "ann/a.json", "gt/a.png", Split::Test});
  write_json(dir / "manifest.json", to_json(m));
  const DatasetManifest back = load_manifest(dir / "manifest.json");
  ASSERT_EQ(back.items.size(), 1u);
  EXPECT_EQ(back.items[0].split, Split::Test);
  EXPECT_EQ(*back.items[0].gt_mask, "gt/a.png");
  EXPECT_EQ(back.resolve("ann/a.json"), dir / "ann" / "a.json");

  write_json(dir / "dup.json", json::parse(R"({"items": [{"image": "x", "annotation": "ann/a.json"},
                                                         {"image": "x", "annotation": "ann/a.json"}]})"));
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "dup.json"); }), ErrorKind::SchemaError);
  write_json(dir / "missing.json", json::parse(R"({"items": [{"image": "x", "annotation": "nope.json"}]})"));
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "missing.json"); }), ErrorKind::IoError);
  write_json(dir / "split.json", json::parse(R"({"items": [{"image": "x", "annotation": "ann/a.json", "split": "dev"}]})"));
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "split.json"); }), ErrorKind::SchemaError);
}

TEST(AtomicWrite, ReplacesWithoutLeavingTemp) {
  TempDir dir("atomic");
  const auto path = dir / "sub" / "f.txt";
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_file(path), "second");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir / "sub")) ++files;
  EXPECT_EQ(files, 1u);
  EXPECT_EQ(kind_of([&] { read_file(dir / "absent"); }), ErrorKind::IoError);
}

TEST(DrawSegment, PixelCountAndEndpoints) {
  Rng rng(96);
  for (int n = 0; n < 500; ++n) {
    BinaryMask canvas(40, 30, 0);
    const Segment s{{rng.uniform(0, 40), rng.uniform(0, 30)}, {rng.uniform(0, 40), rng.uniform(0, 30)}};
    draw_segment(canvas, s);
    const long x0 = std::min(39L, long(s.a.x)), y0 = std::min(29L, long(s.a.y));
    const long x1 = std::min(39L, long(s.b.x)), y1 = std::min(29L, long(s.b.y));
    EXPECT_EQ(count_positive(canvas), std::size_t(std::max(std::abs(x1 - x0), std::abs(y1 - y0)) + 1));
    EXPECT_TRUE(canvas(y0, x0));
    EXPECT_TRUE(canvas(y1, x1));
  }
}

TEST(Stats, HandComputedCross) {
  AnnotationDoc doc = simple_doc();
  doc.background = Segment{{0.5, 0.5}, {5.5, 0.5}};
  // Ground truth: rows and columns 2..18.
  LabelMap gt(20, 20, 0);
  for (std::size_t r = 2; r <= 18; ++r) {
    for (std::size_t c = 2; c <= 18; ++c) gt(r, c) = 1;
  }
  const std::vector<StatsInput> in{{doc, gt}};
  const StatsReport rep = annotation_stats(in, true);
  ASSERT_EQ(rep.per_image.size(), 1u);
  const ImageStats& st = rep.per_image[0];
  // Two 17-pixel strokes sharing one pixel.
  EXPECT_EQ(st.fg_scribble_px, 33u);
  EXPECT_EQ(st.fg_area_px, 289u);
  EXPECT_DOUBLE_EQ(st.fg_rate, 33.0 / 289.0);
  EXPECT_EQ(st.bg_scribble_px, 6u);
  EXPECT_DOUBLE_EQ(st.bg_rate, 6.0 / 111.0);
  // The pseudo mask is the 17x17 square spanned by the arm tips, which is
  // exactly the truth.
  EXPECT_EQ(st.covered_px, 289u);
  EXPECT_DOUBLE_EQ(*st.coverage, 1.0);
  EXPECT_EQ(rep.fg_area_source, "ground_truth");
  EXPECT_EQ(rep.coverage_histogram[99], 1u);
}

TEST(Stats, CoverageIsFullWhenTruthIsThePseudoMask) {
  Rng rng(97);
  std::vector<StatsInput> in;
  for (int n = 0; n < 10; ++n) {
    AnnotationDoc doc = random_doc(rng);
    if (doc.entries.empty()) continue;
    LabelMap gt(doc.width, doc.height, 0);
    for (const auto& cm : pseudo_masks(doc, {})) {
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] |= cm.mask[i] > 0 ? 1 : 0;
    }
    in.push_back({doc, gt});
  }
  const StatsReport rep = annotation_stats(in, true);
  for (const auto& st : rep.per_image) EXPECT_EQ(*st.coverage, 1.0);
  EXPECT_EQ(*rep.pooled_coverage, 1.0);
  EXPECT_EQ(rep.coverage_histogram[99], in.size());
}

TEST(Stats, PooledRatesMatchLoopAndIgnoreOrder) {
  Rng rng(98);
  std::vector<StatsInput> in;
  for (int n = 0; n < 25; ++n) in.push_back({random_doc(rng), std::nullopt});
  const StatsReport rep = annotation_stats(in, false);
  EXPECT_EQ(rep.fg_area_source, "pseudo_mask");
  std::size_t scr = 0, area = 0;
  double mean = 0;
  for (const auto& input : in) {
    const AnnotationDoc& doc = input.doc;
    BinaryMask strokes(doc.width, doc.height, 0), fg(doc.width, doc.height, 0);
    for (const auto& e : doc.entries) {
      draw_segment(strokes, e.seg_ab);
      draw_segment(strokes, e.seg_cd);
    }
    for (const auto& cm : pseudo_masks(doc, {})) {
      for (std::size_t i = 0; i < fg.size(); ++i) fg[i] |= cm.mask[i] > 0 ? 1 : 0;
    }
    scr += count_positive(strokes);
    area += count_positive(fg);
    mean += count_positive(fg) ? double(count_positive(strokes)) / double(count_positive(fg)) : 0.0;
  }
  EXPECT_NEAR(rep.pooled_fg_rate, double(scr) / double(area), 1e-12);
  EXPECT_NEAR(rep.mean_fg_rate, mean / double(in.size()), 1e-12);
  EXPECT_FALSE(rep.mean_coverage);
  std::shuffle(in.begin(), in.end(), rng.engine());
  const StatsReport again = annotation_stats(in, false);
  EXPECT_EQ(to_json(again).dump(), to_json(rep).dump());
}

TEST(Stats, MissingTruthIsReported) {
  const std::vector<StatsInput> in{{simple_doc(), std::nullopt}};
  EXPECT_EQ(kind_of([&] { annotation_stats(in, true); }), ErrorKind::MissingGt);
}

TEST(PseudoMasks, PerEntryAndShrinkAware) {
  AnnotationDoc doc = simple_doc();
  doc.entries.push_back({4, {{5.5, 1.0}, {5.5, 7.0}}, {{2.0, 4.0}, {9.0, 4.0}}, std::nullopt});
  const auto masks = pseudo_masks(doc, {});
  ASSERT_EQ(masks.size(), 2u);
  EXPECT_EQ(masks[0].category.value, 1);
  EXPECT_EQ(masks[1].category.value, 4);
  EXPECT_EQ(count_positive(masks[0].mask), 289u);
  MaskOptions half;
  half.shrink = 0.5;
  const auto shrunk = pseudo_masks(doc, half);
  EXPECT_LT(count_positive(shrunk[0].mask), count_positive(masks[0].mask));
}
