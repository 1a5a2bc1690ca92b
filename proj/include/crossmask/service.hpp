#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "crossmask/dataset_io.hpp"
#include "crossmask/pseudo_mask.hpp"
#include "crossmask/size_branching.hpp"

namespace crossmask::service {

namespace fs = std::filesystem;
using nlohmann::json;

inline std::string base64_encode(std::string_view in) {
  static constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const auto n = (static_cast<std::uint32_t>(static_cast<unsigned char>(in[i])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(in[i + 1])) << 8) |
                   static_cast<std::uint32_t>(static_cast<unsigned char>(in[i + 2]));
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += kAlphabet[n & 63];
  }
  if (i + 1 == in.size()) {
    const auto n = static_cast<std::uint32_t>(static_cast<unsigned char>(in[i])) << 16;
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += "==";
  } else if (i + 2 == in.size()) {
    const auto n = (static_cast<std::uint32_t>(static_cast<unsigned char>(in[i])) << 16) |
                   (static_cast<std::uint32_t>(static_cast<unsigned char>(in[i + 1])) << 8);
    out += kAlphabet[(n >> 18) & 63];
    out += kAlphabet[(n >> 12) & 63];
    out += kAlphabet[(n >> 6) & 63];
    out += '=';
  }
  return out;
}

inline std::string base64_decode(std::string_view in) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  std::string out;
  std::uint32_t acc = 0;
  int bits = 0;
  for (char c : in) {
    const int v = value(c);
    if (v < 0) continue;
    acc = (acc << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((acc >> bits) & 0xFF);
    }
  }
  return out;
}

struct Response {
  int status = 200;
  json body;
  std::string raw;  ///< non-JSON payload (image bytes) when set
  std::string content_type = "application/json";
};

inline Response json_ok(json body) { return {200, std::move(body), {}, "application/json"}; }

inline Response error_response(int status, std::string_view kind, const std::string& message) {
  return {status, {{"error", std::string(kind)}, {"message", message}}, {}, "application/json"};
}

inline int status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::VersionConflict: return 409;
    case ErrorKind::IoError: return 500;
    default: return 422;
  }
}

/// Parses a preview/cross body into a validated cross.
inline CrossScribble parse_preview_cross(const json& body, std::size_t width, std::size_t height) {
  const json& cross = io::detail::require(body, "cross", "preview");
  io::AnnotationDoc probe;
  probe.width = width;
  probe.height = height;
  io::CrossEntry entry;
  entry.seg_ab = io::detail::parse_segment(io::detail::require(cross, "seg_ab", "cross"), "cross.seg_ab");
  entry.seg_cd = io::detail::parse_segment(io::detail::require(cross, "seg_cd", "cross"), "cross.seg_cd");
  if (cross.contains("direction_deg") && !cross["direction_deg"].is_null()) {
    entry.direction_deg = cross["direction_deg"].get<double>();
  }
  io::detail::check_bounds(entry.seg_ab, probe, "cross");
  io::detail::check_bounds(entry.seg_cd, probe, "cross");
  return entry.build();
}

/// Backend for the annotation UI: image listing, pseudo-mask preview and
/// versioned annotation storage under `<root>/annotations/`.
class AnnotationService {
 public:
  explicit AnnotationService(fs::path root, std::optional<ThresholdTable> thresholds = std::nullopt)
      : root_(std::move(root)), thresholds_(std::move(thresholds)) {}

  const fs::path& root() const { return root_; }
  fs::path annotation_dir() const { return root_ / "annotations"; }

  Response list_images() const {
    std::error_code ec;
    if (!fs::is_directory(root_, ec)) return error_response(500, "IoError", "root is not a readable directory");
    json list = json::array();
    std::vector<std::pair<std::string, io::PngInfo>> found;
    try {
      for (auto it = fs::recursive_directory_iterator(root_); it != fs::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && it->path() == annotation_dir()) {
          it.disable_recursion_pending();
          continue;
        }
        if (!it->is_regular_file() || it->path().extension() != ".png") continue;
        try {
          found.emplace_back(fs::relative(it->path(), root_).generic_string(), io::png_info(io::read_file(it->path())));
        } catch (const Error&) {
          // unreadable or non-PNG file: not an image
        }
      }
    } catch (const fs::filesystem_error& e) {
      return error_response(500, "IoError", e.what());
    }
    std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [id, info] : found) list.push_back({{"id", id}, {"width", info.width}, {"height", info.height}});
    return json_ok(std::move(list));
  }

  Response get_image(const std::string& id) const {
    const auto path = image_path(id);
    if (!path) return error_response(404, "NotFound", "no image '" + id + "'");
    return {200, {}, io::read_file(*path), "image/png"};
  }

  /// Renders the pseudo mask for a single cross. Pure: equal bodies give
  /// equal responses.
  Response preview(const std::string& body_text) const {
    json body;
    try {
      body = json::parse(body_text);
    } catch (const json::parse_error& e) {
      return error_response(400, "BadRequest", e.what());
    }
    try {
      const json& w = io::detail::require(body, "width", "preview");
      const json& h = io::detail::require(body, "height", "preview");
      if (!w.is_number_unsigned() || !h.is_number_unsigned() || w.get<std::size_t>() == 0 ||
          h.get<std::size_t>() == 0) {
        fail(ErrorKind::SchemaError, "width and height must be positive integers");
      }
      const auto width = w.get<std::size_t>(), height = h.get<std::size_t>();
      const CrossScribble cross = parse_preview_cross(body, width, height);
      SigmaSpec sigma = SigmaSpec::infinite();
      if (body.contains("sigma_ratio")) {
        const json& s = body["sigma_ratio"];
        sigma = s.is_string() ? SigmaSpec::parse(s.get<std::string>()) : SigmaSpec(s.get<double>());
      }
      const MaskOp op = body.contains("op") ? parse_mask_op(body["op"].get<std::string>()) : MaskOp::Multiply;
      const MaskGrid mask = rasterize_pseudo_mask(cross, sigma, op, width, height);
      const std::size_t area = count_positive(mask);
      const double rel = relative_size(mask);
      json out = {{"mask_png_base64", base64_encode(io::encode_mask_png(mask))},
                  {"area_px", area},
                  {"relative_size", rel}};
      if (cross.shallow()) out["warning"] = "crossing angle below 30 degrees";
      if (thresholds_) {
        const int category = body.value("category", 1);
        if (auto it = thresholds_->find(category); it != thresholds_->end()) {
          out["branch_index"] = select_branch(rel, it->second);
        }
      }
      return json_ok(std::move(out));
    } catch (const Error& e) {
      return error_response(422, to_string(e.kind()), e.what());
    } catch (const json::exception& e) {
      return error_response(422, "SchemaError", e.what());
    }
  }

  Response get_annotation(const std::string& id) const {
    if (!valid_id(id)) return error_response(404, "NotFound", "invalid id");
    std::lock_guard lock(lock_for(id));
    const fs::path path = annotation_path(id);
    if (!fs::exists(path)) return error_response(404, "NotFound", "no annotation for '" + id + "'");
    const json stored = io::read_json(path);
    return json_ok(stored);
  }

  /// Optimistic concurrency: the save succeeds only when base_version
  /// equals the stored version (0 when nothing is stored yet).
  Response save_annotation(const std::string& id, const std::string& body_text) {
    if (!image_path(id)) return error_response(404, "NotFound", "no image '" + id + "'");
    json body;
    try {
      body = json::parse(body_text);
    } catch (const json::parse_error& e) {
      return error_response(400, "BadRequest", e.what());
    }
    try {
      const json& base = io::detail::require(body, "base_version", "request");
      if (!base.is_number_integer()) fail(ErrorKind::SchemaError, "base_version must be an integer");
      const io::AnnotationDoc doc = io::annotation_from_json(io::detail::require(body, "doc", "request"));

      std::lock_guard lock(lock_for(id));
      const fs::path path = annotation_path(id);
      long current = 0;
      if (fs::exists(path)) current = io::read_json(path).at("version").get<long>();
      if (base.get<long>() != current) {
        Response r = error_response(409, "VersionConflict",
                                    "base_version " + std::to_string(base.get<long>()) + " is stale");
        r.body["current_version"] = current;
        return r;
      }
      const long next = current + 1;
      io::write_json(path, {{"version", next}, {"doc", io::to_json(doc)}});
      return json_ok({{"version", next}});
    } catch (const Error& e) {
      return error_response(status_for(e.kind()), to_string(e.kind()), e.what());
    } catch (const json::exception& e) {
      return error_response(422, "SchemaError", e.what());
    }
  }

  /// Registers the HTTP routes (with permissive CORS) on `server`.
  void mount(httplib::Server& server) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
    server.Get("/api/images", [this](const httplib::Request&, httplib::Response& res) { send(res, list_images()); });
    server.Get(R"(/api/images/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_image(req.matches[1]));
    });
    server.Post("/api/preview", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, preview(req.body));
    });
    server.Get(R"(/api/annotations/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, get_annotation(req.matches[1]));
    });
    server.Post(R"(/api/annotations/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, save_annotation(req.matches[1], req.body));
    });
  }

 private:
  static void send(httplib::Response& res, const Response& r) {
    res.status = r.status;
    if (!r.raw.empty()) {
      res.set_content(r.raw, r.content_type);
    } else {
      res.set_content(r.body.dump(), r.content_type);
    }
  }

  static bool valid_id(const std::string& id) {
    if (id.empty()) return false;
    const fs::path p(id);
    if (p.is_absolute()) return false;
    for (const auto& part : p) {
      if (part == ".." || part == ".") return false;
    }
    return true;
  }

  std::optional<fs::path> image_path(const std::string& id) const {
    if (!valid_id(id)) return std::nullopt;
    const fs::path p = root_ / id;
    if (p.extension() != ".png" || !fs::is_regular_file(p)) return std::nullopt;
    if (*fs::path(id).begin() == "annotations") return std::nullopt;
    return p;
  }

  fs::path annotation_path(const std::string& id) const {
    fs::path p = annotation_dir() / id;
    p += ".json";
    return p;
  }

  std::mutex& lock_for(const std::string& id) const {
    std::lock_guard guard(locks_mutex_);
    auto& slot = locks_[id];
    if (!slot) slot = std::make_unique<std::mutex>();
    return *slot;
  }

  fs::path root_;
  std::optional<ThresholdTable> thresholds_;
  mutable std::mutex locks_mutex_;
  mutable std::map<std::string, std::unique_ptr<std::mutex>> locks_;
};

}  // namespace crossmask::service
