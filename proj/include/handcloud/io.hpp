#pragma once

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "handcloud/error.hpp"
#include "handcloud/folding.hpp"
#include "handcloud/fusion.hpp"
#include "handcloud/geometry.hpp"
#include "handcloud/hand.hpp"
#include "handcloud/mesh.hpp"
#include "handcloud/metrics.hpp"
#include "handcloud/templates.hpp"

namespace handcloud::io {

using Json = nlohmann::ordered_json;

// ============================================================================
// Low-level helpers
// ============================================================================

/// Shortest decimal text that reads back to the same double; locale-free.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data(path.string() + ": cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail_data(path.string() + ": cannot open file for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail_data(path.string() + ": write failed");
}

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.append(bytes, sizeof(T));
}

/// Cursor over a byte buffer; errors name the file and byte offset.
class ByteReader {
 public:
  ByteReader(std::string_view data, std::string name, std::size_t offset = 0)
      : data_(data), name_(std::move(name)), pos_(offset) {}

  template <typename T>
  T get_le() {
    need(sizeof(T));
    char bytes[sizeof(T)];
    std::memcpy(bytes, data_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
    pos_ += sizeof(T);
    T value;
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }

  std::uint16_t get_be16() {
    need(2);
    const auto hi = static_cast<unsigned char>(data_[pos_]);
    const auto lo = static_cast<unsigned char>(data_[pos_ + 1]);
    pos_ += 2;
    return static_cast<std::uint16_t>((hi << 8) | lo);
  }

  std::uint8_t get_u8() { return get_le<std::uint8_t>(); }

  std::string_view get_bytes(std::size_t n) {
    need(n);
    const auto out = data_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == data_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    fail_data(name_ + ": byte " + std::to_string(pos_) + ": " + what);
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("unexpected end of file");
  }

  std::string_view data_;
  std::string name_;
  std::size_t pos_;
};

}  // namespace detail

// ============================================================================
// PLY
// ============================================================================

enum class PlyFormat { Ascii, BinaryLittleEndian };

struct PlyData {
  PointCloud cloud;
  std::vector<Face> faces;
};

namespace detail {

enum class PlyType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

inline std::optional<PlyType> ply_type(std::string_view name) {
  if (name == "char" || name == "int8") return PlyType::Int8;
  if (name == "uchar" || name == "uint8") return PlyType::UInt8;
  if (name == "short" || name == "int16") return PlyType::Int16;
  if (name == "ushort" || name == "uint16") return PlyType::UInt16;
  if (name == "int" || name == "int32") return PlyType::Int32;
  if (name == "uint" || name == "uint32") return PlyType::UInt32;
  if (name == "float" || name == "float32") return PlyType::Float32;
  if (name == "double" || name == "float64") return PlyType::Float64;
  return std::nullopt;
}

inline double read_binary(ByteReader& r, PlyType t) {
  switch (t) {
    case PlyType::Int8: return r.get_le<std::int8_t>();
    case PlyType::UInt8: return r.get_le<std::uint8_t>();
    case PlyType::Int16: return r.get_le<std::int16_t>();
    case PlyType::UInt16: return r.get_le<std::uint16_t>();
    case PlyType::Int32: return r.get_le<std::int32_t>();
    case PlyType::UInt32: return r.get_le<std::uint32_t>();
    case PlyType::Float32: return r.get_le<float>();
    case PlyType::Float64: return r.get_le<double>();
  }
  return 0.0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::Float64;
  bool is_list = false;
  PlyType count_type = PlyType::UInt8;
};

struct PlyElement {
  std::string name;
  std::size_t count = 0;
  std::vector<PlyProperty> properties;
};

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

inline std::optional<double> parse_number(std::string_view token) {
  double value = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

// Receives one parsed row: scalar values, and list values per list property.
struct PlyRowSink {
  std::vector<double> scalars;
  std::vector<std::vector<double>> lists;
};

}  // namespace detail

/// Parses PLY bytes. `name` is used in error messages.
inline PlyData parse_ply(std::string_view bytes, const std::string& name) {
  using namespace detail;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::string_view {
    if (pos >= bytes.size()) fail_data(name + ":" + std::to_string(line_no + 1) + ": unexpected end of header");
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = std::min(bytes.size(), end + 1);
    ++line_no;
    return line;
  };
  auto header_fail = [&](const std::string& what) -> void {
    fail_data(name + ":" + std::to_string(line_no) + ": " + what);
  };

  if (next_line() != "ply") header_fail("missing 'ply' magic");
  std::optional<PlyFormat> format;
  std::vector<PlyElement> elements;
  for (;;) {
    const auto tok = split_ws(next_line());
    if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
    if (tok[0] == "end_header") break;
    if (tok[0] == "format") {
      if (tok.size() != 3) header_fail("malformed format line");
      if (tok[1] == "ascii")
        format = PlyFormat::Ascii;
      else if (tok[1] == "binary_little_endian")
        format = PlyFormat::BinaryLittleEndian;
      else
        header_fail("unsupported format '" + std::string(tok[1]) + "'");
    } else if (tok[0] == "element") {
      const auto count = tok.size() == 3 ? parse_number(tok[2]) : std::nullopt;
      if (!count || *count < 0 || *count != std::floor(*count)) header_fail("malformed element line");
      elements.push_back({std::string(tok[1]), static_cast<std::size_t>(*count), {}});
    } else if (tok[0] == "property") {
      if (elements.empty()) header_fail("property before any element");
      PlyProperty prop;
      if (tok.size() == 5 && tok[1] == "list") {
        const auto ct = ply_type(tok[2]);
        const auto it = ply_type(tok[3]);
        if (!ct || !it) header_fail("unknown property type");
        prop = {std::string(tok[4]), *it, true, *ct};
      } else if (tok.size() == 3) {
        const auto t = ply_type(tok[1]);
        if (!t) header_fail("unknown property type '" + std::string(tok[1]) + "'");
        prop = {std::string(tok[2]), *t, false, PlyType::UInt8};
      } else {
        header_fail("malformed property line");
      }
      elements.back().properties.push_back(prop);
    } else {
      header_fail("unexpected header keyword '" + std::string(tok[0]) + "'");
    }
  }
  if (!format) fail_data(name + ": missing format line");

  PlyData out;
  ByteReader binary(bytes, name, pos);

  for (const PlyElement& el : elements) {
    const bool is_vertex = el.name == "vertex";
    const bool is_face = el.name == "face";
    int ix = -1, iy = -1, iz = -1, ilabel = -1, iface = -1;
    int scalar_slot = 0, list_slot = 0;
    std::vector<int> slot(el.properties.size());
    for (std::size_t p = 0; p < el.properties.size(); ++p) {
      const auto& prop = el.properties[p];
      slot[p] = prop.is_list ? list_slot++ : scalar_slot++;
      if (prop.is_list) {
        if (prop.name == "vertex_indices" || prop.name == "vertex_index") iface = slot[p];
      } else if (prop.name == "x") {
        ix = slot[p];
      } else if (prop.name == "y") {
        iy = slot[p];
      } else if (prop.name == "z") {
        iz = slot[p];
      } else if (prop.name == "component") {
        ilabel = slot[p];
      }
    }
    if (is_vertex && (ix < 0 || iy < 0 || iz < 0)) fail_data(name + ": vertex element lacks x, y or z");
    if (is_face && iface < 0) fail_data(name + ": face element lacks vertex_indices");
    if (is_vertex) {
      out.cloud.points.reserve(el.count);
      if (ilabel >= 0) out.cloud.labels.emplace().reserve(el.count);
    }

    PlyRowSink row;
    row.scalars.resize(static_cast<std::size_t>(scalar_slot));
    row.lists.resize(static_cast<std::size_t>(list_slot));
    for (std::size_t r = 0; r < el.count; ++r) {
      std::string where;
      if (*format == PlyFormat::Ascii) {
        const auto tok = split_ws(next_line());
        where = name + ":" + std::to_string(line_no) + ": ";
        std::size_t t = 0;
        auto take = [&]() -> double {
          if (t >= tok.size()) fail_data(where + "too few values in " + el.name + " row");
          const auto v = parse_number(tok[t]);
          if (!v) fail_data(where + "malformed number '" + std::string(tok[t]) + "'");
          ++t;
          return *v;
        };
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const double n = take();
            if (n < 0 || n != std::floor(n)) fail_data(where + "malformed list length");
            auto& list = row.lists[static_cast<std::size_t>(slot[p])];
            list.resize(static_cast<std::size_t>(n));
            for (auto& v : list) v = take();
          } else {
            row.scalars[static_cast<std::size_t>(slot[p])] = take();
          }
        }
        if (t != tok.size()) fail_data(where + "too many values in " + el.name + " row");
      } else {
        where = name + ": byte " + std::to_string(binary.offset()) + ": ";
        for (std::size_t p = 0; p < el.properties.size(); ++p) {
          const auto& prop = el.properties[p];
          if (prop.is_list) {
            const double n = read_binary(binary, prop.count_type);
            if (n < 0) binary.fail("negative list length");
            auto& list = row.lists[static_cast<std::size_t>(slot[p])];
            list.resize(static_cast<std::size_t>(n));
            for (auto& v : list) v = read_binary(binary, prop.type);
          } else {
            row.scalars[static_cast<std::size_t>(slot[p])] = read_binary(binary, prop.type);
          }
        }
      }

      if (is_vertex) {
        const Point3 p{row.scalars[static_cast<std::size_t>(ix)], row.scalars[static_cast<std::size_t>(iy)],
                       row.scalars[static_cast<std::size_t>(iz)]};
        if (!is_finite(p)) fail_data(where + "non-finite coordinate");
        out.cloud.points.push_back(p);
        if (ilabel >= 0) {
          const double l = row.scalars[static_cast<std::size_t>(ilabel)];
          if (l < 0 || l >= static_cast<double>(kComponentCount) || l != std::floor(l))
            fail_data(where + "component label out of range");
          out.cloud.labels->push_back(component_from_index(static_cast<std::size_t>(l)));
        }
      } else if (is_face) {
        const auto& list = row.lists[static_cast<std::size_t>(iface)];
        if (list.size() < 3) fail_data(where + "face with fewer than 3 vertices");
        // fan-triangulate polygons
        for (std::size_t k = 1; k + 1 < list.size(); ++k) {
          Face f{};
          const double ids[3] = {list[0], list[k], list[k + 1]};
          for (int q = 0; q < 3; ++q) {
            if (ids[q] < 0 || ids[q] != std::floor(ids[q])) fail_data(where + "malformed vertex index");
            f[static_cast<std::size_t>(q)] = static_cast<std::uint32_t>(ids[q]);
          }
          out.faces.push_back(f);
        }
      }
    }
  }
  for (const Face& f : out.faces)
    for (std::uint32_t v : f)
      if (v >= out.cloud.size()) fail_data(name + ": face references vertex " + std::to_string(v) + " out of range");
  return out;
}

inline PlyData read_ply(const std::filesystem::path& path) {
  const std::string bytes = read_file_bytes(path);
  return parse_ply(bytes, path.string());
}

inline PointCloud read_point_cloud(const std::filesystem::path& path) { return read_ply(path).cloud; }

inline TriangleMesh read_mesh(const std::filesystem::path& path) {
  PlyData data = read_ply(path);
  if (data.faces.empty()) fail_data(path.string() + ": mesh has no faces");
  TriangleMesh mesh;
  mesh.vertices = std::move(data.cloud.points);
  mesh.faces = std::move(data.faces);
  mesh.vertex_labels = std::move(data.cloud.labels);
  return mesh;
}

inline std::string format_ply(const std::vector<Point3>& points, const std::vector<ComponentId>* labels,
                              const std::vector<Face>* faces, PlyFormat format) {
  std::string out = "ply\nformat ";
  out += format == PlyFormat::Ascii ? "ascii 1.0\n" : "binary_little_endian 1.0\n";
  out += "element vertex " + std::to_string(points.size()) + "\n";
  out += "property double x\nproperty double y\nproperty double z\n";
  if (labels) out += "property uchar component\n";
  if (faces) out += "element face " + std::to_string(faces->size()) + "\nproperty list uchar int vertex_indices\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Point3& p = points[i];
    if (format == PlyFormat::Ascii) {
      out += format_double(p.x) + " " + format_double(p.y) + " " + format_double(p.z);
      if (labels) out += " " + std::to_string(index_of((*labels)[i]));
      out += "\n";
    } else {
      detail::put_le(out, p.x);
      detail::put_le(out, p.y);
      detail::put_le(out, p.z);
      if (labels) detail::put_le(out, static_cast<std::uint8_t>(index_of((*labels)[i])));
    }
  }
  if (faces) {
    for (const Face& f : *faces) {
      if (format == PlyFormat::Ascii) {
        out += "3 " + std::to_string(f[0]) + " " + std::to_string(f[1]) + " " + std::to_string(f[2]) + "\n";
      } else {
        detail::put_le(out, std::uint8_t{3});
        for (std::uint32_t v : f) detail::put_le(out, static_cast<std::int32_t>(v));
      }
    }
  }
  return out;
}

inline void write_ply(const std::filesystem::path& path, const PointCloud& cloud,
                      PlyFormat format = PlyFormat::Ascii) {
  write_file_bytes(path, format_ply(cloud.points, cloud.labels ? &*cloud.labels : nullptr, nullptr, format));
}

inline void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh,
                       PlyFormat format = PlyFormat::Ascii) {
  write_file_bytes(path, format_ply(mesh.vertices, mesh.vertex_labels ? &*mesh.vertex_labels : nullptr,
                                    &mesh.faces, format));
}

// ============================================================================
// JSON documents
// ============================================================================

inline Json parse_json(std::string_view text, const std::string& name) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    fail_data(name + ": byte " + std::to_string(e.byte) + ": malformed JSON");
  }
}

inline Json read_json(const std::filesystem::path& path) {
  return parse_json(read_file_bytes(path), path.string());
}

namespace detail {

inline const Json& field(const Json& j, const char* key, const std::string& ctx) {
  if (!j.is_object() || !j.contains(key)) fail_data(ctx + ": missing field '" + key + "'");
  return j.at(key);
}

inline double number(const Json& j, const std::string& ctx) {
  if (!j.is_number()) fail_data(ctx + ": expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail_data(ctx + ": non-finite number");
  return v;
}

inline double number_field(const Json& j, const char* key, const std::string& ctx) {
  return number(field(j, key, ctx), ctx + "." + key);
}

template <std::size_t N>
std::array<double, N> number_array(const Json& j, const std::string& ctx) {
  if (!j.is_array() || j.size() != N) fail_data(ctx + ": expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = number(j[i], ctx + "[" + std::to_string(i) + "]");
  return out;
}

inline Point3 point(const Json& j, const std::string& ctx) {
  const auto a = number_array<3>(j, ctx);
  return {a[0], a[1], a[2]};
}

}  // namespace detail

inline CameraModel camera_from_json(const Json& j, const std::string& ctx) {
  using namespace detail;
  CameraModel cam;
  cam.fx = number_field(j, "fx", ctx);
  cam.fy = number_field(j, "fy", ctx);
  cam.cx = number_field(j, "cx", ctx);
  cam.cy = number_field(j, "cy", ctx);
  const double w = number_field(j, "width", ctx);
  const double h = number_field(j, "height", ctx);
  if (w != std::floor(w) || h != std::floor(h) || w < 1 || h < 1 || w > 1e5 || h > 1e5)
    fail_data(ctx + ": width and height must be positive integers");
  cam.width = static_cast<int>(w);
  cam.height = static_cast<int>(h);
  const auto r = number_array<9>(field(j, "rotation", ctx), ctx + ".rotation");
  Point3 t = point(field(j, "translation", ctx), ctx + ".translation");
  std::string units = "mm";
  if (j.contains("units")) {
    if (!j["units"].is_string()) fail_data(ctx + ".units: expected \"mm\" or \"m\"");
    units = j["units"].get<std::string>();
  }
  if (units == "m")
    t = t * 1000.0;
  else if (units != "mm")
    fail_data(ctx + ".units: expected \"mm\" or \"m\"");
  try {
    cam.extrinsic = RigidTransform::from(r, t);
    cam.validate();
  } catch (const Error& e) {
    fail_data(ctx + ": " + e.what());
  }
  return cam;
}

inline Json camera_to_json(const CameraModel& cam) {
  Json j;
  j["fx"] = cam.fx;
  j["fy"] = cam.fy;
  j["cx"] = cam.cx;
  j["cy"] = cam.cy;
  j["width"] = cam.width;
  j["height"] = cam.height;
  j["rotation"] = cam.extrinsic.rotation;
  j["translation"] = {cam.extrinsic.translation.x, cam.extrinsic.translation.y, cam.extrinsic.translation.z};
  j["units"] = "mm";
  return j;
}

inline CameraModel read_camera(const std::filesystem::path& path) {
  return camera_from_json(read_json(path), path.string());
}

/// A rig file is either an array of cameras or {"cameras": [...]}.
inline std::vector<CameraModel> read_rig(const std::filesystem::path& path) {
  const Json j = read_json(path);
  const Json& list = j.is_object() ? detail::field(j, "cameras", path.string()) : j;
  if (!list.is_array() || list.empty()) fail_data(path.string() + ": expected a non-empty camera array");
  std::vector<CameraModel> out;
  for (std::size_t i = 0; i < list.size(); ++i)
    out.push_back(camera_from_json(list[i], path.string() + ": camera " + std::to_string(i)));
  return out;
}

inline void write_rig(const std::filesystem::path& path, const std::vector<CameraModel>& cams) {
  Json j;
  j["cameras"] = Json::array();
  for (const auto& c : cams) j["cameras"].push_back(camera_to_json(c));
  write_file_bytes(path, j.dump(2) + "\n");
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline FusionConfig fusion_config_from_json(const Json& j, const std::string& ctx) {
  using namespace detail;
  if (!j.is_object()) fail_data(ctx + ": expected an object");
  FusionConfig c;
  for (const auto& [key, value] : j.items()) {
    const std::string k = ctx + "." + key;
    auto count = [&]() {
      const double v = number(value, k);
      if (v < 0 || v != std::floor(v)) fail_data(k + ": expected a non-negative integer");
      return static_cast<std::size_t>(v);
    };
    if (key == "near") c.near = number(value, k);
    else if (key == "far") c.far = number(value, k);
    else if (key == "outlier_k") c.outlier_k = count();
    else if (key == "outlier_alpha") c.outlier_alpha = number(value, k);
    else if (key == "voxel_size") c.voxel_size = number(value, k);
    else if (key == "target_points") c.target_points = count();
    else fail_data(k + ": unknown field");
  }
  try {
    c.validate();
  } catch (const Error& e) {
    fail_data(ctx + ": " + e.what());
  }
  return c;
}

inline SyntheticHandSpec hand_spec_from_json(const Json& j, const std::string& ctx) {
  using namespace detail;
  if (!j.is_object()) fail_data(ctx + ": expected an object");
  SyntheticHandSpec spec;
  auto digits = [&](const Json& v, const std::string& k) {
    if (!v.is_array() || v.size() != kDigitCount) fail_data(k + ": expected 5 rows of 3 numbers");
    DigitArray out{};
    for (std::size_t d = 0; d < kDigitCount; ++d) out[d] = number_array<3>(v[d], k + "[" + std::to_string(d) + "]");
    return out;
  };
  for (const auto& [key, value] : j.items()) {
    const std::string k = ctx + "." + key;
    if (key == "bone_lengths") spec.bone_lengths = digits(value, k);
    else if (key == "flexion") spec.flexion = digits(value, k);
    else if (key == "palm_radii") spec.palm_radii = point(value, k);
    else if (key == "digit_radii") spec.digit_radii = number_array<kDigitCount>(value, k);
    else fail_data(k + ": unknown field");
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    fail_data(ctx + ": " + e.what());
  }
  return spec;
}

inline Json hand_spec_to_json(const SyntheticHandSpec& spec) {
  Json j;
  j["bone_lengths"] = spec.bone_lengths;
  j["palm_radii"] = {spec.palm_radii.x, spec.palm_radii.y, spec.palm_radii.z};
  j["digit_radii"] = spec.digit_radii;
  j["flexion"] = spec.flexion;
  return j;
}

/// Poses are a 21 x 3 array (one sample) or an array of them.
inline std::vector<HandPose> poses_from_json(const Json& j, const std::string& ctx) {
  auto one = [&](const Json& v, const std::string& c) {
    if (!v.is_array() || v.size() != kJointCount) fail_data(c + ": expected 21 joints of 3 numbers");
    HandPose pose{};
    for (std::size_t k = 0; k < kJointCount; ++k) pose[k] = detail::point(v[k], c + "[" + std::to_string(k) + "]");
    return pose;
  };
  if (!j.is_array() || j.empty()) fail_data(ctx + ": expected a pose array");
  std::vector<HandPose> out;
  if (j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
    for (std::size_t s = 0; s < j.size(); ++s) out.push_back(one(j[s], ctx + "[" + std::to_string(s) + "]"));
  } else {
    out.push_back(one(j, ctx));
  }
  return out;
}

inline std::vector<HandPose> read_poses(const std::filesystem::path& path) {
  return poses_from_json(read_json(path), path.string());
}

inline Json poses_to_json(const std::vector<HandPose>& poses) {
  Json out = Json::array();
  for (const auto& pose : poses) {
    Json p = Json::array();
    for (const auto& q : pose) p.push_back({q.x, q.y, q.z});
    out.push_back(std::move(p));
  }
  return out;
}

// ============================================================================
// Depth maps
// ============================================================================

inline std::uint16_t depth_to_u16(double d) {
  const long long v = std::llround(d);
  return static_cast<std::uint16_t>(std::clamp<long long>(v, 0, 65535));
}

/// Binary (P5) PGM, 8 or 16 bit; 16-bit samples are big-endian. Values in mm.
inline DepthMap parse_pgm(std::string_view bytes, const std::string& name, const CameraModel& camera) {
  std::size_t pos = 0;
  auto fail_at = [&](const std::string& what) -> void {
    fail_data(name + ": byte " + std::to_string(pos) + ": " + what);
  };
  auto token = [&]() {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (pos == start) fail_at("unexpected end of header");
    return bytes.substr(start, pos - start);
  };
  auto integer = [&]() {
    const auto t = token();
    int v = 0;
    const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc() || res.ptr != t.data() + t.size() || v <= 0) fail_at("malformed header value");
    return v;
  };
  if (token() != "P5") fail_at("expected binary PGM magic 'P5'");
  const int w = integer();
  const int h = integer();
  const int maxval = integer();
  if (maxval > 65535) fail_at("maxval above 65535");
  if (pos >= bytes.size()) fail_at("missing pixel data");
  ++pos;  // single whitespace after maxval
  if (w != camera.width || h != camera.height)
    fail_data(name + ": image is " + std::to_string(w) + "x" + std::to_string(h) + " but camera expects " +
              std::to_string(camera.width) + "x" + std::to_string(camera.height));
  DepthMap map(camera);
  detail::ByteReader r(bytes, name, pos);
  for (auto& d : map.depth) d = maxval > 255 ? r.get_be16() : r.get_u8();
  return map;
}

inline DepthMap read_pgm(const std::filesystem::path& path, const CameraModel& camera) {
  return parse_pgm(read_file_bytes(path), path.string(), camera);
}

inline std::string format_pgm(const DepthMap& map) {
  std::string out = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n65535\n";
  out.reserve(out.size() + 2 * map.depth.size());
  for (double d : map.depth) {
    const std::uint16_t v = depth_to_u16(d);
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

inline void write_pgm(const std::filesystem::path& path, const DepthMap& map) {
  write_file_bytes(path, format_pgm(map));
}

/// Sidecar of a raw depth file: the same path with ".json" appended.
inline std::filesystem::path raw_sidecar(const std::filesystem::path& raw) {
  return std::filesystem::path(raw.string() + ".json");
}

inline DepthMap read_raw_depth(const std::filesystem::path& path) {
  const auto sidecar_path = raw_sidecar(path);
  const Json side = read_json(sidecar_path);
  const std::string ctx = sidecar_path.string();
  const CameraModel cam = camera_from_json(detail::field(side, "camera", ctx), ctx + ".camera");
  const double w = detail::number_field(side, "width", ctx);
  const double h = detail::number_field(side, "height", ctx);
  if (w != cam.width || h != cam.height) fail_data(ctx + ": width/height disagree with the camera");
  const std::string bytes = read_file_bytes(path);
  DepthMap map(cam);
  if (bytes.size() != 2 * map.depth.size())
    fail_data(path.string() + ": byte " + std::to_string(bytes.size()) + ": expected " +
              std::to_string(2 * map.depth.size()) + " bytes");
  detail::ByteReader r(bytes, path.string());
  for (auto& d : map.depth) d = r.get_le<std::uint16_t>();
  return map;
}

inline void write_raw_depth(const std::filesystem::path& path, const DepthMap& map) {
  std::string out;
  out.reserve(2 * map.depth.size());
  for (double d : map.depth) detail::put_le(out, depth_to_u16(d));
  write_file_bytes(path, out);
  Json side;
  side["width"] = map.width;
  side["height"] = map.height;
  side["camera"] = camera_to_json(map.camera);
  write_file_bytes(raw_sidecar(path), side.dump(2) + "\n");
}

// ============================================================================
// Decoder weights
// ============================================================================
//
// Little-endian layout:
//   char[4]  "HCFD"
//   u32      version (1)
//   u8       template kind (0 grid, 1 hand, 2 local)
//   u32      hidden width
//   u32      latent dimension
//   u64      template point count N
//   f64[3N]  template points, x y z per point
//   u8[N]    template labels
//   u64      parameter count P
//   f64[P]   parameters

inline constexpr std::uint32_t kWeightsVersion = 1;

inline std::string format_weights(const FoldingDecoder& decoder) {
  std::string out = "HCFD";
  detail::put_le(out, kWeightsVersion);
  detail::put_le(out, static_cast<std::uint8_t>(decoder.templ().kind));
  detail::put_le(out, static_cast<std::uint32_t>(decoder.hidden()));
  detail::put_le(out, static_cast<std::uint32_t>(kLatentDim));
  const PointCloud& t = decoder.templ().points;
  detail::put_le(out, static_cast<std::uint64_t>(t.size()));
  for (const Point3& p : t.points) {
    detail::put_le(out, p.x);
    detail::put_le(out, p.y);
    detail::put_le(out, p.z);
  }
  for (std::size_t i = 0; i < t.size(); ++i) detail::put_le(out, static_cast<std::uint8_t>(index_of(t.label(i))));
  const Eigen::VectorXd& params = decoder.parameters();
  detail::put_le(out, static_cast<std::uint64_t>(params.size()));
  for (Eigen::Index i = 0; i < params.size(); ++i) detail::put_le(out, params[i]);
  return out;
}

inline void write_weights(const std::filesystem::path& path, const FoldingDecoder& decoder) {
  write_file_bytes(path, format_weights(decoder));
}

inline FoldingDecoder parse_weights(std::string_view bytes, const std::string& name) {
  detail::ByteReader r(bytes, name);
  if (r.get_bytes(4) != "HCFD") r.fail("bad magic, expected HCFD");
  if (r.get_le<std::uint32_t>() != kWeightsVersion) r.fail("unsupported version");
  const std::uint8_t kind = r.get_u8();
  if (kind > 2) r.fail("unknown template kind");
  const std::uint32_t hidden = r.get_le<std::uint32_t>();
  if (hidden == 0) r.fail("hidden width is zero");
  if (r.get_le<std::uint32_t>() != kLatentDim) r.fail("latent dimension mismatch");
  const std::uint64_t n = r.get_le<std::uint64_t>();
  if (n == 0 || n > (bytes.size() - r.offset()) / 25) r.fail("implausible template size");
  Template t;
  t.kind = static_cast<TemplateKind>(kind);
  std::vector<Point3> pts(n);
  for (auto& p : pts) {
    p.x = r.get_le<double>();
    p.y = r.get_le<double>();
    p.z = r.get_le<double>();
    if (!is_finite(p)) r.fail("non-finite template point");
  }
  std::vector<ComponentId> labels(n);
  for (auto& l : labels) {
    const std::uint8_t v = r.get_u8();
    if (v >= kComponentCount) r.fail("template label out of range");
    l = component_from_index(v);
  }
  t.points = PointCloud(std::move(pts), std::move(labels));
  if (t.kind == TemplateKind::LocalHand3D) t.budget = t.points.component_counts();
  FoldingDecoder decoder(std::move(t), hidden);
  const std::uint64_t count = r.get_le<std::uint64_t>();
  if (count != decoder.parameter_count()) r.fail("parameter count does not match the architecture");
  for (Eigen::Index i = 0; i < decoder.parameters().size(); ++i) decoder.parameters()[i] = r.get_le<double>();
  if (!decoder.parameters().allFinite()) fail_data(name + ": non-finite parameters");
  if (!r.at_end()) r.fail("trailing bytes");
  return decoder;
}

inline FoldingDecoder read_weights(const std::filesystem::path& path) {
  return parse_weights(read_file_bytes(path), path.string());
}

}  // namespace handcloud::io
