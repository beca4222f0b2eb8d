#include "mdt3d/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "mdt3d/error.hpp"

namespace mdt3d {

using nlohmann::json;

namespace {

constexpr std::string_view kManifestFormat = "mdt3d-manifest/1";
constexpr std::string_view kDescriptorFormat = "mdt3d-descriptor/1";
constexpr std::string_view kByVolumeName = "VEHICLE_BY_VOLUME";

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
  }
  return v;
}

float read_le_float(const char* p) {
  std::uint32_t u;
  std::memcpy(&u, p, 4);
  return std::bit_cast<float>(to_little(u));
}

void append_le_float(std::string& out, float f) {
  const std::uint32_t u = to_little(std::bit_cast<std::uint32_t>(f));
  char buf[4];
  std::memcpy(buf, &u, 4);
  out.append(buf, 4);
}

std::vector<Point3> decode_points(const fs::path& path, std::size_t record_bytes) {
  const std::string bytes = read_file(path);
  if (bytes.size() % record_bytes != 0) {
    const std::size_t offset = bytes.size() - bytes.size() % record_bytes;
    throw DataError(path.string() + ": truncated point record at byte offset " + std::to_string(offset) +
                    " (file size " + std::to_string(bytes.size()) + " is not a multiple of " +
                    std::to_string(record_bytes) + ")");
  }
  std::vector<Point3> pts(bytes.size() / record_bytes);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const char* rec = bytes.data() + i * record_bytes;
    pts[i] = {read_le_float(rec), read_le_float(rec + 4), read_le_float(rec + 8)};
    if (!is_finite(pts[i])) {
      throw DataError(path.string() + ": non-finite coordinate at byte offset " +
                      std::to_string(i * record_bytes));
    }
  }
  return pts;
}

LabelTarget parse_label_target(const std::string& name, const std::string& where) {
  if (name == kByVolumeName) return VehicleByVolume{};
  if (auto c = parse_coarse_label(name)) return *c;
  throw ConfigError(where + ": unknown label target '" + name + "'");
}

template <typename T>
T json_get(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": field '" + key + "': " + e.what());
  }
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  out.flush();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::optional<double> parse_double(std::string_view token) {
  if (!token.empty() && token.front() == '+') token.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) return std::nullopt;
  return v;
}

std::vector<Point3> read_points(const fs::path& path) { return decode_points(path, kPointRecordBytes); }

void write_points(const fs::path& path, std::span<const Point3> points) {
  std::string bytes;
  bytes.reserve(points.size() * kPointRecordBytes);
  for (const auto& p : points) {
    append_le_float(bytes, static_cast<float>(p.x));
    append_le_float(bytes, static_cast<float>(p.y));
    append_le_float(bytes, static_cast<float>(p.z));
  }
  write_file(path, bytes);
}

std::vector<Point3> read_kitti_points(const fs::path& path) { return decode_points(path, 16); }

std::string format_box_line(const Box3D& box) {
  std::string s = box.label;
  for (double v : {box.yaw, box.center.x, box.center.y, box.center.z, box.dims.l, box.dims.w, box.dims.h}) {
    s += ' ';
    s += format_double(v);
  }
  return s;
}

Box3D parse_box_line(std::string_view line, const std::string& where) {
  const auto f = split_ws(line);
  if (f.size() != 8) {
    throw DataError(where + ": expected 8 fields, got " + std::to_string(f.size()));
  }
  double v[7];
  for (int i = 0; i < 7; ++i) {
    auto d = parse_double(f[i + 1]);
    if (!d || !std::isfinite(*d)) {
      throw DataError(where + ": bad number '" + std::string(f[i + 1]) + "'");
    }
    v[i] = *d;
  }
  Box3D box{std::string(f[0]), normalize_yaw(v[0]), {v[1], v[2], v[3]}, {v[4], v[5], v[6]}};
  try {
    validate_box(box);
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  return box;
}

std::vector<Box3D> read_labels(const fs::path& path) {
  const std::string text = read_file(path);
  std::vector<Box3D> boxes;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    std::string_view line(text.data() + pos, nl - pos);
    ++line_no;
    pos = nl + 1;
    if (split_ws(line).empty()) continue;
    boxes.push_back(parse_box_line(line, path.string() + ":" + std::to_string(line_no)));
  }
  return boxes;
}

void write_labels(const fs::path& path, std::span<const Box3D> boxes) {
  std::string text;
  for (const auto& b : boxes) {
    if (b.label.empty() || b.label.find_first_of(" \t\r\n") != std::string::npos) {
      throw DataError("label '" + b.label + "' is empty or contains whitespace");
    }
    text += format_box_line(b);
    text += '\n';
  }
  write_file(path, text);
}

Scan load_scan(const fs::path& points_path, const fs::path& labels_path, std::string dataset_id,
               std::string scan_id) {
  Scan s;
  s.points = read_points(points_path);
  s.boxes = read_labels(labels_path);
  s.dataset_id = std::move(dataset_id);
  s.scan_id = std::move(scan_id);
  return s;
}

Scan load_scan(const DatasetManifest& manifest, std::size_t index) {
  const auto& e = manifest.scans.at(index);
  return load_scan(manifest.resolve(e.points), manifest.resolve(e.labels), manifest.dataset_id, e.scan_id);
}

std::vector<Box3D> load_scan_labels(const DatasetManifest& manifest, std::size_t index) {
  return read_labels(manifest.resolve(manifest.scans.at(index).labels));
}

void save_scan(const Scan& scan, const fs::path& points_path, const fs::path& labels_path) {
  std::vector<Box3D> boxes = scan.boxes;
  for (auto& b : boxes) {
    b.yaw = normalize_yaw(b.yaw);
    validate_box(b);
  }
  write_points(points_path, scan.points);
  write_labels(labels_path, boxes);
}

void validate_manifest(const DatasetManifest& manifest) {
  if (manifest.dataset_id.empty()) throw ConfigError("manifest has an empty dataset_id");
  if (manifest.scans.empty()) {
    throw ConfigError("manifest for dataset '" + manifest.dataset_id + "' lists no scans");
  }
  std::map<std::string_view, int> seen;
  for (const auto& e : manifest.scans) {
    if (++seen[e.scan_id] > 1) {
      throw ConfigError("manifest for dataset '" + manifest.dataset_id + "' repeats scan id '" + e.scan_id + "'");
    }
  }
}

DatasetManifest read_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  const std::string where = path.string();
  if (json_get<std::string>(j, "format", where) != kManifestFormat) {
    throw ConfigError(where + ": unsupported manifest format");
  }
  DatasetManifest m;
  m.dataset_id = json_get<std::string>(j, "dataset_id", where);
  m.descriptor = json_get<std::string>(j, "descriptor", where);
  m.harmonized = json_get<bool>(j, "harmonized", where);
  m.base_dir = path.parent_path();
  for (const auto& s : json_get<json>(j, "scans", where)) {
    m.scans.push_back({json_get<std::string>(s, "id", where), json_get<std::string>(s, "points", where),
                       json_get<std::string>(s, "labels", where)});
  }
  validate_manifest(m);
  return m;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  json j;
  j["format"] = kManifestFormat;
  j["dataset_id"] = manifest.dataset_id;
  j["descriptor"] = manifest.descriptor.generic_string();
  j["harmonized"] = manifest.harmonized;
  json scans = json::array();
  for (const auto& e : manifest.scans) {
    scans.push_back({{"id", e.scan_id}, {"points", e.points.generic_string()}, {"labels", e.labels.generic_string()}});
  }
  j["scans"] = std::move(scans);
  write_file(path, j.dump(2) + "\n");
}

std::string label_target_name(const LabelTarget& target) {
  if (std::holds_alternative<VehicleByVolume>(target)) return std::string(kByVolumeName);
  return std::string(to_string(std::get<CoarseLabel>(target)));
}

DatasetDescriptor read_descriptor(const fs::path& path) {
  const json j = parse_json_file(path);
  const std::string where = path.string();
  if (json_get<std::string>(j, "format", where) != kDescriptorFormat) {
    throw ConfigError(where + ": unsupported descriptor format");
  }
  DatasetDescriptor d;
  d.dataset_id = json_get<std::string>(j, "dataset_id", where);
  const json label_map = json_get<json>(j, "label_map", where);
  for (const auto& [raw, target] : label_map.items()) {
    if (!target.is_string()) throw ConfigError(where + ": label_map['" + raw + "'] must be a string");
    d.label_map.emplace(raw, parse_label_target(target.get<std::string>(), where));
  }
  d.z_offset = json_get<double>(j, "z_offset", where);
  if (!std::isfinite(d.z_offset)) throw ConfigError(where + ": z_offset must be finite");
  if (j.contains("annotation_fov") && !j["annotation_fov"].is_null()) {
    const double fov = json_get<double>(j, "annotation_fov", where);
    if (!(fov > 0.0 && fov <= kTwoPi)) throw ConfigError(where + ": annotation_fov must be in (0, 2pi]");
    d.annotation_fov = fov;
  }
  if (j.contains("volume_clusters")) d.volume_clusters = json_get<int>(j, "volume_clusters", where);
  if (d.volume_clusters < 1 || d.volume_clusters > 3) {
    throw ConfigError(where + ": volume_clusters must be 1, 2 or 3");
  }
  if (j.contains("kitti_convention")) {
    const json& k = j["kitti_convention"];
    KittiConvention c;
    c.axis = json_get<std::array<int, 3>>(k, "axis", where);
    c.sign = json_get<std::array<double, 3>>(k, "sign", where);
    if (k.contains("translation")) c.translation = json_get<std::array<double, 3>>(k, "translation", where);
    c.bottom_center = json_get<bool>(k, "bottom_center", where);
    c.yaw_sign = json_get<double>(k, "yaw_sign", where);
    c.yaw_offset = json_get<double>(k, "yaw_offset", where);
    for (int a : c.axis) {
      if (a < 0 || a > 2) throw ConfigError(where + ": kitti_convention.axis entries must be 0, 1 or 2");
    }
    d.kitti = c;
  }
  if (j.contains("class_stats")) d.class_stats = json_get<std::map<std::string, double>>(j, "class_stats", where);
  return d;
}

void write_descriptor(const DatasetDescriptor& d, const fs::path& path) {
  json j;
  j["format"] = kDescriptorFormat;
  j["dataset_id"] = d.dataset_id;
  json lm = json::object();
  for (const auto& [raw, target] : d.label_map) lm[raw] = label_target_name(target);
  j["label_map"] = std::move(lm);
  j["z_offset"] = d.z_offset;
  j["annotation_fov"] = d.annotation_fov ? json(*d.annotation_fov) : json(nullptr);
  j["volume_clusters"] = d.volume_clusters;
  if (d.kitti) {
    j["kitti_convention"] = {{"axis", d.kitti->axis},
                             {"sign", d.kitti->sign},
                             {"translation", d.kitti->translation},
                             {"bottom_center", d.kitti->bottom_center},
                             {"yaw_sign", d.kitti->yaw_sign},
                             {"yaw_offset", d.kitti->yaw_offset}};
  }
  if (!d.class_stats.empty()) j["class_stats"] = d.class_stats;
  write_file(path, j.dump(2) + "\n");
}

std::optional<KittiObject> parse_kitti_label_line(std::string_view line, const KittiConvention& conv,
                                                  std::size_t line_no) {
  const std::string where = "line " + std::to_string(line_no);
  const auto f = split_ws(line);
  if (!f.empty() && f[0] == "DontCare") return std::nullopt;
  if (f.size() != 15 && f.size() != 16) {
    throw DataError(where + ": expected 15 KITTI fields, got " + std::to_string(f.size()));
  }
  double v[15];
  for (std::size_t i = 1; i < f.size() && i < 15; ++i) {
    auto d = parse_double(f[i]);
    if (!d || !std::isfinite(*d)) throw DataError(where + ": bad number '" + std::string(f[i]) + "'");
    v[i] = *d;
  }
  const double h = v[8], w = v[9], l = v[10];
  const std::array<double, 3> cam{v[11], v[12], v[13]};
  const double ry = v[14];

  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) out[k] = conv.sign[k] * cam[conv.axis[k]] + conv.translation[k];
  if (conv.bottom_center) out[2] += h / 2.0;

  KittiObject obj;
  obj.raw_class = std::string(f[0]);
  obj.box = Box3D{obj.raw_class, normalize_yaw(conv.yaw_sign * ry + conv.yaw_offset), {out[0], out[1], out[2]},
                  {l, w, h}};
  try {
    validate_box(obj.box);
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  return obj;
}

}  // namespace mdt3d
