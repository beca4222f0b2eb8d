#include "mdt3d/stats.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mdt3d/error.hpp"
#include "mdt3d/parallel.hpp"

namespace mdt3d {

const ClassSummary* DatasetStatsReport::find(const std::string& label) const {
  const auto it = classes.find(label);
  return it == classes.end() ? nullptr : &it->second;
}

DatasetStatsReport compute_stats(const DatasetManifest& manifest, std::size_t workers) {
  std::vector<std::map<std::string, ClassSummary>> partial(manifest.size());
  std::vector<std::map<std::string, std::vector<Dims>>> dims(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) {
    const Scan scan = load_scan(manifest, i);
    auto& acc = partial[i];
    for (const auto& box : scan.boxes) {
      dims[i][box.label].push_back(box.dims);
      auto& c = acc[box.label];
      ++c.instances;
      c.sum_l += box.dims.l;
      c.sum_w += box.dims.w;
      c.sum_h += box.dims.h;
      for (const auto& p : scan.points) {
        if (point_in_box(box, p)) ++c.contained_points;
      }
    }
  });

  DatasetStatsReport report;
  report.dataset_id = manifest.dataset_id;
  report.scans = manifest.size();
  // Running means return a constant input exactly, unlike sum / n.
  std::map<std::string, std::size_t> seen;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    for (const auto& [label, list] : dims[i]) {
      auto& m = report.classes[label].mean_dims;
      auto& k = seen[label];
      for (const auto& d : list) {
        const auto n = static_cast<double>(++k);
        m.l += (d.l - m.l) / n;
        m.w += (d.w - m.w) / n;
        m.h += (d.h - m.h) / n;
      }
    }
  }
  for (const auto& scan_acc : partial) {
    for (const auto& [label, c] : scan_acc) {
      auto& r = report.classes[label];
      r.instances += c.instances;
      r.contained_points += c.contained_points;
      r.sum_l += c.sum_l;
      r.sum_w += c.sum_w;
      r.sum_h += c.sum_h;
    }
  }
  for (auto& [label, r] : report.classes) {
    const auto n = static_cast<double>(r.instances);
    r.mean_points = static_cast<double>(r.contained_points) / n;
    r.per_scan = n / static_cast<double>(report.scans);
  }
  return report;
}

VolumeHistogram volume_histogram(std::span<const Box3D> boxes, const std::string& label, double bin_width) {
  if (!(bin_width > 0.0)) throw ConfigError("histogram bin width must be positive");
  VolumeHistogram h;
  h.bin_width = bin_width;
  for (const auto& b : boxes) {
    if (b.label != label) continue;
    ++h.bins[static_cast<std::int64_t>(std::floor(b.volume() / bin_width))];
    ++h.total;
  }
  return h;
}

VolumeHistogram volume_histogram(const DatasetManifest& manifest, const std::string& label, double bin_width,
                                 std::size_t workers) {
  std::vector<std::vector<Box3D>> labels(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) { labels[i] = load_scan_labels(manifest, i); });
  std::vector<Box3D> all;
  for (auto& l : labels) all.insert(all.end(), l.begin(), l.end());
  return volume_histogram(all, label, bin_width);
}

std::string format_stats_text(const DatasetStatsReport& report) {
  std::ostringstream os;
  os << "dataset " << report.dataset_id << "  scans " << report.scans << "\n";
  char line[256];
  std::snprintf(line, sizeof line, "%-16s %9s %21s %12s %10s\n", "class", "instances", "mean l x w x h (m)",
                "pts/box", "per scan");
  os << line;
  for (const auto& [label, c] : report.classes) {
    char dims[64];
    std::snprintf(dims, sizeof dims, "%.2f x %.2f x %.2f", c.mean_dims.l, c.mean_dims.w, c.mean_dims.h);
    std::snprintf(line, sizeof line, "%-16s %9zu %21s %12.1f %10.2f\n", label.c_str(), c.instances, dims,
                  c.mean_points, c.per_scan);
    os << line;
  }
  return os.str();
}

std::string format_stats_kv(const DatasetStatsReport& report) {
  std::string out = "dataset_id=" + report.dataset_id + "\n";
  out += "scans=" + std::to_string(report.scans) + "\n";
  for (const auto& [label, c] : report.classes) {
    const std::string k = "class." + label + ".";
    out += k + "instances=" + std::to_string(c.instances) + "\n";
    out += k + "contained_points=" + std::to_string(c.contained_points) + "\n";
    out += k + "sum_l=" + format_double(c.sum_l) + "\n";
    out += k + "sum_w=" + format_double(c.sum_w) + "\n";
    out += k + "sum_h=" + format_double(c.sum_h) + "\n";
    out += k + "mean_l=" + format_double(c.mean_dims.l) + "\n";
    out += k + "mean_w=" + format_double(c.mean_dims.w) + "\n";
    out += k + "mean_h=" + format_double(c.mean_dims.h) + "\n";
    out += k + "mean_points=" + format_double(c.mean_points) + "\n";
    out += k + "per_scan=" + format_double(c.per_scan) + "\n";
  }
  return out;
}

DatasetStatsReport parse_stats_kv(std::string_view text) {
  DatasetStatsReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto num = [&](const std::string& v) {
    auto d = parse_double(v);
    if (!d) throw DataError("stats line " + std::to_string(line_no) + ": bad number '" + v + "'");
    return *d;
  };
  auto count = [&](const std::string& v) { return static_cast<std::size_t>(num(v)); };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("stats line " + std::to_string(line_no) + ": missing '='");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 1);
    if (key == "dataset_id") {
      r.dataset_id = val;
    } else if (key == "scans") {
      r.scans = count(val);
    } else if (key.rfind("class.", 0) == 0) {
      const auto dot = key.rfind('.');
      const std::string label = key.substr(6, dot - 6);
      const std::string field = key.substr(dot + 1);
      auto& c = r.classes[label];
      if (field == "instances") c.instances = count(val);
      else if (field == "contained_points") c.contained_points = count(val);
      else if (field == "sum_l") c.sum_l = num(val);
      else if (field == "sum_w") c.sum_w = num(val);
      else if (field == "sum_h") c.sum_h = num(val);
      else if (field == "mean_l") c.mean_dims.l = num(val);
      else if (field == "mean_w") c.mean_dims.w = num(val);
      else if (field == "mean_h") c.mean_dims.h = num(val);
      else if (field == "mean_points") c.mean_points = num(val);
      else if (field == "per_scan") c.per_scan = num(val);
      else throw DataError("stats line " + std::to_string(line_no) + ": unknown field '" + field + "'");
    } else {
      throw DataError("stats line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (r.dataset_id.empty()) throw DataError("stats file has no dataset_id");
  return r;
}

std::string format_histogram_csv(const VolumeHistogram& hist) {
  std::string out = "bin_lo,bin_hi,count\n";
  for (const auto& [k, n] : hist.bins) {
    out += format_double(static_cast<double>(k) * hist.bin_width) + "," +
           format_double(static_cast<double>(k + 1) * hist.bin_width) + "," + std::to_string(n) + "\n";
  }
  return out;
}

}  // namespace mdt3d
