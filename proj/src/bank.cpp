#include "mdt3d/bank.hpp"

#include <cmath>
#include <sstream>

#include "mdt3d/error.hpp"
#include "mdt3d/parallel.hpp"

namespace mdt3d {

namespace {

constexpr std::string_view kBankMagic = "mdt3d-bank 1";

// Largest float not exceeding |limit| in magnitude, with v's sign preserved.
double quantize_within(double v, double limit) {
  float f = static_cast<float>(v);
  const auto lim = static_cast<float>(limit);
  const float cap = static_cast<double>(lim) > limit ? std::nextafter(lim, 0.0f) : lim;
  if (f > cap) f = cap;
  if (f < -cap) f = -cap;
  return f;
}

}  // namespace

Box3D InstanceRecord::original_box() const {
  return Box3D{std::string(to_string(label)), original_yaw, original_center, dims};
}

InstanceRecord make_record(const Box3D& box, CoarseLabel label, std::span<const Point3> world_points,
                           std::string source_dataset, std::string source_scan) {
  InstanceRecord r;
  r.label = label;
  r.source_dataset = std::move(source_dataset);
  r.source_scan = std::move(source_scan);
  r.dims = box.dims;
  r.original_center = box.center;
  r.original_yaw = box.yaw;
  r.original_range = std::hypot(box.center.x, box.center.y);
  r.local_points.reserve(world_points.size());
  for (const auto& p : world_points) {
    const Point3 q = to_box_frame(box, p);
    r.local_points.push_back({quantize_within(q.x, box.dims.l / 2.0), quantize_within(q.y, box.dims.w / 2.0),
                              quantize_within(q.z, box.dims.h / 2.0)});
  }
  return r;
}

std::vector<Point3> place(const InstanceRecord& record, const Box3D& pose) {
  std::vector<Point3> out;
  out.reserve(record.local_points.size());
  for (const auto& q : record.local_points) out.push_back(from_box_frame(pose, q));
  return out;
}

std::size_t InstanceBank::total() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.size();
  return n;
}

BankBuild build_bank(const DatasetManifest& manifest, std::size_t min_points, std::size_t workers) {
  struct ScanPart {
    std::vector<InstanceRecord> records;
    std::size_t skipped = 0;
  };
  std::vector<ScanPart> parts(manifest.size());
  parallel_for(manifest.size(), workers, [&](std::size_t i) {
    const Scan scan = load_scan(manifest, i);
    for (const auto& box : scan.boxes) {
      const CoarseLabel label = require_coarse_label(box.label);
      std::vector<Point3> inside;
      for (const auto& p : scan.points) {
        if (point_in_box(box, p)) inside.push_back(p);
      }
      if (inside.size() < min_points) {
        ++parts[i].skipped;
        continue;
      }
      parts[i].records.push_back(make_record(box, label, inside, scan.dataset_id, scan.scan_id));
    }
  });

  BankBuild out;
  out.bank.dataset_id = manifest.dataset_id;
  out.bank.min_points = min_points;
  for (auto& part : parts) {
    out.skipped += part.skipped;
    for (auto& r : part.records) out.bank.records[index_of(r.label)].push_back(std::move(r));
  }
  return out;
}

DrawResult draw(const InstanceBank& bank, CoarseLabel label, std::size_t n, Rng& rng) {
  DrawResult res;
  const auto& pool = bank[label];
  if (pool.empty()) {
    res.shortfall = n;
    return res;
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  res.records.reserve(n);
  for (std::size_t i = 0; i < n; ++i) res.records.push_back(&pool[pick(rng)]);
  return res;
}

fs::path write_bank(const InstanceBank& bank, const fs::path& dir) {
  fs::create_directories(dir);
  const fs::path idx = dir / (bank.dataset_id + ".bank.idx");
  const fs::path blob = dir / (bank.dataset_id + ".bank.pts");
  std::string text(kBankMagic);
  text += "\ndataset " + bank.dataset_id + "\nmin_points " + std::to_string(bank.min_points) + "\nrecords " +
          std::to_string(bank.total()) + "\n";
  std::vector<Point3> all;
  for (const auto& list : bank.records) {
    for (const auto& r : list) {
      text += std::string(to_string(r.label)) + ' ' + r.source_dataset + ' ' + r.source_scan;
      for (double v : {r.dims.l, r.dims.w, r.dims.h, r.original_center.x, r.original_center.y, r.original_center.z,
                       r.original_yaw, r.original_range}) {
        text += ' ' + format_double(v);
      }
      text += ' ' + std::to_string(all.size()) + ' ' + std::to_string(r.local_points.size()) + '\n';
      all.insert(all.end(), r.local_points.begin(), r.local_points.end());
    }
  }
  write_points(blob, all);
  write_file(idx, text);
  return idx;
}

InstanceBank read_bank(const fs::path& index_path) {
  std::istringstream in(read_file(index_path));
  const std::string where = index_path.string();
  std::string line;
  std::getline(in, line);
  if (line != kBankMagic) throw DataError(where + ": not a bank index");
  InstanceBank bank;
  std::string key;
  std::size_t count = 0;
  if (!(in >> key >> bank.dataset_id) || key != "dataset") throw DataError(where + ": missing dataset line");
  if (!(in >> key >> bank.min_points) || key != "min_points") throw DataError(where + ": missing min_points line");
  if (!(in >> key >> count) || key != "records") throw DataError(where + ": missing records line");

  const fs::path blob_path = index_path.parent_path() / (bank.dataset_id + ".bank.pts");
  const auto blob = read_points(blob_path);
  for (std::size_t i = 0; i < count; ++i) {
    std::string label, ds, scan;
    std::string nums[8];
    std::size_t offset = 0, n = 0;
    if (!(in >> label >> ds >> scan)) throw DataError(where + ": truncated at record " + std::to_string(i));
    for (auto& s : nums) in >> s;
    if (!(in >> offset >> n)) throw DataError(where + ": truncated at record " + std::to_string(i));
    double v[8];
    for (int k = 0; k < 8; ++k) {
      auto d = parse_double(nums[k]);
      if (!d) throw DataError(where + ": bad number in record " + std::to_string(i));
      v[k] = *d;
    }
    if (offset + n > blob.size()) throw DataError(where + ": record " + std::to_string(i) + " overruns point blob");
    InstanceRecord r;
    r.label = require_coarse_label(label);
    r.source_dataset = ds;
    r.source_scan = scan;
    r.dims = {v[0], v[1], v[2]};
    r.original_center = {v[3], v[4], v[5]};
    r.original_yaw = v[6];
    r.original_range = v[7];
    r.local_points.assign(blob.begin() + static_cast<std::ptrdiff_t>(offset),
                          blob.begin() + static_cast<std::ptrdiff_t>(offset + n));
    bank.records[index_of(r.label)].push_back(std::move(r));
  }
  return bank;
}

}  // namespace mdt3d
