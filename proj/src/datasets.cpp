#include "adsgnn/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace adsgnn {

using json = nlohmann::json;
using Eigen::Vector2d;

namespace {

constexpr char kMagic[8] = {'A', 'D', 'S', 'G', 'N', 'N', 'D', 'S'};

Vector2d rotate(const Vector2d& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

double segment_distance(const Vector2d& p, const Vector2d& a, const Vector2d& b) {
  const Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

std::array<Vector2d, 3> triangle_vertices(double circumradius) {
  std::array<Vector2d, 3> v;
  for (int k = 0; k < 3; ++k) {
    const double a = std::numbers::pi / 2.0 + 2.0 * std::numbers::pi * k / 3.0;
    v[static_cast<std::size_t>(k)] = {circumradius * std::cos(a), circumradius * std::sin(a)};
  }
  return v;
}

// Point on the perimeter at arc-length fraction t in [0, 1), local frame.
Vector2d perimeter_point(ShapeKind kind, double scale, double t) {
  switch (kind) {
    case ShapeKind::circle: {
      const double a = 2.0 * std::numbers::pi * t;
      return {kCircleRadius * scale * std::cos(a), kCircleRadius * scale * std::sin(a)};
    }
    case ShapeKind::square: {
      const double h = 0.5 * kSquareSide * scale;
      const double u = 4.0 * t;
      const int side = std::min(static_cast<int>(u), 3);
      const double f = u - side;
      const Vector2d corners[4] = {{-h, -h}, {h, -h}, {h, h}, {-h, h}};
      return corners[side] + f * (corners[(side + 1) % 4] - corners[side]);
    }
    case ShapeKind::triangle: {
      const auto v = triangle_vertices(kTriangleCircumradius * scale);
      const double u = 3.0 * t;
      const int side = std::min(static_cast<int>(u), 2);
      const double f = u - side;
      return v[static_cast<std::size_t>(side)] +
             f * (v[static_cast<std::size_t>((side + 1) % 3)] - v[static_cast<std::size_t>(side)]);
    }
  }
  return {0.0, 0.0};
}

std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double unhex(const json& j, std::size_t line) {
  if (!j.is_string()) {
    throw ParseError("line " + std::to_string(line) + ": expected hexadecimal float string");
  }
  const std::string s = j.get<std::string>();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw ParseError("line " + std::to_string(line) + ": malformed float '" + s + "'");
  }
  return v;
}

json header_to_json(const DatasetHeader& h) {
  return json{{"format_version", h.format_version}, {"task", to_string(h.task)},
              {"n_samples", h.n_samples},           {"n_points", h.n_points},
              {"d", h.d},                           {"seed", h.seed}};
}

DatasetHeader header_from_json(const json& j, const std::string& where) {
  DatasetHeader h;
  try {
    h.format_version = j.at("format_version").get<int>();
    if (h.format_version != kDatasetFormatVersion) {
      throw UnsupportedVersionError(where + ": unsupported dataset format_version " +
                                    std::to_string(h.format_version));
    }
    h.task = parse_task(j.at("task").get<std::string>());
    h.n_samples = j.at("n_samples").get<std::uint64_t>();
    h.n_points = j.at("n_points").get<int>();
    h.d = j.at("d").get<int>();
    h.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw ParseError(where + ": bad header: " + e.what());
  } catch (const InputError& e) {
    throw ParseError(where + ": bad header: " + e.what());
  }
  if (h.n_points < 1 || h.d < 1) throw ParseError(where + ": bad header dimensions");
  return h;
}

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : bytes_(std::move(bytes)) {}

  void read(void* dst, std::size_t n, const char* what) {
    if (pos_ + n > bytes_.size()) {
      throw ParseError("truncated dataset: reading " + std::string(what) + " at byte offset " +
                       std::to_string(pos_));
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  template <typename T>
  T get(const char* what) {
    T v;
    read(&v, sizeof(T), what);
    return v;
  }

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::string bytes_;
  std::size_t pos_ = 0;
};

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void check_sample_shape(const Dataset& ds, const Sample& s) {
  const auto& h = ds.header;
  if (s.points.rows() != h.n_points || s.points.cols() != h.d) {
    throw InputError("save_dataset: sample shape does not match header");
  }
  if (h.task == Task::shapes && s.labels.size() != static_cast<std::size_t>(h.n_points)) {
    throw InputError("save_dataset: shapes sample needs one label per point");
  }
}

Dataset load_binary(const std::string& bytes, const std::filesystem::path& path) {
  ByteReader r(bytes);
  char magic[8];
  r.read(magic, sizeof(magic), "magic");
  const auto version = r.get<std::uint32_t>("format_version");
  if (version != static_cast<std::uint32_t>(kDatasetFormatVersion)) {
    throw UnsupportedVersionError(path.string() + ": unsupported dataset format_version " +
                                  std::to_string(version));
  }
  const auto header_len = r.get<std::uint32_t>("header length");
  std::string header_text(header_len, '\0');
  r.read(header_text.data(), header_len, "header");
  json hj;
  try {
    hj = json::parse(header_text);
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": malformed header at byte offset 16: " + e.what());
  }
  Dataset ds;
  ds.header = header_from_json(hj, path.string());
  const int n = ds.header.n_points;
  const int d = ds.header.d;
  ds.samples.reserve(ds.header.n_samples);
  for (std::uint64_t i = 0; i < ds.header.n_samples; ++i) {
    Sample s;
    s.points.resize(n, d);
    for (int p = 0; p < n; ++p) {
      for (int c = 0; c < d; ++c) s.points(p, c) = r.get<double>("coordinates");
    }
    if (ds.header.task == Task::shapes) {
      s.labels.resize(static_cast<std::size_t>(n));
      for (auto& l : s.labels) l = r.get<std::int32_t>("labels");
    } else {
      s.targets.log_energy = r.get<double>("log_energy");
      s.targets.log_spin = r.get<double>("log_spin");
    }
    ds.samples.push_back(std::move(s));
  }
  if (!r.at_end()) {
    throw ParseError(path.string() + ": trailing bytes at offset " + std::to_string(r.offset()));
  }
  return ds;
}

Dataset load_jsonl(const std::string& text, const std::filesystem::path& path) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  Dataset ds;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!have_header) {
      ds.header = header_from_json(j, path.string() + ": line " + std::to_string(lineno));
      have_header = true;
      continue;
    }
    const int n = ds.header.n_points;
    const int d = ds.header.d;
    Sample s;
    try {
      const auto& pts = j.at("points");
      if (!pts.is_array() || pts.size() != static_cast<std::size_t>(n * d)) {
        throw ParseError("wrong number of coordinates");
      }
      s.points.resize(n, d);
      for (int p = 0; p < n; ++p) {
        for (int c = 0; c < d; ++c) {
          s.points(p, c) = unhex(pts[static_cast<std::size_t>(p * d + c)], lineno);
        }
      }
      if (ds.header.task == Task::shapes) {
        s.labels = j.at("labels").get<std::vector<int>>();
        if (s.labels.size() != static_cast<std::size_t>(n)) throw ParseError("wrong label count");
      } else {
        s.targets.log_energy = unhex(j.at("log_energy"), lineno);
        s.targets.log_spin = unhex(j.at("log_spin"), lineno);
      }
    } catch (const json::exception& e) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  if (!have_header) throw ParseError(path.string() + ": empty dataset file");
  if (ds.samples.size() != ds.header.n_samples) {
    throw ParseError(path.string() + ": truncated dataset: header announces " +
                     std::to_string(ds.header.n_samples) + " samples, found " +
                     std::to_string(ds.samples.size()) + " (line " + std::to_string(lineno) + ")");
  }
  return ds;
}

}  // namespace

std::string to_string(Task t) { return t == Task::shapes ? "shapes" : "ising"; }

Task parse_task(const std::string& s) {
  if (s == "shapes") return Task::shapes;
  if (s == "ising") return Task::ising;
  throw InputError("unknown task '" + s + "'");
}

double perimeter_distance(const ShapeSpec& shape, const Vector2d& p) {
  const Vector2d q = rotate(p - shape.center, -shape.angle);
  switch (shape.kind) {
    case ShapeKind::circle:
      return std::abs(q.norm() - kCircleRadius * shape.scale);
    case ShapeKind::square: {
      const double h = 0.5 * kSquareSide * shape.scale;
      const Vector2d a = q.cwiseAbs();
      const double outside = (a.array() - h).max(0.0).matrix().norm();
      return outside > 0.0 ? outside : h - a.maxCoeff();
    }
    case ShapeKind::triangle: {
      const auto v = triangle_vertices(kTriangleCircumradius * shape.scale);
      return std::min({segment_distance(q, v[0], v[1]), segment_distance(q, v[1], v[2]),
                       segment_distance(q, v[2], v[0])});
    }
  }
  return 0.0;
}

Sample make_shapes_scene(std::span<const ShapeSpec> shapes, int n_points, CounterRng& rng,
                         double membership_fraction) {
  if (shapes.empty()) throw InputError("make_shapes_scene: no shapes");
  if (n_points < 8) throw InputError("make_shapes_scene: need at least 8 points per scene");
  const int k = static_cast<int>(shapes.size());
  Sample s;
  s.points.resize(n_points, 2);
  std::vector<int> owner(static_cast<std::size_t>(n_points));
  int row = 0;
  for (int si = 0; si < k; ++si) {
    const int count = n_points / k + (si < n_points % k ? 1 : 0);
    const auto& sh = shapes[static_cast<std::size_t>(si)];
    for (int c = 0; c < count; ++c) {
      const Vector2d local = perimeter_point(sh.kind, sh.scale, rng.uniform());
      s.points.row(row) = (sh.center + rotate(local, sh.angle)).transpose();
      owner[static_cast<std::size_t>(row)] = si;
      ++row;
    }
  }
  double diameter = 0.0;
  for (int i = 0; i < n_points; ++i) {
    for (int j = i + 1; j < n_points; ++j) {
      diameter = std::max(diameter, (s.points.row(i) - s.points.row(j)).norm());
    }
  }
  const double tol = membership_fraction * diameter;
  s.labels.resize(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const Vector2d p = s.points.row(i).transpose();
    int members = 0;
    for (const auto& sh : shapes) {
      if (perimeter_distance(sh, p) <= tol) ++members;
    }
    s.labels[static_cast<std::size_t>(i)] =
        members >= 2 ? kIntersectionLabel
                     : static_cast<int>(shapes[static_cast<std::size_t>(owner[static_cast<std::size_t>(i)])].kind);
  }
  return s;
}

Dataset gen_shapes(std::uint64_t seed, std::size_t n_scenes, int pts_per_scene) {
  if (pts_per_scene < 8) throw InputError("gen_shapes: pts_per_scene must be >= 8");
  Dataset ds;
  ds.header = {kDatasetFormatVersion, Task::shapes, n_scenes, pts_per_scene, 2, seed};
  ds.samples.reserve(n_scenes);
  const CounterRng base(seed);
  for (std::size_t i = 0; i < n_scenes; ++i) {
    CounterRng rng = base.split(i);
    const int n_shapes = 2 + static_cast<int>(rng.below(2));
    std::vector<ShapeSpec> shapes;
    for (int k = 0; k < n_shapes; ++k) {
      ShapeSpec sh;
      sh.kind = static_cast<ShapeKind>(rng.below(3));
      sh.scale = rng.uniform(0.5, 2.0);
      sh.angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
      sh.center = {rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)};
      shapes.push_back(sh);
    }
    ds.samples.push_back(make_shapes_scene(shapes, pts_per_scene, rng));
  }
  return ds;
}

PlanarPoints to_planar(const Eigen::MatrixXd& points) {
  if (points.cols() != 2) throw InputError("to_planar: points must be N x 2");
  std::vector<Complex> z;
  z.reserve(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) z.emplace_back(points(i, 0), points(i, 1));
  return PlanarPoints(std::move(z));
}

Dataset gen_ising(std::uint64_t seed, std::size_t n_samples, int n_points) {
  if (n_points < 2 || n_points % 2 != 0) throw InputError("gen_ising: n_points must be even");
  if (n_points > kMaxSpinN) throw InputError("gen_ising: n_points must be <= 20");
  Dataset ds;
  ds.header = {kDatasetFormatVersion, Task::ising, n_samples, n_points, 2, seed};
  ds.samples.reserve(n_samples);
  const CounterRng base(seed);
  for (std::size_t i = 0; i < n_samples; ++i) {
    CounterRng rng = base.split(i);
    for (;;) {
      Sample s;
      s.points.resize(n_points, 2);
      for (int p = 0; p < n_points; ++p) {
        s.points(p, 0) = rng.uniform(-2.0, 2.0);
        s.points(p, 1) = rng.uniform(-2.0, 2.0);
      }
      try {
        s.targets = make_targets(to_planar(s.points));
      } catch (const CollisionError&) {
        continue;
      } catch (const SampleRejected&) {
        continue;
      }
      ds.samples.push_back(std::move(s));
      break;
    }
  }
  return ds;
}

FileFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".jsonl" ? FileFormat::jsonl : FileFormat::binary;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  save_dataset(ds, path, format_for_path(path));
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat fmt) {
  DatasetHeader header = ds.header;
  header.n_samples = ds.samples.size();
  Dataset view{header, {}};
  for (const auto& s : ds.samples) check_sample_shape(view, s);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  if (fmt == FileFormat::jsonl) {
    out << header_to_json(header).dump() << '\n';
    for (const auto& s : ds.samples) {
      json rec;
      json pts = json::array();
      for (Eigen::Index p = 0; p < s.points.rows(); ++p) {
        for (Eigen::Index c = 0; c < s.points.cols(); ++c) pts.push_back(hex(s.points(p, c)));
      }
      rec["points"] = std::move(pts);
      if (header.task == Task::shapes) {
        rec["labels"] = s.labels;
      } else {
        rec["log_energy"] = hex(s.targets.log_energy);
        rec["log_spin"] = hex(s.targets.log_spin);
      }
      out << rec.dump() << '\n';
    }
  } else {
    const std::string header_text = header_to_json(header).dump();
    const auto version = static_cast<std::uint32_t>(kDatasetFormatVersion);
    const auto len = static_cast<std::uint32_t>(header_text.size());
    out.write(kMagic, sizeof(kMagic));
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (const auto& s : ds.samples) {
      for (Eigen::Index p = 0; p < s.points.rows(); ++p) {
        for (Eigen::Index c = 0; c < s.points.cols(); ++c) {
          const double v = s.points(p, c);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      }
      if (header.task == Task::shapes) {
        for (int l : s.labels) {
          const auto v = static_cast<std::int32_t>(l);
          out.write(reinterpret_cast<const char*>(&v), sizeof(v));
        }
      } else {
        out.write(reinterpret_cast<const char*>(&s.targets.log_energy), sizeof(double));
        out.write(reinterpret_cast<const char*>(&s.targets.log_spin), sizeof(double));
      }
    }
  }
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = slurp(path);
  if (bytes.size() >= sizeof(kMagic) && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0) {
    return load_binary(bytes, path);
  }
  return load_jsonl(bytes, path);
}

}  // namespace adsgnn
