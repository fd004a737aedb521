#include "doctest.h"

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "adsgnn/datasets.hpp"
#include "test_util.hpp"

using namespace adsgnn;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("adsgnn_ds_" + std::to_string(std::random_device{}()) + "_" +
            std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool same(const Dataset& a, const Dataset& b) {
  if (!(a.header == b.header) || a.samples.size() != b.samples.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const Sample& x = a.samples[i];
    const Sample& y = b.samples[i];
    if (x.points.rows() != y.points.rows() || x.points.cols() != y.points.cols()) return false;
    if (std::memcmp(x.points.data(), y.points.data(), sizeof(double) * x.points.size()) != 0)
      return false;
    if (x.labels != y.labels) return false;
    if (std::memcmp(&x.targets.log_energy, &y.targets.log_energy, sizeof(double)) != 0) return false;
    if (std::memcmp(&x.targets.log_spin, &y.targets.log_spin, sizeof(double)) != 0) return false;
  }
  return true;
}

std::vector<char> read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& p, const std::vector<char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(b.data(), static_cast<std::streamsize>(b.size()));
}

}  // namespace

TEST_CASE("perimeter distance") {
  ShapeSpec c{ShapeKind::circle, Eigen::Vector2d(1, 1), 2.0, 0.3};
  CHECK(perimeter_distance(c, Eigen::Vector2d(1, 1)) == doctest::Approx(2 * kCircleRadius));
  CHECK(perimeter_distance(c, Eigen::Vector2d(1 + 2 * kCircleRadius, 1)) == doctest::Approx(0.0));

  ShapeSpec s{ShapeKind::square, Eigen::Vector2d(0, 0), 1.0, 0.0};
  CHECK(perimeter_distance(s, Eigen::Vector2d(kSquareSide / 2, 0.0)) == doctest::Approx(0.0));
  CHECK(perimeter_distance(s, Eigen::Vector2d(0, 0)) == doctest::Approx(kSquareSide / 2));
  CHECK(perimeter_distance(s, Eigen::Vector2d(kSquareSide, kSquareSide)) ==
        doctest::Approx(std::sqrt(2.0) * kSquareSide / 2));
  s.angle = std::numbers::pi / 4;
  CHECK(perimeter_distance(s, Eigen::Vector2d(kSquareSide / std::sqrt(2.0), 0)) ==
        doctest::Approx(0.0));

  ShapeSpec t{ShapeKind::triangle, Eigen::Vector2d(0, 0), 1.0, 0.0};
  // the centre sits at the inradius, half the circumradius, from every side
  CHECK(perimeter_distance(t, Eigen::Vector2d(0, 0)) == doctest::Approx(kTriangleCircumradius / 2));
}

TEST_CASE("scene labels") {
  CounterRng rng(5);
  const std::vector<ShapeSpec> apart{{ShapeKind::circle, Eigen::Vector2d(-1.5, -1.5), 1.0, 0.0},
                                     {ShapeKind::triangle, Eigen::Vector2d(1.5, 1.5), 1.0, 1.0}};
  const Sample s = make_shapes_scene(apart, 33, rng);
  CHECK(s.points.rows() == 33);
  CHECK(std::count(s.labels.begin(), s.labels.end(), 0) == 17);
  CHECK(std::count(s.labels.begin(), s.labels.end(), 2) == 16);
  for (int i = 0; i < 33; ++i) {
    const ShapeSpec& own = apart[s.labels[i] == 0 ? 0 : 1];
    CHECK(perimeter_distance(own, s.points.row(i).transpose()) <= 1e-12);
  }

  // two concentric equal circles overlap everywhere
  const std::vector<ShapeSpec> same_place{{ShapeKind::circle, Eigen::Vector2d(0, 0), 1.0, 0.0},
                                          {ShapeKind::circle, Eigen::Vector2d(0, 0), 1.0, 2.0}};
  const Sample o = make_shapes_scene(same_place, 10, rng);
  for (int l : o.labels) CHECK(l == kIntersectionLabel);

  CHECK_THROWS_AS(make_shapes_scene(apart, 7, rng), InputError);
  CHECK_THROWS_AS(make_shapes_scene({}, 10, rng), InputError);
}

TEST_CASE("scene labels are invariant under rigid placement") {
  const std::vector<ShapeSpec> base{{ShapeKind::square, Eigen::Vector2d(0.1, 0.0), 1.2, 0.4},
                                    {ShapeKind::circle, Eigen::Vector2d(0.3, 0.2), 1.5, 0.0},
                                    {ShapeKind::triangle, Eigen::Vector2d(-0.2, 0.1), 2.0, 2.0}};
  const Eigen::Matrix2d r = testutil::rotation2(0.9);
  const Eigen::Vector2d t(0.7, -0.4);
  std::vector<ShapeSpec> moved = base;
  for (auto& s : moved) {
    s.center = r * s.center + t;
    s.angle += 0.9;
  }
  CounterRng a(9), b(9);
  const Sample sa = make_shapes_scene(base, 64, a);
  const Sample sb = make_shapes_scene(moved, 64, b);
  CHECK(sa.labels == sb.labels);
  for (int i = 0; i < 64; ++i) {
    const Eigen::Vector2d want = r * sa.points.row(i).transpose() + t;
    CHECK((want - sb.points.row(i).transpose()).norm() <= 1e-12);
  }
}

TEST_CASE("shapes generator") {
  const Dataset a = gen_shapes(3, 50, 32);
  const Dataset b = gen_shapes(3, 50, 32);
  CHECK(same(a, b));
  CHECK(!same(a, gen_shapes(4, 50, 32)));
  CHECK(a.header.task == Task::shapes);
  CHECK(a.header.n_points == 32);
  CHECK_THROWS_AS(gen_shapes(1, 1, 7), InputError);

  const Dataset big = gen_shapes(11, 1000, 32);
  std::array<int, kShapeClasses> counts{};
  for (const auto& s : big.samples)
    for (int l : s.labels) {
      REQUIRE(l >= 0);
      REQUIRE(l < kShapeClasses);
      ++counts[l];
    }
  for (int c : counts) CHECK(c > 0);
}

TEST_CASE("ising generator") {
  const Dataset a = gen_ising(1, 200, 6);
  CHECK(same(a, gen_ising(1, 200, 6)));
  CHECK(a.header.n_samples == 200);
  for (const auto& s : a.samples) {
    CHECK(s.points.cwiseAbs().maxCoeff() <= 2.0);
    const PlanarPoints p = to_planar(s.points);
    CHECK(p.min_pairwise_distance() > kCollisionEps);
    const CorrelatorTargets t = make_targets(p);
    CHECK(t.log_energy == s.targets.log_energy);
    CHECK(t.log_spin == s.targets.log_spin);
  }
  CHECK_THROWS_AS(gen_ising(1, 10, 3), InputError);
  CHECK_THROWS_AS(gen_ising(1, 10, 22), InputError);

  const auto start = std::chrono::steady_clock::now();
  const Dataset big = gen_ising(2, 8192, 16);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(big.samples.size() == 8192);
  CHECK(secs < 60.0);
}

TEST_CASE("task names") {
  CHECK(parse_task("shapes") == Task::shapes);
  CHECK(to_string(Task::ising) == "ising");
  CHECK_THROWS_AS(parse_task("mnist"), InputError);
  CHECK(format_for_path("a/b.jsonl") == FileFormat::jsonl);
  CHECK(format_for_path("a/b.bin") == FileFormat::binary);
}

TEST_CASE("file round trips") {
  TempDir dir;
  const Dataset is = gen_ising(7, 30, 4);
  const Dataset sh = gen_shapes(7, 30, 16);
  for (const char* name : {"d.bin", "d.jsonl"}) {
    save_dataset(is, dir.path / name);
    CHECK(same(load_dataset(dir.path / name), is));
    save_dataset(sh, dir.path / name);
    CHECK(same(load_dataset(dir.path / name), sh));
  }
  save_dataset(is, dir.path / "a.bin");
  save_dataset(is, dir.path / "b.bin");
  CHECK(read_bytes(dir.path / "a.bin") == read_bytes(dir.path / "b.bin"));
  // an explicit format overrides the extension
  save_dataset(is, dir.path / "x.dat", FileFormat::jsonl);
  CHECK(read_bytes(dir.path / "x.dat").front() == '{');
  CHECK(same(load_dataset(dir.path / "x.dat"), is));
}

TEST_CASE("malformed files") {
  TempDir dir;
  const Dataset is = gen_ising(8, 10, 4);
  const fs::path bin = dir.path / "d.bin";
  save_dataset(is, bin);
  auto bytes = read_bytes(bin);

  auto cut = bytes;
  cut.resize(bytes.size() - 5);
  write_bytes(dir.path / "cut.bin", cut);
  CHECK_THROWS_AS(load_dataset(dir.path / "cut.bin"), ParseError);
  try {
    load_dataset(dir.path / "cut.bin");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }

  auto version = bytes;
  version[8] = 7;
  write_bytes(dir.path / "v.bin", version);
  CHECK_THROWS_AS(load_dataset(dir.path / "v.bin"), UnsupportedVersionError);

  auto extra = bytes;
  extra.push_back('x');
  write_bytes(dir.path / "extra.bin", extra);
  CHECK_THROWS_AS(load_dataset(dir.path / "extra.bin"), ParseError);

  const fs::path jl = dir.path / "d.jsonl";
  save_dataset(is, jl);
  auto text = read_bytes(jl);
  auto last_line = std::find(text.rbegin() + 1, text.rend(), '\n');
  std::vector<char> shortened(text.begin(), last_line.base());
  write_bytes(dir.path / "short.jsonl", shortened);
  CHECK_THROWS_AS(load_dataset(dir.path / "short.jsonl"), ParseError);

  std::string s(text.begin(), text.end());
  const auto pos = s.find("0x", s.find('\n'));
  s.replace(pos, 2, "zz");
  write_bytes(dir.path / "bad.jsonl", std::vector<char>(s.begin(), s.end()));
  try {
    load_dataset(dir.path / "bad.jsonl");
    CHECK(false);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  std::string hv(text.begin(), text.end());
  const auto vpos = hv.find("\"format_version\":1");
  REQUIRE(vpos != std::string::npos);
  hv.replace(vpos, 18, "\"format_version\":9");
  write_bytes(dir.path / "v.jsonl", std::vector<char>(hv.begin(), hv.end()));
  CHECK_THROWS_AS(load_dataset(dir.path / "v.jsonl"), UnsupportedVersionError);

  CHECK_THROWS_AS(load_dataset(dir.path / "missing.bin"), IoError);
  write_bytes(dir.path / "empty.bin", {});
  CHECK_THROWS_AS(load_dataset(dir.path / "empty.bin"), ParseError);
}
