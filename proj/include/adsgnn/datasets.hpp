#pragma once

// Synthetic datasets (shape segmentation, Ising correlators) and their
// on-disk container.
//
// Container layout, format_version 1:
//   binary:      "ADSGNNDS" | u32 format_version | u32 header_len | header JSON
//                then per sample: 2N f64 coordinates (x0,y0,x1,y1,...) followed by
//                  shapes: N i32 labels
//                  ising:  f64 log_energy, f64 log_spin
//                all little-endian.
//   JSON lines:  line 1 is the header object, each further line one sample
//                {"points":[...], "labels":[...]} or
//                {"points":[...], "log_energy":..., "log_spin":...};
//                reals are C99 hexadecimal float strings ("0x1.8p+1").
// Header keys: format_version, task ("shapes"|"ising"), n_samples, n_points, d, seed.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adsgnn/ising_cft.hpp"
#include "adsgnn/rng.hpp"

namespace adsgnn {

inline constexpr int kDatasetFormatVersion = 1;
inline constexpr double kShapeMembershipFraction = 0.015;

enum class Task { shapes, ising };

std::string to_string(Task t);
Task parse_task(const std::string& s);

enum class ShapeKind : int { circle = 0, square = 1, triangle = 2 };
inline constexpr int kIntersectionLabel = 3;
inline constexpr int kShapeClasses = 4;

// Shape sizes at scale 1.
inline constexpr double kCircleRadius = 0.2;
inline constexpr double kSquareSide = 0.4;
inline constexpr double kTriangleCircumradius = 0.24;

struct ShapeSpec {
  ShapeKind kind;
  Eigen::Vector2d center;
  double scale;  // multiplies the unit sizes above
  double angle;
};

/// Distance from p to the perimeter of the shape, computed in its local frame.
double perimeter_distance(const ShapeSpec& shape, const Eigen::Vector2d& p);

struct Sample {
  Eigen::MatrixXd points;  // N x d
  std::vector<int> labels;  // shapes only
  CorrelatorTargets targets;  // ising only
};

struct DatasetHeader {
  int format_version = kDatasetFormatVersion;
  Task task = Task::ising;
  std::uint64_t n_samples = 0;
  int n_points = 0;
  int d = 2;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Dataset {
  DatasetHeader header;
  std::vector<Sample> samples;
};

/// Samples points uniformly on the perimeters of the given shapes (evenly
/// split, remainder to the first shapes) and labels them; a point within
/// membership_fraction * scene diameter of two or more perimeters is labelled
/// intersection.
Sample make_shapes_scene(std::span<const ShapeSpec> shapes, int n_points, CounterRng& rng,
                         double membership_fraction = kShapeMembershipFraction);

/// 2-3 shapes per scene, scale in [0.5, 2], angle in [0, 2 pi), centre in [-2, 2]^2.
Dataset gen_shapes(std::uint64_t seed, std::size_t n_scenes, int pts_per_scene);

/// Uniform points in [-2, 2]^2 with collision rejection; targets from make_targets.
Dataset gen_ising(std::uint64_t seed, std::size_t n_samples, int n_points);

PlanarPoints to_planar(const Eigen::MatrixXd& points);

enum class FileFormat { binary, jsonl };

/// .jsonl extension selects JSON lines, anything else the binary variant.
FileFormat format_for_path(const std::filesystem::path& path);

void save_dataset(const Dataset& ds, const std::filesystem::path& path);
void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat fmt);

/// Detects the variant from the leading bytes.
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace adsgnn
