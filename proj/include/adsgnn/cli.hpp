#pragma once

// Command-line front end: gen, train, eval, audit, generalize, delta.
//
// Every command except delta writes manifest.json next to its outputs
// (gen: <out>.manifest.json). Options may also come from --config FILE, either
// key=value lines using the long flag names or a previous manifest.json whose
// "config" object is replayed. Precedence: defaults < config file < flags.
// ADSGNN_THREADS sets the default worker count.
//
// Exit codes: 0 success, 1 other failure, 2 usage error, 3 I/O or parse error.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "adsgnn/training.hpp"

namespace adsgnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitIo = 3;

/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string build_id();

enum class TransformKind { rotate, translate, scale, sct };

std::string to_string(TransformKind t);
TransformKind parse_transform(const std::string& s);

/// Comma separated list, e.g. "rotate,scale,sct".
std::vector<TransformKind> parse_transform_list(const std::string& s);

struct AuditOptions {
  std::vector<TransformKind> transforms{TransformKind::rotate, TransformKind::translate,
                                        TransformKind::scale};
  Eigen::Vector2d sct_b{0.0, 0.2};
  std::uint64_t seed = 0;
  std::size_t count = 0;  // 0: every sample
  int threads = 1;
};

struct AuditRow {
  TransformKind transform;
  std::size_t sample = 0;
  bool skipped = false;
  double max_abs = 0.0;
  double relative = 0.0;  // ||dev|| / ||original output||
  std::size_t labels = 0;  // classification heads only
  std::size_t flipped = 0;
};

struct AuditSummary {
  TransformKind transform;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
  double max_abs = 0.0;
  double max_relative = 0.0;
  double flip_rate = 0.0;  // flipped labels / labels over evaluated samples
};

struct AuditReport {
  std::vector<AuditRow> rows;  // transform-major, then sample order
  std::vector<AuditSummary> summary;
};

/// Random rotation (angle uniform in [0, 2 pi)), translation (uniform in
/// [-2, 2]^2) or scaling (log-uniform in [1/2, 2], z0 scaled along) per sample,
/// or the fixed special conformal map with vector sct_b. Ising outputs of models
/// with a scaling readout are compared after removing the depth factor, i.e.
/// the pooled invariant part is compared.
AuditReport audit(const Model& model, const GraphConfig& graph, const Dataset& data,
                  const AuditOptions& options);

}  // namespace adsgnn::cli
