#pragma once

// Message-passing networks on lifted point clouds (MPNN, EGNN-style, AdS-GNN)
// with explicit reverse mode.
//
// Every layer: m_ij = psi_e(h_i, h_j, c_ij), m_i = sum_j m_ij, h_i' = psi_h(h_i, m_i),
// psi_e and psi_h are input -> hidden -> hidden -> hidden MLPs with SiLU.
// Conditioning c_ij: adsgnn proper distance, egnn |x_i - x_j|, mpnn x_i - x_j.
//
// All parameters live in one flat vector. Dense weights are stored row-major
// (fan_in x fan_out) followed by the bias.
//
// Checkpoint file, format_version 1:
//   "ADSGNNCK" | u32 format_version | u32 header_len | header JSON | n_params f64
// header keys: format_version, variant, head, widths {in_features, pos_dim,
// hidden, layers, out_dim}, seed, n_params, delta_sigma, delta_epsilon, extra.

#include <array>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adsgnn/lifting.hpp"
#include "json.hpp"

namespace adsgnn {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr int kCheckpointFormatVersion = 1;

enum class Variant { mpnn, egnn, adsgnn };
enum class Head { graph_class, node_class, ising };

std::string to_string(Variant v);
std::string to_string(Head h);
Variant parse_variant(const std::string& s);
Head parse_head(const std::string& s);

struct ModelSpec {
  Variant variant = Variant::adsgnn;
  Head head = Head::ising;
  int in_features = 0;
  int pos_dim = 2;
  int hidden = 32;
  int layers = 4;
  int out_dim = 2;  // classes, or the two ising channels (sigma, epsilon)
  std::uint64_t seed = 0;

  int cond_dim() const { return variant == Variant::mpnn ? pos_dim : 1; }
  // The scaling readout needs depths, which only the lifted model has.
  bool has_delta() const { return head == Head::ising && variant == Variant::adsgnn; }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct DenseSlot {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
};

using MlpSlot = std::array<DenseSlot, 3>;

struct ParamLayout {
  DenseSlot encoder;
  std::vector<MlpSlot> message;
  std::vector<MlpSlot> update;
  MlpSlot head;
  std::size_t delta = 0;  // delta_sigma, delta_epsilon when present
  std::size_t total = 0;
};

ParamLayout make_layout(const ModelSpec& spec);

class Model {
 public:
  /// Weights N(0, 1/fan_in), biases 0, encoder bias N(0, 1), deltas 0.5.
  static Model init(const ModelSpec& spec);

  Model(const ModelSpec& spec, std::vector<double> params);

  const ModelSpec& spec() const { return spec_; }
  const ParamLayout& layout() const { return layout_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }

  /// 1 for dense weights, 0 for biases and deltas.
  std::vector<std::uint8_t> decay_mask() const;

  /// NaN when the model has no scaling readout.
  double delta_sigma() const;
  double delta_epsilon() const;
  void set_deltas(double sigma, double epsilon);

 private:
  ModelSpec spec_;
  ParamLayout layout_;
  std::vector<double> params_;
};

struct MlpCache {
  RowMat z1, a1, z2, a2;
};

struct LayerCache {
  RowMat h;
  MlpCache message;
  RowMat m;
  MlpCache update;
};

struct ForwardCache {
  bool valid = false;
  ModelSpec spec;
  int n_nodes = 0;
  std::vector<Edge> edges;
  RowMat cond;
  RowMat input;
  std::vector<LayerCache> layers;
  RowMat h_final;
  RowMat head_in;
  MlpCache head;
  double sum_log_z = 0.0;
};

struct Output {
  // graph_class 1 x C, node_class N x C, ising 1 x 2 (log Pred_sigma, log Pred_epsilon)
  Mat values;
  Eigen::Vector2d pooled = Eigen::Vector2d::Zero();  // ising only
};

/// Node features are g.lifted_features (N x in_features).
Output forward(const Model& model, const LiftedCloud& g, ForwardCache* cache = nullptr);

/// log Pred_a = pooled_a - delta_a * sum_i ln zhat_i.
Eigen::Vector2d ising_head(const Eigen::Vector2d& pooled, const Vec& zhat, double delta_sigma,
                           double delta_epsilon);

/// Accumulates d(loss)/d(params) into grad, given d(loss)/d(values) with the
/// shape of Output::values. Depths and positions receive no gradient.
void backward(const Model& model, const ForwardCache& cache, const Mat& upstream,
              std::vector<double>& grad);

struct Checkpoint {
  Model model;
  nlohmann::json extra;
};

void save_checkpoint(const Model& model, const std::filesystem::path& path,
                     const nlohmann::json& extra = nlohmann::json::object());
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace adsgnn
