#pragma once

// Losses, AdamW and the training loop.
//
// Ising objective: sum over the two channels of the relative L2 error of the
// log correlators over a batch. Shapes objective: mean per-point cross entropy.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adsgnn/datasets.hpp"
#include "adsgnn/model.hpp"

namespace adsgnn {

/// ||pred - target|| / ||target||. Throws UndefinedLossError for a zero target.
double relative_l2(const Vec& pred, const Vec& target);

/// Gradient of relative_l2 with respect to pred (zero where pred == target).
Vec relative_l2_grad(const Vec& pred, const Vec& target);

/// Mean over rows of -log softmax(logits)[label], max-subtracted.
double cross_entropy(const Mat& logits, std::span<const int> labels);

/// d cross_entropy / d logits = (softmax - onehot) / rows.
Mat cross_entropy_grad(const Mat& logits, std::span<const int> labels);

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  int batch_size = 32;
  int max_epochs = 100;
  int patience = 20;
  std::uint64_t seed = 0;
  int threads = 1;
  // Seconds of wall clock; no epoch is started that would end past it. 0: no limit.
  double time_limit = 0.0;

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

/// One decoupled-weight-decay Adam step with bias correction. Entries with
/// decay_mask 0 are not decayed. step_index is the 1-based step number.
void adamw_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
                const TrainConfig& config, const std::vector<std::uint8_t>& decay_mask,
                std::uint64_t step_index);

/// Lifting and connectivity. k_con <= 0 means fully connected; k_lift and k_con
/// are clamped to N - 1.
struct GraphConfig {
  int k_lift = 1;
  int k_con = 0;
  double z0 = kDefaultZ0;

  nlohmann::json to_json() const;
  static GraphConfig from_json(const nlohmann::json& j);
};

GraphConfig default_graph_config(Task task);

/// adsgnn connects by proper distance, the baselines by euclidean distance.
LiftedCloud prepare_graph(const Mat& points, Variant variant, const GraphConfig& config);

struct GraphSet {
  Task task = Task::ising;
  std::vector<LiftedCloud> graphs;
  std::vector<std::vector<int>> labels;    // shapes
  std::vector<Eigen::Vector2d> targets;    // ising: (log sigma, log epsilon)

  std::size_t size() const { return graphs.size(); }
};

/// Samples [begin, end) of the dataset.
GraphSet prepare_graphs(const Dataset& ds, Variant variant, const GraphConfig& config,
                        std::size_t begin = 0, std::size_t end = static_cast<std::size_t>(-1),
                        int threads = 1);

Head head_for_task(Task task);
ModelSpec default_model_spec(Task task, Variant variant, std::uint64_t seed);

struct EvalResult {
  double loss = 0.0;
  double metric = 0.0;  // shapes: per-point accuracy; ising: same as loss
  Eigen::Vector2d channel = Eigen::Vector2d::Zero();  // ising: relative L2 of (sigma, epsilon)
  std::size_t n = 0;
};

EvalResult evaluate(const Model& model, const GraphSet& data, int threads = 1);

struct EpochRecord {
  int epoch = 0;
  std::string split;
  double loss = 0.0;
  double metric = 0.0;
  double delta_sigma = 0.0;
  double delta_epsilon = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct Metrics {
  std::vector<EpochRecord> records;
  int best_epoch = 0;
  double best_val_loss = 0.0;
  double best_val_metric = 0.0;
  int epochs_run = 0;
  bool early_stopped = false;
  bool time_limited = false;
};

void write_metrics_csv(const Metrics& metrics, const std::filesystem::path& path);
nlohmann::json metrics_summary(const Metrics& metrics);

struct TrainResult {
  Model model;  // parameters with the lowest validation loss
  Metrics metrics;
};

using EpochCallback = std::function<void(const EpochRecord& train, const EpochRecord& val)>;

TrainResult train(const Model& initial, const GraphSet& train_set, const GraphSet& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace adsgnn
