#include "adsgnn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "adsgnn/parallel.hpp"
#include "adsgnn/rng.hpp"

namespace adsgnn {

using json = nlohmann::json;

namespace {

struct BatchLoss {
  double loss = 0.0;
  Eigen::Vector2d channel = Eigen::Vector2d::Zero();
  std::size_t correct = 0;
  std::size_t points = 0;
  std::vector<Mat> upstream;
};

void check_labels(const Mat& logits, std::span<const int> labels) {
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw InputError("cross_entropy: one label per row required");
  }
  for (int l : labels) {
    if (l < 0 || l >= logits.cols()) throw InputError("cross_entropy: label out of range");
  }
}

// Sum over rows of -log softmax[label]; optionally writes softmax - onehot.
double cross_entropy_sum(const Mat& logits, std::span<const int> labels, Mat* d_logits,
                         std::size_t* correct) {
  check_labels(logits, labels);
  double total = 0.0;
  if (d_logits != nullptr) d_logits->resize(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row(r);
    const double mx = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - mx).exp().matrix();
    const double s = e.sum();
    const int y = labels[static_cast<std::size_t>(r)];
    total += -(row(y) - mx - std::log(s));
    if (d_logits != nullptr) {
      d_logits->row(r) = e / s;
      (*d_logits)(r, y) -= 1.0;
    }
    if (correct != nullptr) {
      Eigen::Index best = 0;
      row.maxCoeff(&best);
      if (best == y) ++*correct;
    }
  }
  return total;
}

BatchLoss batch_loss(const GraphSet& data, std::span<const std::size_t> index,
                     const std::vector<Output>& outputs, bool want_grad) {
  BatchLoss b;
  const std::size_t n = index.size();
  if (want_grad) b.upstream.resize(n);
  if (data.task == Task::ising) {
    Vec pred[2] = {Vec(static_cast<Eigen::Index>(n)), Vec(static_cast<Eigen::Index>(n))};
    Vec target[2] = {Vec(static_cast<Eigen::Index>(n)), Vec(static_cast<Eigen::Index>(n))};
    for (std::size_t s = 0; s < n; ++s) {
      for (int a = 0; a < 2; ++a) {
        pred[a](static_cast<Eigen::Index>(s)) = outputs[s].values(0, a);
        target[a](static_cast<Eigen::Index>(s)) = data.targets[index[s]](a);
      }
    }
    for (int a = 0; a < 2; ++a) {
      b.channel(a) = relative_l2(pred[a], target[a]);
    }
    b.loss = b.channel(0) + b.channel(1);
    if (want_grad) {
      const Vec g0 = relative_l2_grad(pred[0], target[0]);
      const Vec g1 = relative_l2_grad(pred[1], target[1]);
      for (std::size_t s = 0; s < n; ++s) {
        Mat u(1, 2);
        u << g0(static_cast<Eigen::Index>(s)), g1(static_cast<Eigen::Index>(s));
        b.upstream[s] = u;
      }
    }
  } else {
    for (std::size_t s = 0; s < n; ++s) b.points += data.labels[index[s]].size();
    if (b.points == 0) throw InputError("batch has no labelled points");
    const double inv = 1.0 / static_cast<double>(b.points);
    double total = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      Mat d;
      total += cross_entropy_sum(outputs[s].values, data.labels[index[s]], want_grad ? &d : nullptr,
                                 &b.correct);
      if (want_grad) b.upstream[s] = d * inv;
    }
    b.loss = total * inv;
  }
  return b;
}

void check_set(const Model& model, const GraphSet& data) {
  const Head want = head_for_task(data.task);
  if (model.spec().head != want) {
    throw UsageError("model head " + to_string(model.spec().head) + " does not fit task " +
                     to_string(data.task));
  }
}

}  // namespace

double relative_l2(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) throw InputError("relative_l2: length mismatch");
  const double tn = target.norm();
  if (!(tn > 0.0)) throw UndefinedLossError("relative_l2: target has zero norm");
  return (pred - target).norm() / tn;
}

Vec relative_l2_grad(const Vec& pred, const Vec& target) {
  if (pred.size() != target.size()) throw InputError("relative_l2: length mismatch");
  const double tn = target.norm();
  if (!(tn > 0.0)) throw UndefinedLossError("relative_l2: target has zero norm");
  const Vec diff = pred - target;
  const double dn = diff.norm();
  if (dn == 0.0) return Vec::Zero(pred.size());
  return diff / (dn * tn);
}

double cross_entropy(const Mat& logits, std::span<const int> labels) {
  if (logits.rows() == 0) throw InputError("cross_entropy: empty batch");
  return cross_entropy_sum(logits, labels, nullptr, nullptr) / static_cast<double>(logits.rows());
}

Mat cross_entropy_grad(const Mat& logits, std::span<const int> labels) {
  if (logits.rows() == 0) throw InputError("cross_entropy: empty batch");
  Mat d;
  cross_entropy_sum(logits, labels, &d, nullptr);
  return d / static_cast<double>(logits.rows());
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
  if (weight_decay < 0.0) throw InputError("weight_decay must be non-negative");
  if (batch_size < 1) throw InputError("batch_size must be >= 1");
  if (max_epochs < 1) throw InputError("max_epochs must be >= 1");
  if (patience < 1) throw InputError("patience must be >= 1");
  if (!(time_limit >= 0.0)) throw InputError("time_limit must be non-negative");
}

void adamw_step(std::vector<double>& params, const std::vector<double>& grads, AdamState& state,
                const TrainConfig& config, const std::vector<std::uint8_t>& decay_mask,
                std::uint64_t step_index) {
  const std::size_t n = params.size();
  if (grads.size() != n || decay_mask.size() != n) throw InputError("adamw_step: size mismatch");
  if (step_index < 1) throw InputError("adamw_step: steps are numbered from 1");
  if (state.m.empty()) state.m.assign(n, 0.0);
  if (state.v.empty()) state.v.assign(n, 0.0);
  if (state.m.size() != n || state.v.size() != n) throw InputError("adamw_step: moment size mismatch");
  const double t = static_cast<double>(step_index);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  const double lr = config.learning_rate;
  const double decay = 1.0 - lr * config.weight_decay;
  for (std::size_t i = 0; i < n; ++i) {
    if (decay_mask[i] != 0) params[i] *= decay;
    const double g = grads[i];
    state.m[i] = kAdamBeta1 * state.m[i] + (1.0 - kAdamBeta1) * g;
    state.v[i] = kAdamBeta2 * state.v[i] + (1.0 - kAdamBeta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
  }
  state.step = step_index;
}

json GraphConfig::to_json() const { return {{"k_lift", k_lift}, {"k_con", k_con}, {"z0", z0}}; }

GraphConfig GraphConfig::from_json(const json& j) {
  GraphConfig c;
  c.k_lift = j.at("k_lift").get<int>();
  c.k_con = j.at("k_con").get<int>();
  c.z0 = j.at("z0").get<double>();
  return c;
}

GraphConfig default_graph_config(Task task) {
  GraphConfig c;
  if (task == Task::shapes) {
    c.k_lift = 16;
    c.k_con = 16;
  } else {
    c.k_lift = 1;
    c.k_con = 0;
  }
  return c;
}

LiftedCloud prepare_graph(const Mat& points, Variant variant, const GraphConfig& config) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw InputError("prepare_graph: need at least two points");
  if (config.k_lift < 1) throw InputError("prepare_graph: k_lift must be >= 1");
  PointCloud cloud{points, Mat(n, 0)};
  LiftedCloud g = ads_embed(cloud, std::min(config.k_lift, n - 1), config.z0);
  const int k_con = config.k_con <= 0 ? n - 1 : std::min(config.k_con, n - 1);
  g.edges = build_edges(g.positions, k_con,
                        variant == Variant::adsgnn ? Metric::ads_proper : Metric::euclidean);
  return g;
}

GraphSet prepare_graphs(const Dataset& ds, Variant variant, const GraphConfig& config,
                        std::size_t begin, std::size_t end, int threads) {
  end = std::min(end, ds.samples.size());
  if (begin > end) throw InputError("prepare_graphs: empty range");
  GraphSet out;
  out.task = ds.header.task;
  const std::size_t n = end - begin;
  out.graphs.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    out.graphs[i] = prepare_graph(ds.samples[begin + i].points, variant, config);
  });
  for (std::size_t i = begin; i < end; ++i) {
    const Sample& s = ds.samples[i];
    if (out.task == Task::shapes) {
      out.labels.push_back(s.labels);
    } else {
      out.targets.emplace_back(s.targets.log_spin, s.targets.log_energy);
    }
  }
  return out;
}

Head head_for_task(Task task) { return task == Task::shapes ? Head::node_class : Head::ising; }

ModelSpec default_model_spec(Task task, Variant variant, std::uint64_t seed) {
  ModelSpec s;
  s.variant = variant;
  s.head = head_for_task(task);
  s.in_features = 0;
  s.pos_dim = 2;
  s.out_dim = task == Task::shapes ? kShapeClasses : 2;
  s.seed = seed;
  return s;
}

EvalResult evaluate(const Model& model, const GraphSet& data, int threads) {
  check_set(model, data);
  if (data.size() == 0) throw InputError("evaluate: empty dataset");
  std::vector<Output> outputs(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) { outputs[i] = forward(model, data.graphs[i]); });
  std::vector<std::size_t> index(data.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;
  const BatchLoss b = batch_loss(data, index, outputs, false);
  EvalResult r;
  r.loss = b.loss;
  r.n = data.size();
  r.channel = b.channel;
  r.metric = data.task == Task::shapes
                 ? static_cast<double>(b.correct) / static_cast<double>(b.points)
                 : b.loss;
  return r;
}

void write_metrics_csv(const Metrics& metrics, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,split,loss,metric,delta_sigma,delta_epsilon\n";
  out.precision(17);
  for (const auto& r : metrics.records) {
    out << r.epoch << ',' << r.split << ',' << r.loss << ',' << r.metric << ',' << r.delta_sigma
        << ',' << r.delta_epsilon << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

json metrics_summary(const Metrics& m) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"epochs_run", m.epochs_run},
            {"best_epoch", m.best_epoch},
            {"best_val_loss", num(m.best_val_loss)},
            {"best_val_metric", num(m.best_val_metric)},
            {"early_stopped", m.early_stopped},
            {"time_limited", m.time_limited}};
  for (auto it = m.records.rbegin(); it != m.records.rend(); ++it) {
    if (it->split == "val" && it->epoch == m.best_epoch) {
      j["delta_sigma"] = num(it->delta_sigma);
      j["delta_epsilon"] = num(it->delta_epsilon);
      break;
    }
  }
  return j;
}

TrainResult train(const Model& initial, const GraphSet& train_set, const GraphSet& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() == 0) throw InputError("train: empty training set");
  if (val_set.size() == 0) throw InputError("train: empty validation set");
  check_set(initial, train_set);
  check_set(initial, val_set);

  Model model = initial;
  const std::vector<std::uint8_t> mask = model.decay_mask();
  AdamState adam;
  Metrics metrics;
  std::vector<double> best = model.params();
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::uint64_t step = 0;
  const CounterRng root(config.seed);
  const std::size_t n = train_set.size();
  const auto bs = static_cast<std::size_t>(config.batch_size);

  std::vector<std::size_t> perm(n);
  std::vector<ForwardCache> caches(bs);
  std::vector<Output> outputs(bs);
  std::vector<std::vector<double>> sample_grads(bs);
  std::vector<double> grad(model.size());

  using Clock = std::chrono::steady_clock;
  const Clock::time_point started = Clock::now();
  double longest_epoch = 0.0;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const Clock::time_point epoch_start = Clock::now();
    if (config.time_limit > 0.0 && epoch > 1 &&
        std::chrono::duration<double>(epoch_start - started).count() + longest_epoch >
            config.time_limit) {
      metrics.time_limited = true;
      break;
    }
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    CounterRng rng = root.split(static_cast<std::uint64_t>(epoch));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    std::size_t correct = 0;
    std::size_t points = 0;
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t m = std::min(bs, n - start);
      const std::span<const std::size_t> index(perm.data() + start, m);
      outputs.resize(m);
      parallel_for(m, config.threads, [&](std::size_t s) {
        outputs[s] = forward(model, train_set.graphs[index[s]], &caches[s]);
      });
      const BatchLoss b = batch_loss(train_set, index, outputs, true);
      parallel_for(m, config.threads, [&](std::size_t s) {
        sample_grads[s].assign(model.size(), 0.0);
        backward(model, caches[s], b.upstream[s], sample_grads[s]);
      });
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t s = 0; s < m; ++s) {
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += sample_grads[s][i];
      }
      adamw_step(model.params(), grad, adam, config, mask, ++step);
      loss_sum += b.loss;
      ++batches;
      correct += b.correct;
      points += b.points;
    }

    EpochRecord tr;
    tr.epoch = epoch;
    tr.split = "train";
    tr.loss = loss_sum / static_cast<double>(batches);
    tr.metric = train_set.task == Task::shapes
                    ? static_cast<double>(correct) / static_cast<double>(points)
                    : tr.loss;
    tr.delta_sigma = model.delta_sigma();
    tr.delta_epsilon = model.delta_epsilon();

    const EvalResult v = evaluate(model, val_set, config.threads);
    EpochRecord va = tr;
    va.split = "val";
    va.loss = v.loss;
    va.metric = v.metric;
    metrics.records.push_back(tr);
    metrics.records.push_back(va);
    metrics.epochs_run = epoch;
    if (on_epoch) on_epoch(tr, va);
    longest_epoch =
        std::max(longest_epoch, std::chrono::duration<double>(Clock::now() - epoch_start).count());

    if (v.loss < best_val) {
      best_val = v.loss;
      best = model.params();
      metrics.best_epoch = epoch;
      metrics.best_val_loss = v.loss;
      metrics.best_val_metric = v.metric;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      metrics.early_stopped = true;
      break;
    }
  }
  return {Model(model.spec(), std::move(best)), std::move(metrics)};
}

}  // namespace adsgnn
