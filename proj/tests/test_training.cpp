#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "adsgnn/errors.hpp"
#include "adsgnn/training.hpp"
#include "doctest.h"
#include "gradcheck.hpp"
#include "test_util.hpp"

using namespace adsgnn;

namespace {

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double fd_max_error(const std::function<double(const Mat&)>& f, const Mat& x, const Mat& g) {
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      Mat p = x, m = x;
      p(i, j) += h;
      m(i, j) -= h;
      worst = std::max(worst, std::abs((f(p) - f(m)) / (2 * h) - g(i, j)));
    }
  }
  return worst;
}

struct Small {
  GraphSet train;
  GraphSet val;
  Model model;
};

Small small_ising(int n_train, int n_val, Variant variant = Variant::adsgnn) {
  const Dataset ds = gen_ising(11, static_cast<std::size_t>(n_train + n_val), 2);
  const GraphConfig gc = default_graph_config(Task::ising);
  ModelSpec spec = default_model_spec(Task::ising, variant, 5);
  spec.hidden = 8;
  spec.layers = 2;
  return {prepare_graphs(ds, variant, gc, 0, static_cast<std::size_t>(n_train)),
          prepare_graphs(ds, variant, gc, static_cast<std::size_t>(n_train)), Model::init(spec)};
}

Small small_shapes(int n_train, int n_val, Variant variant = Variant::adsgnn) {
  const Dataset ds = gen_shapes(12, static_cast<std::size_t>(n_train + n_val), 16);
  GraphConfig gc = default_graph_config(Task::shapes);
  gc.k_lift = 4;
  gc.k_con = 4;
  ModelSpec spec = default_model_spec(Task::shapes, variant, 6);
  spec.hidden = 8;
  spec.layers = 2;
  return {prepare_graphs(ds, variant, gc, 0, static_cast<std::size_t>(n_train)),
          prepare_graphs(ds, variant, gc, static_cast<std::size_t>(n_train)), Model::init(spec)};
}

}  // namespace

TEST_CASE("relative l2") {
  CHECK(relative_l2(vec({1, 2}), vec({1, 2})) == 0.0);
  CHECK(relative_l2(vec({0, 0}), vec({3, 4})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(relative_l2(vec({6, 8}), vec({3, 4})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(relative_l2(vec({1, 1}), vec({1, 0})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(relative_l2(vec({1, 2}), vec({0, 0})), UndefinedLossError);
  CHECK_THROWS_AS(relative_l2(vec({1, 2, 3}), vec({1, 2})), InputError);

  CHECK(relative_l2_grad(vec({1, 2}), vec({1, 2})).isZero(0.0));
  const Vec t = vec({0.3, -1.2, 2.0});
  const Vec p = vec({0.1, -1.0, 2.5});
  const Vec g = relative_l2_grad(p, t);
  for (int i = 0; i < 3; ++i) {
    Vec a = p, b = p;
    a(i) += 1e-6;
    b(i) -= 1e-6;
    CHECK(std::abs((relative_l2(a, t) - relative_l2(b, t)) / 2e-6 - g(i)) < 1e-8);
  }
}

TEST_CASE("cross entropy") {
  const std::vector<int> zero{0};
  CHECK(cross_entropy(Mat::Zero(1, 4), zero) == doctest::Approx(std::log(4.0)).epsilon(1e-15));

  Mat sure = Mat::Zero(2, 3);
  sure(0, 1) = 800.0;
  sure(1, 2) = 800.0;
  const std::vector<int> right{1, 2};
  CHECK(cross_entropy(sure, right) < 1e-300);
  CHECK(std::isfinite(cross_entropy(sure, std::vector<int>{0, 0})));

  std::mt19937_64 g(3);
  Mat logits = Mat::NullaryExpr(5, 4, [&] { return std::normal_distribution<>(0, 2)(g); });
  const std::vector<int> labels{0, 3, 1, 2, 3};
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 4, 2, 0, 1, 3;
  const Mat permuted = perm * logits;
  std::vector<int> plabels(5);
  for (int i = 0; i < 5; ++i) plabels[static_cast<std::size_t>(perm.indices()(i))] = labels[static_cast<std::size_t>(i)];
  CHECK(cross_entropy(permuted, plabels) == doctest::Approx(cross_entropy(logits, labels)).epsilon(1e-14));

  const Mat grad = cross_entropy_grad(logits, labels);
  CHECK(grad.rowwise().sum().cwiseAbs().maxCoeff() < 1e-15);
  auto f = [&](const Mat& x) { return cross_entropy(x, labels); };
  CHECK(fd_max_error(f, logits, grad) < 1e-8);

  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0, 1, 4, 0, 0}), InputError);
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0, 1, -1, 0, 0}), InputError);
  CHECK_THROWS_AS(cross_entropy(logits, std::vector<int>{0, 1}), InputError);
}

TEST_CASE("adamw first steps in closed form") {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  cfg.weight_decay = 0.1;
  const std::vector<double> p0{0.5, -1.0, 2.0, 0.0};
  const std::vector<double> g{0.3, -4.0, 1e-3, 0.0};
  const std::vector<std::uint8_t> mask{1, 0, 1, 1};
  std::vector<double> p = p0;
  AdamState st;
  adamw_step(p, g, st, cfg, mask, 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double decayed = mask[i] ? p0[i] * (1 - cfg.learning_rate * cfg.weight_decay) : p0[i];
    const double expect = decayed - cfg.learning_rate * g[i] / (std::abs(g[i]) + kAdamEps);
    CHECK(p[i] == doctest::Approx(expect).epsilon(1e-14));
  }
  CHECK(st.step == 1);

  // Second step with the same gradient: bias-corrected moments equal g and g^2 again.
  const std::vector<double> p1 = p;
  adamw_step(p, g, st, cfg, mask, 2);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double decayed = mask[i] ? p1[i] * (1 - cfg.learning_rate * cfg.weight_decay) : p1[i];
    const double expect = decayed - cfg.learning_rate * g[i] / (std::abs(g[i]) + kAdamEps);
    CHECK(p[i] == doctest::Approx(expect).epsilon(1e-12));
  }

  cfg.weight_decay = 0.0;
  std::vector<double> q = p0;
  AdamState st2;
  adamw_step(q, std::vector<double>(4, 0.0), st2, cfg, mask, 1);
  CHECK(q == p0);

  CHECK_THROWS_AS(adamw_step(q, std::vector<double>(3, 0.0), st2, cfg, mask, 2), InputError);
  CHECK_THROWS_AS(adamw_step(q, g, st2, cfg, mask, 0), InputError);
}

TEST_CASE("adamw is elementwise") {
  TrainConfig cfg;
  cfg.learning_rate = 3e-3;
  std::mt19937_64 gen(9);
  std::normal_distribution<> nd;
  const std::size_t n = 50;
  std::vector<double> p(n), pp(n);
  std::vector<std::uint8_t> mask(n), pmask(n);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), gen);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = nd(gen);
    mask[i] = static_cast<std::uint8_t>(i % 3 != 0);
  }
  for (std::size_t i = 0; i < n; ++i) {
    pp[perm[i]] = p[i];
    pmask[perm[i]] = mask[i];
  }
  AdamState a, b;
  for (std::uint64_t step = 1; step <= 5; ++step) {
    std::vector<double> g(n), pg(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = nd(gen);
    for (std::size_t i = 0; i < n; ++i) pg[perm[i]] = g[i];
    adamw_step(p, g, a, cfg, mask, step);
    adamw_step(pp, pg, b, cfg, pmask, step);
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(pp[perm[i]] == p[i]);
}

TEST_CASE("train config validation") {
  TrainConfig ok;
  CHECK_NOTHROW(ok.validate());
  auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), InputError);
  };
  bad([](TrainConfig& c) { c.learning_rate = 0; });
  bad([](TrainConfig& c) { c.learning_rate = std::nan(""); });
  bad([](TrainConfig& c) { c.weight_decay = -1; });
  bad([](TrainConfig& c) { c.batch_size = 0; });
  bad([](TrainConfig& c) { c.max_epochs = 0; });
  bad([](TrainConfig& c) { c.patience = 0; });
  bad([](TrainConfig& c) { c.time_limit = -1; });
}

TEST_CASE("graph config") {
  const GraphConfig s = default_graph_config(Task::shapes);
  CHECK(s.k_lift == 16);
  CHECK(s.k_con == 16);
  const GraphConfig i = default_graph_config(Task::ising);
  CHECK(i.k_lift == 1);
  CHECK(i.k_con == 0);
  GraphConfig c{3, 5, 0.25};
  const GraphConfig r = GraphConfig::from_json(c.to_json());
  CHECK(r.k_lift == 3);
  CHECK(r.k_con == 5);
  CHECK(r.z0 == 0.25);

  Mat pts(4, 2);
  pts << 0, 0, 1, 0, 0, 1, 3, 3;
  const LiftedCloud full = prepare_graph(pts, Variant::adsgnn, {10, 0, kDefaultZ0});
  CHECK(full.edges.size() == 12);
  const LiftedCloud knn = prepare_graph(pts, Variant::egnn, {10, 1, kDefaultZ0});
  CHECK(knn.edges.size() == 4);
  const LiftedCloud wide = prepare_graph(pts, Variant::mpnn, {10, 99, kDefaultZ0});
  CHECK(wide.edges.size() == 12);
}

TEST_CASE("head and task must agree") {
  const Small s = small_ising(4, 2);
  const Model shapes_model = Model::init(default_model_spec(Task::shapes, Variant::adsgnn, 0));
  CHECK_THROWS_AS(evaluate(shapes_model, s.val), UsageError);
  CHECK_THROWS_AS(train(shapes_model, s.train, s.val, TrainConfig{}), UsageError);
  CHECK(head_for_task(Task::ising) == Head::ising);
  CHECK(head_for_task(Task::shapes) == Head::node_class);
  CHECK_THROWS_AS(train(s.model, GraphSet{}, s.val, TrainConfig{}), InputError);
  CHECK_THROWS_AS(train(s.model, s.train, GraphSet{}, TrainConfig{}), InputError);
  CHECK_THROWS_AS(evaluate(s.model, GraphSet{}), InputError);
}

TEST_CASE("evaluate") {
  const Small s = small_ising(1, 6);
  const EvalResult e = evaluate(s.model, s.val);
  CHECK(e.n == 6);
  CHECK(e.metric == e.loss);
  CHECK(e.loss == doctest::Approx(e.channel.sum()).epsilon(1e-14));
  CHECK(evaluate(s.model, s.val, 4).loss == e.loss);

  const Small t = small_shapes(1, 5);
  const EvalResult f = evaluate(t.model, t.val, 3);
  CHECK(f.metric >= 0.0);
  CHECK(f.metric <= 1.0);
  CHECK(f.loss > 0.0);
}

TEST_CASE("loss decreases on a fixed batch") {
  for (const Variant v : {Variant::adsgnn, Variant::egnn, Variant::mpnn}) {
    for (int task = 0; task < 3; ++task) {
      CAPTURE(to_string(v));
      CAPTURE(task);
      Small s = task == 1 ? small_shapes(8, 1, v) : small_ising(8, 1, v);
      if (task == 2) {
        // graph classification on the ising point clouds with synthetic labels
        ModelSpec spec = s.model.spec();
        spec.head = Head::graph_class;
        spec.out_dim = 3;
        s.model = Model::init(spec);
      }
      Model m = s.model;
      const auto mask = m.decay_mask();
      TrainConfig cfg;
      AdamState st;
      auto batch = [&](std::vector<double>* grad) {
        double loss = 0.0;
        for (std::size_t i = 0; i < s.train.size(); ++i) {
          const std::vector<int> labels =
              task == 1 ? s.train.labels[i] : std::vector<int>{static_cast<int>(i % 3)};
          const Eigen::Vector2d target = task == 0 ? s.train.targets[i] : Eigen::Vector2d::Zero();
          ForwardCache cache;
          Mat up;
          loss += testutil::task_loss(m, s.train.graphs[i], labels, target, &up, &cache);
          if (grad) backward(m, cache, up, *grad);
        }
        return loss;
      };
      const double before = batch(nullptr);
      for (std::uint64_t step = 1; step <= 10; ++step) {
        std::vector<double> grad(m.size(), 0.0);
        batch(&grad);
        adamw_step(m.params(), grad, st, cfg, mask, step);
      }
      CHECK(batch(nullptr) < before);
    }
  }
}

TEST_CASE("training is deterministic") {
  const Small s = small_ising(40, 10);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 3;
  cfg.seed = 4;
  const TrainResult a = train(s.model, s.train, s.val, cfg);
  const TrainResult b = train(s.model, s.train, s.val, cfg);
  cfg.threads = 4;
  const TrainResult c = train(s.model, s.train, s.val, cfg);
  CHECK(a.model.params() == b.model.params());
  CHECK(a.model.params() == c.model.params());
  CHECK(a.metrics.records == b.metrics.records);
  CHECK(a.metrics.records == c.metrics.records);
  CHECK(a.metrics.records.size() == 6);

  cfg.seed = 5;
  const TrainResult d = train(s.model, s.train, s.val, cfg);
  CHECK(d.model.params() != a.model.params());
}

TEST_CASE("best model and early stopping") {
  const Small s = small_shapes(16, 4);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 200;
  cfg.patience = 1;
  cfg.learning_rate = 0.05;
  std::vector<double> seen;
  const TrainResult r = train(s.model, s.train, s.val, cfg, [&](const EpochRecord& tr, const EpochRecord& va) {
    CHECK(tr.split == "train");
    CHECK(va.split == "val");
    CHECK(tr.epoch == va.epoch);
    seen.push_back(va.loss);
  });
  CHECK(r.metrics.early_stopped);
  CHECK(r.metrics.epochs_run < cfg.max_epochs);
  CHECK(r.metrics.epochs_run == r.metrics.best_epoch + cfg.patience);
  CHECK(static_cast<int>(seen.size()) == r.metrics.epochs_run);
  CHECK(r.metrics.best_val_loss == *std::min_element(seen.begin(), seen.end()));
  CHECK(r.metrics.best_val_loss == seen[static_cast<std::size_t>(r.metrics.best_epoch - 1)]);
  const EvalResult e = evaluate(r.model, s.val);
  CHECK(e.loss == r.metrics.best_val_loss);
  CHECK(e.metric == r.metrics.best_val_metric);

  cfg.patience = 1000;
  cfg.max_epochs = 3;
  const TrainResult full = train(s.model, s.train, s.val, cfg);
  CHECK_FALSE(full.metrics.early_stopped);
  CHECK_FALSE(full.metrics.time_limited);
  CHECK(full.metrics.epochs_run == 3);

  cfg.time_limit = 1e-9;
  const TrainResult brief = train(s.model, s.train, s.val, cfg);
  CHECK(brief.metrics.time_limited);
  CHECK(brief.metrics.epochs_run == 1);
}

TEST_CASE("metrics output") {
  const Small s = small_ising(8, 4);
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.max_epochs = 2;
  const TrainResult r = train(s.model, s.train, s.val, cfg);
  for (const auto& rec : r.metrics.records) {
    CHECK(std::isfinite(rec.delta_sigma));
    CHECK(std::isfinite(rec.delta_epsilon));
  }

  const auto path = std::filesystem::temp_directory_path() / "adsgnn_test_metrics.csv";
  write_metrics_csv(r.metrics, path);
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,split,loss,metric,delta_sigma,delta_epsilon");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::istringstream ss(line);
    std::string epoch, split, loss;
    std::getline(ss, epoch, ',');
    std::getline(ss, split, ',');
    std::getline(ss, loss, ',');
    const auto& rec = r.metrics.records[static_cast<std::size_t>(rows - 1)];
    CHECK(std::stoi(epoch) == rec.epoch);
    CHECK(split == rec.split);
    CHECK(std::stod(loss) == rec.loss);
  }
  CHECK(rows == 4);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(write_metrics_csv(r.metrics, "/nonexistent_dir/m.csv"), IoError);

  const auto j = metrics_summary(r.metrics);
  CHECK(j.at("epochs_run") == 2);
  CHECK(j.at("best_epoch") == r.metrics.best_epoch);
  CHECK(j.at("best_val_loss").get<double>() == r.metrics.best_val_loss);
  CHECK(j.contains("delta_sigma"));

  const Small t = small_ising(8, 4, Variant::egnn);
  const TrainResult q = train(t.model, t.train, t.val, cfg);
  CHECK(std::isnan(q.metrics.records.front().delta_sigma));
  CHECK(metrics_summary(q.metrics).at("delta_sigma").is_null());
}
