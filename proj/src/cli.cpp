#include "adsgnn/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "adsgnn/parallel.hpp"

#ifndef ADSGNN_BUILD_ID
#define ADSGNN_BUILD_ID "unknown"
#endif

namespace adsgnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::string build_id() { return ADSGNN_BUILD_ID; }

std::string to_string(TransformKind t) {
  switch (t) {
    case TransformKind::rotate: return "rotate";
    case TransformKind::translate: return "translate";
    case TransformKind::scale: return "scale";
    case TransformKind::sct: return "sct";
  }
  return "?";
}

TransformKind parse_transform(const std::string& s) {
  for (auto t : {TransformKind::rotate, TransformKind::translate, TransformKind::scale,
                 TransformKind::sct}) {
    if (to_string(t) == s) return t;
  }
  throw InputError("unknown transform '" + s + "'");
}

std::vector<TransformKind> parse_transform_list(const std::string& s) {
  std::vector<TransformKind> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(parse_transform(item));
  }
  if (out.empty()) throw InputError("empty transform list");
  return out;
}

namespace {

double sum_log(const Vec& z) { return z.array().log().sum(); }

int argmax_row(const Mat& m, Eigen::Index r) {
  Eigen::Index c = 0;
  m.row(r).maxCoeff(&c);
  return static_cast<int>(c);
}

Mat transformed_points(const Mat& pts, TransformKind kind, CounterRng& rng,
                       const Eigen::Vector2d& b, GraphConfig& graph) {
  Mat p = pts;
  switch (kind) {
    case TransformKind::rotate: {
      const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
      Eigen::Matrix2d r;
      r << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      p = pts * r.transpose();
      break;
    }
    case TransformKind::translate: {
      Eigen::RowVector2d t(rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0));
      p.rowwise() += t;
      break;
    }
    case TransformKind::scale: {
      const double lambda = std::exp(rng.uniform(std::log(0.5), std::log(2.0)));
      p *= lambda;
      graph.z0 *= lambda;
      break;
    }
    case TransformKind::sct: {
      const Signature sig = Signature::euclidean(2);
      for (Eigen::Index i = 0; i < p.rows(); ++i) {
        p.row(i) = special_conformal(pts.row(i).transpose(), b, sig).point.transpose();
      }
      break;
    }
  }
  return p;
}

}  // namespace

AuditReport audit(const Model& model, const GraphConfig& graph, const Dataset& data,
                  const AuditOptions& options) {
  if (options.transforms.empty()) throw InputError("audit: no transforms");
  if (data.header.d != 2) throw InputError("audit: planar datasets only");
  const ModelSpec& spec = model.spec();
  const std::size_t n = options.count == 0 ? data.samples.size()
                                           : std::min(options.count, data.samples.size());
  const std::size_t nt = options.transforms.size();
  AuditReport report;
  report.rows.resize(nt * n);
  parallel_for(n, options.threads, [&](std::size_t s) {
    const Mat& pts = data.samples[s].points;
    const LiftedCloud g0 = prepare_graph(pts, spec.variant, graph);
    const Mat v0 = forward(model, g0).values;
    const double s0 = sum_log(g0.zhat);
    for (std::size_t t = 0; t < nt; ++t) {
      AuditRow& row = report.rows[t * n + s];
      row.transform = options.transforms[t];
      row.sample = s;
      CounterRng rng = CounterRng(options.seed).split(s).split(t);
      GraphConfig g = graph;
      Mat p;
      try {
        p = transformed_points(pts, row.transform, rng, options.sct_b, g);
      } catch (const SingularLocusError&) {
        row.skipped = true;
        continue;
      }
      const LiftedCloud g1 = prepare_graph(p, spec.variant, g);
      Mat v1 = forward(model, g1).values;
      if (spec.has_delta()) {
        const double shift = sum_log(g1.zhat) - s0;
        v1(0, 0) += model.delta_sigma() * shift;
        v1(0, 1) += model.delta_epsilon() * shift;
      }
      const Mat dev = v1 - v0;
      row.max_abs = dev.cwiseAbs().maxCoeff();
      const double norm = v0.norm();
      row.relative = norm > 0.0 ? dev.norm() / norm : row.max_abs;
      if (spec.head != Head::ising) {
        row.labels = static_cast<std::size_t>(v0.rows());
        for (Eigen::Index r = 0; r < v0.rows(); ++r) {
          if (argmax_row(v0, r) != argmax_row(v1, r)) ++row.flipped;
        }
      }
    }
  });
  for (std::size_t t = 0; t < nt; ++t) {
    AuditSummary sum;
    sum.transform = options.transforms[t];
    std::size_t labels = 0, flipped = 0;
    for (std::size_t s = 0; s < n; ++s) {
      const AuditRow& row = report.rows[t * n + s];
      if (row.skipped) {
        ++sum.skipped;
        continue;
      }
      ++sum.evaluated;
      sum.max_abs = std::max(sum.max_abs, row.max_abs);
      sum.max_relative = std::max(sum.max_relative, row.relative);
      labels += row.labels;
      flipped += row.flipped;
    }
    sum.flip_rate = labels > 0 ? static_cast<double>(flipped) / static_cast<double>(labels) : 0.0;
    report.summary.push_back(sum);
  }
  return report;
}

namespace {

struct GenOpts {
  std::string task;
  int n_points = 0;
  std::uint64_t n_samples = 8192;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainOpts {
  std::string variant = "adsgnn";
  std::string data;
  std::string val_data;
  std::uint64_t val_count = 512;
  std::string out;
  double lr = 1e-3;
  double weight_decay = 1e-2;
  int batch_size = 32;
  int epochs = 100;
  int patience = 20;
  double time_limit = 0.0;
  std::uint64_t seed = 0;
  int hidden = 32;
  int layers = 4;
  int k_lift = 0;
  int k_con = -1;
  double z0 = kDefaultZ0;
  int threads = 1;
};

struct EvalOpts {
  std::string checkpoint;
  std::string data;
  std::string out;
  double coord_scale = 1.0;
  int threads = 1;
};

struct AuditOpts {
  std::string checkpoint;
  std::string data;
  std::string out;
  std::string transforms = "rotate,translate,scale,sct";
  std::vector<double> sct_b{0.0, 0.2};
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct GeneralizeOpts {
  std::vector<std::string> checkpoints;
  std::vector<std::string> data;
  std::string out;
  double coord_scale = 1.0;
  int threads = 1;
};

struct DeltaOpts {
  std::string checkpoint;
};

// key=value lines, or a manifest.json whose "config" object is replayed. Keys
// are scoped to the subcommand being run.
class KeyValueConfig : public CLI::ConfigBase {
 public:
  std::string section;

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
    const auto first = text.find_first_not_of(" \t\r\n");
    std::vector<CLI::ConfigItem> items;
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream in(text);
      items = CLI::ConfigBase::from_config(in);
    } else {
      items = from_json(text);
    }
    for (auto& item : items) {
      if (item.parents.empty() && !section.empty()) item.parents = {section};
    }
    return items;
  }

 private:
  static std::vector<CLI::ConfigItem> from_json(const std::string& text) {
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config", std::string("malformed JSON config: ") + e.what());
    }
    const json& cfg = j.contains("config") ? j.at("config") : j;
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : cfg.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto str = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(str(v));
      } else {
        item.inputs.push_back(str(value));
      }
      items.push_back(std::move(item));
    }
    return items;
  }
};

CLI::App* add_command(CLI::App& app, const std::string& name, const std::string& help) {
  CLI::App* sub = app.add_subcommand(name, help);
  sub->option_defaults()->always_capture_default();
  return sub;
}

json config_snapshot(const CLI::App* sub) {
  json cfg = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config" || opt->get_lnames().empty()) continue;
    if (opt->count() > 0) {
      const auto& res = opt->results();
      if (res.size() == 1 && opt->get_items_expected_max() <= 1) {
        cfg[name] = res.front();
      } else {
        cfg[name] = res;
      }
    } else if (!opt->get_default_str().empty()) {
      cfg[name] = opt->get_default_str();
    }
  }
  return cfg;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

class Manifest {
 public:
  Manifest(const std::string& command, const CLI::App* sub, const std::vector<std::string>& args)
      : start_(std::chrono::steady_clock::now()) {
    j_ = {{"command", command},   {"argv", args},        {"config", config_snapshot(sub)},
          {"build_id", build_id()}, {"started_utc", utc_now()}, {"seeds", json::object()},
          {"inputs", json::array()}, {"outputs", json::array()}, {"results", json::object()}};
  }

  json& operator[](const char* key) { return j_[key]; }

  void write(const fs::path& path) {
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    j_["wall_clock_seconds"] = secs;
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << j_.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + path.string());
  }

 private:
  json j_;
  std::chrono::steady_clock::time_point start_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

void ensure_parent(const fs::path& file) {
  if (file.has_parent_path()) ensure_dir(file.parent_path());
}

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

Dataset load_existing(const std::string& path) {
  if (!fs::exists(path)) throw IoError("dataset not found: " + path);
  return load_dataset(path);
}

Checkpoint load_existing_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw IoError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

GraphConfig graph_from_extra(const json& extra, Task task) {
  if (extra.contains("graph")) return GraphConfig::from_json(extra.at("graph"));
  return default_graph_config(task);
}

void check_compatible(const Model& model, const Dataset& ds) {
  const Head want = head_for_task(ds.header.task);
  if (model.spec().head != want) {
    throw UsageError("checkpoint head " + to_string(model.spec().head) +
                     " is incompatible with task " + to_string(ds.header.task));
  }
  if (ds.header.d != model.spec().pos_dim) {
    throw UsageError("dataset dimension does not match the checkpoint");
  }
}

// Multiplies every coordinate by `factor`; ising targets are recomputed and
// samples whose correlators leave double range are dropped.
std::size_t rescale(Dataset& ds, double factor) {
  if (factor == 1.0) return 0;
  if (!(factor > 0.0) || !std::isfinite(factor)) throw InputError("coord-scale must be positive");
  std::vector<Sample> kept;
  std::size_t dropped = 0;
  for (Sample& s : ds.samples) {
    s.points *= factor;
    if (ds.header.task == Task::ising) {
      try {
        s.targets = make_targets(to_planar(s.points));
      } catch (const SampleRejected&) {
        ++dropped;
        continue;
      }
    }
    kept.push_back(std::move(s));
  }
  ds.samples = std::move(kept);
  ds.header.n_samples = ds.samples.size();
  return dropped;
}

int cmd_gen(const GenOpts& o, Manifest& man, std::ostream& out) {
  const Task task = parse_task(o.task);
  const int n = o.n_points > 0 ? o.n_points : (task == Task::ising ? 16 : 32);
  if (task == Task::ising && (n < 2 || n % 2 != 0 || n > kMaxSpinN)) {
    throw UsageError("gen ising: --n-points must be even and between 2 and " +
                     std::to_string(kMaxSpinN));
  }
  if (task == Task::shapes && n < 8) throw UsageError("gen shapes: --n-points must be >= 8");
  if (o.n_samples == 0) throw UsageError("gen: --n-samples must be positive");
  const Dataset ds = task == Task::ising ? gen_ising(o.seed, o.n_samples, n)
                                         : gen_shapes(o.seed, o.n_samples, n);
  ensure_parent(o.out);
  save_dataset(ds, o.out);
  man["seeds"]["data"] = o.seed;
  man["outputs"].push_back(o.out);
  man["results"] = {{"task", to_string(task)}, {"n_samples", o.n_samples}, {"n_points", n}};
  man.write(o.out + ".manifest.json");
  out << "wrote " << o.n_samples << ' ' << to_string(task) << " samples with " << n
      << " points to " << o.out << '\n';
  return kExitOk;
}

int cmd_train(const TrainOpts& o, Manifest& man, std::ostream& out) {
  const Variant variant = parse_variant(o.variant);
  const Dataset data = load_existing(o.data);
  const Task task = data.header.task;
  GraphConfig graph = default_graph_config(task);
  if (o.k_lift > 0) graph.k_lift = o.k_lift;
  if (o.k_con >= 0) graph.k_con = o.k_con;
  graph.z0 = o.z0;
  if (!(graph.z0 > 0.0)) throw UsageError("train: --z0 must be positive");

  GraphSet train_set, val_set;
  if (o.val_data.empty()) {
    if (data.samples.size() <= o.val_count || o.val_count == 0) {
      throw UsageError("train: dataset too small to hold out " + std::to_string(o.val_count) +
                       " validation samples");
    }
    const std::size_t split = data.samples.size() - o.val_count;
    train_set = prepare_graphs(data, variant, graph, 0, split, o.threads);
    val_set = prepare_graphs(data, variant, graph, split, data.samples.size(), o.threads);
  } else {
    const Dataset val = load_existing(o.val_data);
    if (val.header.task != task) throw UsageError("train: validation task differs from training");
    train_set = prepare_graphs(data, variant, graph, 0, data.samples.size(), o.threads);
    val_set = prepare_graphs(val, variant, graph, 0, val.samples.size(), o.threads);
    man["inputs"].push_back(o.val_data);
  }

  ModelSpec spec = default_model_spec(task, variant, o.seed);
  spec.hidden = o.hidden;
  spec.layers = o.layers;
  const Model initial = Model::init(spec);
  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.weight_decay = o.weight_decay;
  cfg.batch_size = o.batch_size;
  cfg.max_epochs = o.epochs;
  cfg.patience = o.patience;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.time_limit = o.time_limit;

  const bool deltas = spec.has_delta();
  const TrainResult res =
      train(initial, train_set, val_set, cfg, [&](const EpochRecord& tr, const EpochRecord& va) {
        out << "epoch " << tr.epoch << " train_loss=" << tr.loss << " val_loss=" << va.loss
            << " val_metric=" << va.metric;
        if (deltas) {
          out << " delta_sigma=" << va.delta_sigma << " delta_epsilon=" << va.delta_epsilon;
        }
        out << '\n' << std::flush;
      });

  const fs::path dir = o.out;
  ensure_dir(dir);
  const json extra = {{"task", to_string(task)},
                      {"n_points", data.header.n_points},
                      {"graph", graph.to_json()},
                      {"train_data", o.data},
                      {"val_data", o.val_data},
                      {"best_epoch", res.metrics.best_epoch},
                      {"best_val_loss", num(res.metrics.best_val_loss)},
                      {"best_val_metric", num(res.metrics.best_val_metric)}};
  save_checkpoint(res.model, dir / "checkpoint.bin", extra);
  write_metrics_csv(res.metrics, dir / "metrics.csv");

  man["seeds"] = {{"model", o.seed}, {"shuffle", o.seed}, {"data", data.header.seed}};
  man["inputs"].insert(man["inputs"].begin(), o.data);
  man["outputs"] = {(dir / "checkpoint.bin").string(), (dir / "metrics.csv").string()};
  man["results"] = metrics_summary(res.metrics);
  man.write(dir / "manifest.json");

  out << std::setprecision(10);
  out << "validation loss=" << res.metrics.best_val_loss
      << " metric=" << res.metrics.best_val_metric << " (epoch " << res.metrics.best_epoch
      << ")\n";
  if (deltas) {
    out << "delta_sigma=" << res.model.delta_sigma() << '\n';
    out << "delta_epsilon=" << res.model.delta_epsilon() << '\n';
  }
  return kExitOk;
}

int cmd_eval(const EvalOpts& o, Manifest& man, std::ostream& out) {
  const Checkpoint ck = load_existing_checkpoint(o.checkpoint);
  Dataset ds = load_existing(o.data);
  check_compatible(ck.model, ds);
  const std::size_t dropped = rescale(ds, o.coord_scale);
  if (ds.samples.empty()) throw InputError("eval: no samples left to evaluate");
  const GraphConfig graph = graph_from_extra(ck.extra, ds.header.task);
  const GraphSet set =
      prepare_graphs(ds, ck.model.spec().variant, graph, 0, ds.samples.size(), o.threads);
  const EvalResult r = evaluate(ck.model, set, o.threads);

  const fs::path dir = o.out;
  ensure_dir(dir);
  std::ostringstream csv;
  csv << "data,n_samples,n_points,coord_scale,loss,metric,sigma_rel_l2,epsilon_rel_l2,dropped\n";
  csv << o.data << ',' << r.n << ',' << ds.header.n_points << ',' << fmt(o.coord_scale) << ','
      << fmt(r.loss) << ',' << fmt(r.metric) << ',' << fmt(r.channel(0)) << ','
      << fmt(r.channel(1)) << ',' << dropped << '\n';
  write_text(dir / "report.csv", csv.str());

  man["inputs"] = {o.checkpoint, o.data};
  man["outputs"] = {(dir / "report.csv").string()};
  man["results"] = {{"loss", num(r.loss)}, {"metric", num(r.metric)}, {"n", r.n},
                    {"dropped", dropped}};
  man.write(dir / "manifest.json");

  out << std::setprecision(17) << "loss=" << r.loss << " metric=" << r.metric << " n=" << r.n;
  if (dropped > 0) out << " dropped=" << dropped;
  out << '\n';
  return kExitOk;
}

int cmd_audit(const AuditOpts& o, Manifest& man, std::ostream& out) {
  const Checkpoint ck = load_existing_checkpoint(o.checkpoint);
  const Dataset ds = load_existing(o.data);
  check_compatible(ck.model, ds);
  if (o.sct_b.size() != 2) throw UsageError("audit: --sct-b needs two components");
  AuditOptions opt;
  opt.transforms = parse_transform_list(o.transforms);
  opt.sct_b = Eigen::Vector2d(o.sct_b[0], o.sct_b[1]);
  opt.seed = o.seed;
  opt.count = o.count;
  opt.threads = o.threads;
  const AuditReport rep = audit(ck.model, graph_from_extra(ck.extra, ds.header.task), ds, opt);

  const fs::path dir = o.out;
  ensure_dir(dir);
  std::ostringstream csv;
  csv << "transform,sample,skipped,max_abs,relative,labels,flipped\n";
  for (const AuditRow& r : rep.rows) {
    csv << to_string(r.transform) << ',' << r.sample << ',' << (r.skipped ? 1 : 0) << ','
        << fmt(r.max_abs) << ',' << fmt(r.relative) << ',' << r.labels << ',' << r.flipped
        << '\n';
  }
  write_text(dir / "report.csv", csv.str());

  json results = json::array();
  out << std::setprecision(6);
  for (const AuditSummary& s : rep.summary) {
    results.push_back({{"transform", to_string(s.transform)},
                       {"evaluated", s.evaluated},
                       {"skipped", s.skipped},
                       {"max_abs", s.max_abs},
                       {"max_relative", s.max_relative},
                       {"flip_rate", s.flip_rate}});
    out << to_string(s.transform) << ": max_abs=" << s.max_abs
        << " max_relative=" << s.max_relative << " flip_rate=" << s.flip_rate
        << " evaluated=" << s.evaluated << " skipped=" << s.skipped << '\n';
  }
  man["seeds"]["transforms"] = o.seed;
  man["inputs"] = {o.checkpoint, o.data};
  man["outputs"] = {(dir / "report.csv").string()};
  man["results"] = results;
  man.write(dir / "manifest.json");
  return kExitOk;
}

int cmd_generalize(const GeneralizeOpts& o, Manifest& man, std::ostream& out) {
  std::vector<Checkpoint> cks;
  for (const auto& p : o.checkpoints) cks.push_back(load_existing_checkpoint(p));
  std::vector<Dataset> sets;
  for (const auto& p : o.data) {
    sets.push_back(load_existing(p));
    rescale(sets.back(), o.coord_scale);
    if (sets.back().samples.empty()) throw InputError("generalize: no samples left in " + p);
  }
  std::vector<std::vector<double>> loss(cks.size(), std::vector<double>(sets.size()));
  for (std::size_t i = 0; i < cks.size(); ++i) {
    for (std::size_t j = 0; j < sets.size(); ++j) {
      check_compatible(cks[i].model, sets[j]);
      const GraphConfig graph = graph_from_extra(cks[i].extra, sets[j].header.task);
      const GraphSet set = prepare_graphs(sets[j], cks[i].model.spec().variant, graph, 0,
                                          sets[j].samples.size(), o.threads);
      loss[i][j] = evaluate(cks[i].model, set, o.threads).loss;
    }
  }

  auto row_label = [&](std::size_t i) {
    const json& e = cks[i].extra;
    return e.contains("n_points") ? e.at("n_points").dump() : fs::path(o.checkpoints[i]).stem().string();
  };
  std::ostringstream csv;
  csv << "n_train";
  for (const auto& s : sets) csv << ",n_test_" << s.header.n_points;
  csv << '\n';
  for (std::size_t i = 0; i < cks.size(); ++i) {
    csv << row_label(i);
    for (double v : loss[i]) csv << ',' << fmt(v);
    csv << '\n';
  }
  const fs::path dir = o.out;
  ensure_dir(dir);
  write_text(dir / "report.csv", csv.str());

  man["inputs"] = json(o.checkpoints);
  for (const auto& p : o.data) man["inputs"].push_back(p);
  man["outputs"] = {(dir / "report.csv").string()};
  man["results"] = {{"loss", loss}};
  man.write(dir / "manifest.json");
  out << csv.str();
  return kExitOk;
}

int cmd_delta(const DeltaOpts& o, std::ostream& out) {
  const Checkpoint ck = load_existing_checkpoint(o.checkpoint);
  if (!ck.model.spec().has_delta()) {
    throw UsageError("checkpoint has no learned scaling dimensions (" +
                     to_string(ck.model.spec().variant) + ", " +
                     to_string(ck.model.spec().head) + ")");
  }
  out << std::setprecision(17) << "delta_sigma=" << ck.model.delta_sigma() << '\n'
      << "delta_epsilon=" << ck.model.delta_epsilon() << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformally equivariant point-cloud networks on AdS-lifted graphs", "adsgnn"};
  app.require_subcommand(1);
  app.fallthrough();
  auto config = std::make_shared<KeyValueConfig>();
  app.config_formatter(config);
  app.set_config("--config", "", "key=value file or manifest.json to replay");
  app.allow_config_extras(CLI::config_extras_mode::error);
  const int env_threads = threads_from_env();
  const auto variants = CLI::IsMember({"mpnn", "egnn", "adsgnn"});

  GenOpts gen;
  CLI::App* gen_cmd = add_command(app, "gen", "generate a dataset");
  gen_cmd->add_option("task", gen.task, "shapes or ising")
      ->required()
      ->check(CLI::IsMember({"shapes", "ising"}));
  gen_cmd->add_option("--n-points", gen.n_points,
                      "points per sample (0: 16 for ising, 32 for shapes)");
  gen_cmd->add_option("--n-samples", gen.n_samples, "number of samples");
  gen_cmd->add_option("--seed", gen.seed, "generator seed");
  gen_cmd->add_option("-o,--out", gen.out, "output file (.jsonl for JSON lines)")->required();

  TrainOpts tr;
  tr.threads = env_threads;
  CLI::App* train_cmd = add_command(app, "train", "train a model");
  train_cmd->add_option("--variant", tr.variant, "mpnn, egnn or adsgnn")->check(variants);
  train_cmd->add_option("--data", tr.data, "training dataset")->required();
  train_cmd->add_option("--val-data", tr.val_data, "validation dataset");
  train_cmd->add_option("--val-count", tr.val_count,
                        "samples held out from the end of --data without --val-data");
  train_cmd->add_option("-o,--out", tr.out, "run directory")->required();
  train_cmd->add_option("--lr", tr.lr, "learning rate");
  train_cmd->add_option("--weight-decay", tr.weight_decay, "decoupled weight decay");
  train_cmd->add_option("--batch-size", tr.batch_size, "samples per step");
  train_cmd->add_option("--epochs", tr.epochs, "maximum epochs");
  train_cmd->add_option("--patience", tr.patience, "epochs without improvement before stopping");
  train_cmd->add_option("--seed", tr.seed, "initialisation and shuffling seed");
  train_cmd->add_option("--hidden", tr.hidden, "hidden width");
  train_cmd->add_option("--layers", tr.layers, "message passing layers");
  train_cmd->add_option("--k-lift", tr.k_lift, "lifting neighbours (0: task default)");
  train_cmd->add_option("--k-con", tr.k_con,
                        "graph neighbours (-1: task default, 0: fully connected)");
  train_cmd->add_option("--z0", tr.z0, "initial depth of boundary points");
  train_cmd->add_option("--time-limit", tr.time_limit, "training wall-clock budget in seconds (0: none)");
  train_cmd->add_option("--threads", tr.threads, "worker threads");

  EvalOpts ev;
  ev.threads = env_threads;
  CLI::App* eval_cmd = add_command(app, "eval", "evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  eval_cmd->add_option("--data", ev.data, "dataset")->required();
  eval_cmd->add_option("-o,--out", ev.out, "run directory")->required();
  eval_cmd->add_option("--coord-scale", ev.coord_scale, "multiply all coordinates");
  eval_cmd->add_option("--threads", ev.threads, "worker threads");

  AuditOpts au;
  au.threads = env_threads;
  CLI::App* audit_cmd = add_command(app, "audit", "measure output deviation under transformations");
  audit_cmd->add_option("--checkpoint", au.checkpoint, "checkpoint file")->required();
  audit_cmd->add_option("--data", au.data, "dataset")->required();
  audit_cmd->add_option("-o,--out", au.out, "run directory")->required();
  audit_cmd->add_option("--transforms", au.transforms, "comma list of rotate,translate,scale,sct");
  audit_cmd->add_option("--sct-b", au.sct_b, "special conformal vector b1,b2")
      ->delimiter(',')
      ->expected(2);
  audit_cmd->add_option("--count", au.count, "samples to audit (0: all)");
  audit_cmd->add_option("--seed", au.seed, "seed of the random transformations");
  audit_cmd->add_option("--threads", au.threads, "worker threads");

  GeneralizeOpts ge;
  ge.threads = env_threads;
  CLI::App* gen_x_cmd =
      add_command(app, "generalize", "loss matrix of checkpoints against datasets");
  gen_x_cmd->add_option("--checkpoint", ge.checkpoints, "checkpoint files (rows)")->required();
  gen_x_cmd->add_option("--data", ge.data, "datasets (columns)")->required();
  gen_x_cmd->add_option("-o,--out", ge.out, "run directory")->required();
  gen_x_cmd->add_option("--coord-scale", ge.coord_scale, "multiply all coordinates");
  gen_x_cmd->add_option("--threads", ge.threads, "worker threads");

  DeltaOpts de;
  CLI::App* delta_cmd = app.add_subcommand("delta", "print learned scaling dimensions");
  delta_cmd->add_option("--checkpoint", de.checkpoint, "checkpoint file")->required();

  for (const auto& a : args) {
    if (app.get_subcommand_no_throw(a) != nullptr) {
      config->section = a;
      break;
    }
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    for (CLI::App* sub : {gen_cmd, train_cmd, eval_cmd, audit_cmd, gen_x_cmd}) {
      if (!*sub) continue;
      Manifest man(sub->get_name(), sub, args);
      if (sub == gen_cmd) return cmd_gen(gen, man, out);
      if (sub == train_cmd) return cmd_train(tr, man, out);
      if (sub == eval_cmd) return cmd_eval(ev, man, out);
      if (sub == audit_cmd) return cmd_audit(au, man, out);
      return cmd_generalize(ge, man, out);
    }
    return cmd_delta(de, out);
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const adsgnn::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace adsgnn::cli
