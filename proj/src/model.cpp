#include "adsgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "adsgnn/rng.hpp"

namespace adsgnn {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'A', 'D', 'S', 'G', 'N', 'N', 'C', 'K'};

using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

RowMat activate(const RowMat& z) {
  return z.unaryExpr([](double x) { return silu(x); });
}

RowMat activate_grad(const RowMat& z) {
  return z.unaryExpr([](double x) { return silu_grad(x); });
}

template <int NOut>
void affine_rows(const double* __restrict in, Eigen::Index rows, Eigen::Index stride,
                 const double* __restrict w, const double* __restrict bias, int n_in,
                 double* __restrict out) {
  for (Eigen::Index r = 0; r < rows; ++r) {
    double acc[NOut];
    for (int c = 0; c < NOut; ++c) acc[c] = bias != nullptr ? bias[c] : 0.0;
    const double* x = in + r * stride;
    for (int k = 0; k < n_in; ++k) {
      const double s = x[k];
      const double* wk = w + static_cast<std::ptrdiff_t>(k) * NOut;
      for (int c = 0; c < NOut; ++c) acc[c] += s * wk[c];
    }
    std::copy(acc, acc + NOut, out + r * NOut);
  }
}

// out(r, :) = bias + sum_k in(r, k) * w(k, :) with k ascending. Each row only
// depends on the matching input row, so results do not depend on row order.
void affine(const RowMat& in, const double* w, const double* bias, int n_in, int n_out,
            RowMat& out) {
  const Eigen::Index rows = in.rows();
  out.resize(rows, n_out);
  if (n_out == 32) {
    affine_rows<32>(in.data(), rows, in.cols(), w, bias, n_in, out.data());
    return;
  }
  for (Eigen::Index r = 0; r < rows; ++r) {
    double* o = out.data() + r * n_out;
    for (int c = 0; c < n_out; ++c) o[c] = bias != nullptr ? bias[c] : 0.0;
    const double* x = in.data() + r * in.cols();
    for (int k = 0; k < n_in; ++k) {
      const double s = x[k];
      const double* wk = w + static_cast<std::ptrdiff_t>(k) * n_out;
      for (int c = 0; c < n_out; ++c) o[c] += s * wk[c];
    }
  }
}

ConstRowMap weight_rows(const double* p, const DenseSlot& s, int row0, int nrows) {
  return ConstRowMap(p + s.weight + static_cast<std::size_t>(row0) * static_cast<std::size_t>(s.out),
                     nrows, s.out);
}

RowMap grad_rows(double* g, const DenseSlot& s, int row0, int nrows) {
  return RowMap(g + s.weight + static_cast<std::size_t>(row0) * static_cast<std::size_t>(s.out), nrows,
                s.out);
}

Eigen::Map<Eigen::RowVectorXd> grad_bias(double* g, const DenseSlot& s) {
  return Eigen::Map<Eigen::RowVectorXd>(g + s.bias, s.out);
}

// IEEE total order as a signed integer key.
inline std::int64_t order_key(double x) {
  const auto i = std::bit_cast<std::int64_t>(x);
  return i ^ static_cast<std::int64_t>(static_cast<std::uint64_t>(i >> 63) >> 1);
}

bool row_less(const double* a, const double* b, int n) {
  for (int k = 0; k < n; ++k) {
    const std::int64_t ka = order_key(a[k]);
    const std::int64_t kb = order_key(b[k]);
    if (ka != kb) return ka < kb;
  }
  return false;
}

// Per-segment sum of rows, adding rows in lexicographic order of their values so
// that the result does not depend on the order in which rows are listed.
RowMat sorted_segment_sum(const RowMat& v, const std::vector<int>& segment, int n_segments) {
  const int w = static_cast<int>(v.cols());
  RowMat out = RowMat::Zero(n_segments, w);
  std::vector<int> start(static_cast<std::size_t>(n_segments) + 1, 0);
  for (int s : segment) ++start[static_cast<std::size_t>(s) + 1];
  std::partial_sum(start.begin(), start.end(), start.begin());
  std::vector<int> order(segment.size());
  std::vector<int> fill(start.begin(), start.end() - 1);
  for (std::size_t r = 0; r < segment.size(); ++r) {
    order[static_cast<std::size_t>(fill[static_cast<std::size_t>(segment[r])]++)] = static_cast<int>(r);
  }
  for (int s = 0; s < n_segments; ++s) {
    auto first = order.begin() + start[static_cast<std::size_t>(s)];
    auto last = order.begin() + start[static_cast<std::size_t>(s) + 1];
    std::sort(first, last, [&](int a, int b) {
      return row_less(v.data() + static_cast<std::ptrdiff_t>(a) * w,
                      v.data() + static_cast<std::ptrdiff_t>(b) * w, w);
    });
    double* o = out.data() + static_cast<std::ptrdiff_t>(s) * w;
    for (auto it = first; it != last; ++it) {
      const double* x = v.data() + static_cast<std::ptrdiff_t>(*it) * w;
      for (int c = 0; c < w; ++c) o[c] += x[c];
    }
  }
  return out;
}

double sorted_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v;
  return s;
}

// Layers two and three of an MLP whose first pre-activation is already in c.z1.
void mlp_rest(const double* p, const MlpSlot& s, MlpCache& c, RowMat& out) {
  c.a1 = activate(c.z1);
  affine(c.a1, p + s[1].weight, p + s[1].bias, s[1].in, s[1].out, c.z2);
  c.a2 = activate(c.z2);
  affine(c.a2, p + s[2].weight, p + s[2].bias, s[2].in, s[2].out, out);
}

// Reverse of mlp_rest; returns d(loss)/d(z1).
RowMat mlp_rest_backward(const double* p, double* g, const MlpSlot& s, const MlpCache& c,
                         const RowMat& d_out) {
  grad_rows(g, s[2], 0, s[2].in).noalias() += c.a2.transpose() * d_out;
  grad_bias(g, s[2]) += d_out.colwise().sum();
  RowMat dz2 = (d_out * weight_rows(p, s[2], 0, s[2].in).transpose()).cwiseProduct(activate_grad(c.z2));
  grad_rows(g, s[1], 0, s[1].in).noalias() += c.a1.transpose() * dz2;
  grad_bias(g, s[1]) += dz2.colwise().sum();
  return (dz2 * weight_rows(p, s[1], 0, s[1].in).transpose()).cwiseProduct(activate_grad(c.z1));
}

void check_graph(const ModelSpec& spec, const LiftedCloud& g) {
  const int n = g.size();
  if (n < 1) throw InputError("forward: empty graph");
  for (const auto& pt : g.positions) {
    if (pt.x.size() != spec.pos_dim) throw InputError("forward: position dimension mismatch");
  }
  const bool no_features = spec.in_features == 0 && g.lifted_features.size() == 0;
  if (!no_features &&
      (g.lifted_features.rows() != n || g.lifted_features.cols() != spec.in_features)) {
    throw InputError("forward: feature width mismatch");
  }
  for (const auto& e : g.edges) {
    if (e.target < 0 || e.target >= n || e.source < 0 || e.source >= n) {
      throw InputError("forward: edge index out of range");
    }
  }
  if (spec.head == Head::ising && spec.has_delta()) {
    if (g.zhat.size() != n) throw InputError("forward: zhat size mismatch");
    for (Eigen::Index i = 0; i < g.zhat.size(); ++i) {
      if (!(g.zhat(i) > 0.0)) throw InputError("forward: zhat must be positive");
    }
  }
}

RowMat conditioning(const ModelSpec& spec, const LiftedCloud& g) {
  const int c = spec.cond_dim();
  RowMat cond(static_cast<Eigen::Index>(g.edges.size()), c);
  for (std::size_t e = 0; e < g.edges.size(); ++e) {
    const auto& a = g.positions[static_cast<std::size_t>(g.edges[e].target)];
    const auto& b = g.positions[static_cast<std::size_t>(g.edges[e].source)];
    const auto r = static_cast<Eigen::Index>(e);
    switch (spec.variant) {
      case Variant::adsgnn:
        cond(r, 0) = proper_distance(a, b);
        break;
      case Variant::egnn:
        cond(r, 0) = (a.x - b.x).norm();
        break;
      case Variant::mpnn:
        cond.row(r) = (a.x - b.x).transpose();
        break;
    }
  }
  return cond;
}

void write_all(std::ofstream& out, const void* data, std::size_t n) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::mpnn: return "mpnn";
    case Variant::egnn: return "egnn";
    case Variant::adsgnn: return "adsgnn";
  }
  return "?";
}

std::string to_string(Head h) {
  switch (h) {
    case Head::graph_class: return "graph_class";
    case Head::node_class: return "node_class";
    case Head::ising: return "ising";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "mpnn") return Variant::mpnn;
  if (s == "egnn") return Variant::egnn;
  if (s == "adsgnn") return Variant::adsgnn;
  throw InputError("unknown variant '" + s + "'");
}

Head parse_head(const std::string& s) {
  if (s == "graph_class") return Head::graph_class;
  if (s == "node_class") return Head::node_class;
  if (s == "ising") return Head::ising;
  throw InputError("unknown head '" + s + "'");
}

ParamLayout make_layout(const ModelSpec& spec) {
  if (spec.hidden < 1 || spec.layers < 1 || spec.out_dim < 1 || spec.in_features < 0 ||
      spec.pos_dim < 1) {
    throw InputError("model: invalid widths");
  }
  if (spec.head == Head::ising && spec.out_dim != 2) {
    throw InputError("model: ising head has exactly two channels");
  }
  ParamLayout l;
  std::size_t off = 0;
  auto dense = [&](int in, int out) {
    DenseSlot s;
    s.in = in;
    s.out = out;
    s.weight = off;
    s.bias = off + static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
    off = s.bias + static_cast<std::size_t>(out);
    return s;
  };
  const int w = spec.hidden;
  l.encoder = dense(spec.in_features, w);
  for (int i = 0; i < spec.layers; ++i) {
    l.message.push_back({dense(2 * w + spec.cond_dim(), w), dense(w, w), dense(w, w)});
    l.update.push_back({dense(2 * w, w), dense(w, w), dense(w, w)});
  }
  l.head = {dense(w, w), dense(w, w), dense(w, spec.out_dim)};
  if (spec.has_delta()) {
    l.delta = off;
    off += 2;
  }
  l.total = off;
  return l;
}

Model::Model(const ModelSpec& spec, std::vector<double> params)
    : spec_(spec), layout_(make_layout(spec)), params_(std::move(params)) {
  if (params_.size() != layout_.total) {
    throw InputError("model: expected " + std::to_string(layout_.total) + " parameters, got " +
                     std::to_string(params_.size()));
  }
}

Model Model::init(const ModelSpec& spec) {
  const ParamLayout layout = make_layout(spec);
  std::vector<double> p(layout.total, 0.0);
  CounterRng rng(spec.seed);
  auto fill = [&](const DenseSlot& s) {
    const double scale = s.in > 0 ? 1.0 / std::sqrt(static_cast<double>(s.in)) : 0.0;
    const std::size_t n = static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);
    for (std::size_t i = 0; i < n; ++i) p[s.weight + i] = scale * rng.normal();
  };
  fill(layout.encoder);
  for (int o = 0; o < layout.encoder.out; ++o) {
    p[layout.encoder.bias + static_cast<std::size_t>(o)] = rng.normal();
  }
  for (int i = 0; i < spec.layers; ++i) {
    for (const auto& s : layout.message[static_cast<std::size_t>(i)]) fill(s);
    for (const auto& s : layout.update[static_cast<std::size_t>(i)]) fill(s);
  }
  for (const auto& s : layout.head) fill(s);
  if (spec.has_delta()) {
    p[layout.delta] = 0.5;
    p[layout.delta + 1] = 0.5;
  }
  return Model(spec, std::move(p));
}

std::vector<std::uint8_t> Model::decay_mask() const {
  std::vector<std::uint8_t> mask(params_.size(), 0);
  auto mark = [&](const DenseSlot& s) {
    std::fill(mask.begin() + static_cast<std::ptrdiff_t>(s.weight),
              mask.begin() + static_cast<std::ptrdiff_t>(s.bias), 1);
  };
  mark(layout_.encoder);
  for (const auto& m : layout_.message) {
    for (const auto& s : m) mark(s);
  }
  for (const auto& m : layout_.update) {
    for (const auto& s : m) mark(s);
  }
  for (const auto& s : layout_.head) mark(s);
  return mask;
}

double Model::delta_sigma() const {
  return spec_.has_delta() ? params_[layout_.delta] : std::numeric_limits<double>::quiet_NaN();
}

double Model::delta_epsilon() const {
  return spec_.has_delta() ? params_[layout_.delta + 1] : std::numeric_limits<double>::quiet_NaN();
}

void Model::set_deltas(double sigma, double epsilon) {
  if (!spec_.has_delta()) throw UsageError("set_deltas: model has no scaling readout");
  params_[layout_.delta] = sigma;
  params_[layout_.delta + 1] = epsilon;
}

Eigen::Vector2d ising_head(const Eigen::Vector2d& pooled, const Vec& zhat, double delta_sigma,
                           double delta_epsilon) {
  std::vector<double> logs(static_cast<std::size_t>(zhat.size()));
  for (Eigen::Index i = 0; i < zhat.size(); ++i) {
    if (!(zhat(i) > 0.0)) throw InputError("ising_head: zhat must be positive");
    logs[static_cast<std::size_t>(i)] = std::log(zhat(i));
  }
  const double s = sorted_sum(std::move(logs));
  return {pooled(0) - delta_sigma * s, pooled(1) - delta_epsilon * s};
}

Output forward(const Model& model, const LiftedCloud& g, ForwardCache* cache) {
  const ModelSpec& spec = model.spec();
  const ParamLayout& lay = model.layout();
  const double* p = model.params().data();
  check_graph(spec, g);

  const int n = g.size();
  const int w = spec.hidden;
  ForwardCache local;
  ForwardCache& c = cache != nullptr ? *cache : local;
  c = ForwardCache{};
  c.spec = spec;
  c.n_nodes = n;
  c.edges = g.edges;
  c.cond = conditioning(spec, g);
  if (spec.in_features > 0) {
    c.input = g.lifted_features;
  } else {
    c.input.resize(n, 0);
  }

  std::vector<int> targets(g.edges.size());
  for (std::size_t e = 0; e < g.edges.size(); ++e) targets[e] = g.edges[e].target;

  RowMat h;
  affine(c.input, p + lay.encoder.weight, p + lay.encoder.bias, spec.in_features, w, h);

  const int cd = spec.cond_dim();
  const auto n_edges = static_cast<Eigen::Index>(g.edges.size());
  c.layers.resize(static_cast<std::size_t>(spec.layers));
  for (int l = 0; l < spec.layers; ++l) {
    LayerCache& lc = c.layers[static_cast<std::size_t>(l)];
    const MlpSlot& ms = lay.message[static_cast<std::size_t>(l)];
    const MlpSlot& us = lay.update[static_cast<std::size_t>(l)];
    lc.h = h;

    RowMat a, b;
    affine(h, p + ms[0].weight, nullptr, w, w, a);
    affine(h, p + ms[0].weight + static_cast<std::size_t>(w * w), nullptr, w, w, b);
    const double* wc = p + ms[0].weight + static_cast<std::size_t>(2 * w * w);
    const double* b1 = p + ms[0].bias;
    lc.message.z1.resize(n_edges, w);
    for (Eigen::Index e = 0; e < n_edges; ++e) {
      const auto& ed = g.edges[static_cast<std::size_t>(e)];
      double* z = lc.message.z1.data() + e * w;
      const double* ai = a.data() + static_cast<std::ptrdiff_t>(ed.target) * w;
      const double* bj = b.data() + static_cast<std::ptrdiff_t>(ed.source) * w;
      for (int k = 0; k < w; ++k) z[k] = ai[k] + bj[k] + b1[k];
      for (int q = 0; q < cd; ++q) {
        const double s = c.cond(e, q);
        const double* wq = wc + static_cast<std::ptrdiff_t>(q) * w;
        for (int k = 0; k < w; ++k) z[k] += s * wq[k];
      }
    }
    RowMat msg;
    mlp_rest(p, ms, lc.message, msg);
    lc.m = sorted_segment_sum(msg, targets, n);

    RowMat u_h, u_m;
    affine(h, p + us[0].weight, p + us[0].bias, w, w, u_h);
    affine(lc.m, p + us[0].weight + static_cast<std::size_t>(w * w), nullptr, w, w, u_m);
    lc.update.z1 = u_h + u_m;
    mlp_rest(p, us, lc.update, h);
  }
  c.h_final = h;

  Output out;
  if (spec.head == Head::graph_class) {
    c.head_in = sorted_segment_sum(h, std::vector<int>(static_cast<std::size_t>(n), 0), 1);
  } else {
    c.head_in = h;
  }
  affine(c.head_in, p + lay.head[0].weight, p + lay.head[0].bias, w, w, c.head.z1);
  RowMat y;
  mlp_rest(p, lay.head, c.head, y);

  if (spec.head == Head::ising) {
    const RowMat pooled = sorted_segment_sum(y, std::vector<int>(static_cast<std::size_t>(n), 0), 1);
    out.pooled = {pooled(0, 0), pooled(0, 1)};
    Eigen::Vector2d log_pred = out.pooled;
    if (spec.has_delta()) {
      log_pred = ising_head(out.pooled, g.zhat, model.delta_sigma(), model.delta_epsilon());
      std::vector<double> logs(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) logs[static_cast<std::size_t>(i)] = std::log(g.zhat(i));
      c.sum_log_z = sorted_sum(std::move(logs));
    }
    out.values = log_pred.transpose();
  } else {
    out.values = y;
  }
  c.valid = true;
  return out;
}

void backward(const Model& model, const ForwardCache& cache, const Mat& upstream,
              std::vector<double>& grad) {
  if (!cache.valid) throw UsageError("backward: no forward cache");
  const ModelSpec& spec = model.spec();
  if (!(cache.spec == spec)) throw UsageError("backward: cache belongs to a different model");
  if (grad.size() != model.size()) throw InputError("backward: gradient buffer size mismatch");
  const ParamLayout& lay = model.layout();
  const double* p = model.params().data();
  double* g = grad.data();
  const int n = cache.n_nodes;
  const int w = spec.hidden;

  RowMat d_y;
  switch (spec.head) {
    case Head::node_class:
      if (upstream.rows() != n || upstream.cols() != spec.out_dim) {
        throw InputError("backward: upstream shape mismatch");
      }
      d_y = upstream;
      break;
    case Head::graph_class:
      if (upstream.rows() != 1 || upstream.cols() != spec.out_dim) {
        throw InputError("backward: upstream shape mismatch");
      }
      d_y = upstream;
      break;
    case Head::ising:
      if (upstream.rows() != 1 || upstream.cols() != 2) {
        throw InputError("backward: upstream shape mismatch");
      }
      if (spec.has_delta()) {
        g[lay.delta] += -cache.sum_log_z * upstream(0, 0);
        g[lay.delta + 1] += -cache.sum_log_z * upstream(0, 1);
      }
      d_y = upstream.replicate(n, 1);
      break;
  }

  RowMat dz = mlp_rest_backward(p, g, lay.head, cache.head, d_y);
  grad_rows(g, lay.head[0], 0, w).noalias() += cache.head_in.transpose() * dz;
  grad_bias(g, lay.head[0]) += dz.colwise().sum();
  RowMat d_head_in = dz * weight_rows(p, lay.head[0], 0, w).transpose();
  RowMat dh = spec.head == Head::graph_class ? RowMat(d_head_in.replicate(n, 1)) : d_head_in;

  const auto n_edges = static_cast<Eigen::Index>(cache.edges.size());
  const int cd = spec.cond_dim();
  for (int l = spec.layers - 1; l >= 0; --l) {
    const LayerCache& lc = cache.layers[static_cast<std::size_t>(l)];
    const MlpSlot& ms = lay.message[static_cast<std::size_t>(l)];
    const MlpSlot& us = lay.update[static_cast<std::size_t>(l)];

    const RowMat dzu = mlp_rest_backward(p, g, us, lc.update, dh);
    grad_rows(g, us[0], 0, w).noalias() += lc.h.transpose() * dzu;
    grad_rows(g, us[0], w, w).noalias() += lc.m.transpose() * dzu;
    grad_bias(g, us[0]) += dzu.colwise().sum();
    RowMat dh_prev = dzu * weight_rows(p, us[0], 0, w).transpose();
    const RowMat dm = dzu * weight_rows(p, us[0], w, w).transpose();

    if (n_edges > 0) {
      RowMat d_msg(n_edges, w);
      for (Eigen::Index e = 0; e < n_edges; ++e) {
        d_msg.row(e) = dm.row(cache.edges[static_cast<std::size_t>(e)].target);
      }
      const RowMat dze = mlp_rest_backward(p, g, ms, lc.message, d_msg);
      RowMat da = RowMat::Zero(n, w);
      RowMat db = RowMat::Zero(n, w);
      for (Eigen::Index e = 0; e < n_edges; ++e) {
        const auto& ed = cache.edges[static_cast<std::size_t>(e)];
        da.row(ed.target) += dze.row(e);
        db.row(ed.source) += dze.row(e);
      }
      grad_rows(g, ms[0], 0, w).noalias() += lc.h.transpose() * da;
      grad_rows(g, ms[0], w, w).noalias() += lc.h.transpose() * db;
      grad_rows(g, ms[0], 2 * w, cd).noalias() += cache.cond.transpose() * dze;
      grad_bias(g, ms[0]) += dze.colwise().sum();
      dh_prev.noalias() += da * weight_rows(p, ms[0], 0, w).transpose();
      dh_prev.noalias() += db * weight_rows(p, ms[0], w, w).transpose();
    }
    dh = std::move(dh_prev);
  }

  if (spec.in_features > 0) {
    grad_rows(g, lay.encoder, 0, spec.in_features).noalias() += cache.input.transpose() * dh;
  }
  grad_bias(g, lay.encoder) += dh.colwise().sum();
}

void save_checkpoint(const Model& model, const std::filesystem::path& path, const json& extra) {
  const ModelSpec& s = model.spec();
  json header = {
      {"format_version", kCheckpointFormatVersion},
      {"variant", to_string(s.variant)},
      {"head", to_string(s.head)},
      {"widths",
       {{"in_features", s.in_features},
        {"pos_dim", s.pos_dim},
        {"hidden", s.hidden},
        {"layers", s.layers},
        {"out_dim", s.out_dim}}},
      {"seed", s.seed},
      {"n_params", model.size()},
      {"delta_sigma", s.has_delta() ? json(model.delta_sigma()) : json(nullptr)},
      {"delta_epsilon", s.has_delta() ? json(model.delta_epsilon()) : json(nullptr)},
      {"extra", extra},
  };
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  const auto version = static_cast<std::uint32_t>(kCheckpointFormatVersion);
  const auto len = static_cast<std::uint32_t>(text.size());
  write_all(out, kMagic, sizeof(kMagic));
  write_all(out, &version, sizeof(version));
  write_all(out, &len, sizeof(len));
  write_all(out, text.data(), text.size());
  write_all(out, model.params().data(), model.size() * sizeof(double));
  if (!out) throw IoError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  std::size_t pos = 0;
  auto take = [&](void* dst, std::size_t n, const char* what) {
    if (pos + n > bytes.size()) {
      throw ParseError(path.string() + ": truncated checkpoint reading " + what + " at byte offset " +
                       std::to_string(pos));
    }
    std::memcpy(dst, bytes.data() + pos, n);
    pos += n;
  };
  char magic[8];
  take(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError(path.string() + ": not a checkpoint file");
  }
  std::uint32_t version = 0;
  take(&version, sizeof(version), "format_version");
  if (version != static_cast<std::uint32_t>(kCheckpointFormatVersion)) {
    throw UnsupportedVersionError(path.string() + ": unsupported checkpoint format_version " +
                                  std::to_string(version));
  }
  std::uint32_t len = 0;
  take(&len, sizeof(len), "header length");
  std::string text(len, '\0');
  take(text.data(), len, "header");
  ModelSpec s;
  std::size_t n_params = 0;
  json extra;
  try {
    const json h = json::parse(text);
    s.variant = parse_variant(h.at("variant").get<std::string>());
    s.head = parse_head(h.at("head").get<std::string>());
    const json& wd = h.at("widths");
    s.in_features = wd.at("in_features").get<int>();
    s.pos_dim = wd.at("pos_dim").get<int>();
    s.hidden = wd.at("hidden").get<int>();
    s.layers = wd.at("layers").get<int>();
    s.out_dim = wd.at("out_dim").get<int>();
    s.seed = h.at("seed").get<std::uint64_t>();
    n_params = h.at("n_params").get<std::size_t>();
    extra = h.value("extra", json::object());
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  } catch (const InputError& e) {
    throw ParseError(path.string() + ": bad checkpoint header: " + e.what());
  }
  if (n_params != make_layout(s).total) {
    throw ParseError(path.string() + ": parameter count does not match the declared widths");
  }
  std::vector<double> params(n_params);
  take(params.data(), n_params * sizeof(double), "parameters");
  if (pos != bytes.size()) {
    throw ParseError(path.string() + ": trailing bytes at offset " + std::to_string(pos));
  }
  return {Model(s, std::move(params)), std::move(extra)};
}

}  // namespace adsgnn
