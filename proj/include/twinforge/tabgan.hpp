#pragma once

// Conditional tabular GAN built from scratch: mode-specific normalization of
// continuous columns via a per-column Gaussian mixture, a conditional
// generator over the categorical columns (training-by-sampling), and a
// minimax objective trained with hand-written backprop. Losses are computed
// in logit space for stability; the plain objective value is logged per
// epoch. Generation decodes discrete blocks by argmax with hard enforcement
// of a requested condition.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/common.hpp"
#include "twinforge/gmm.hpp"
#include "twinforge/netsim.hpp"
#include "twinforge/nn.hpp"
#include "twinforge/rng.hpp"

namespace twinforge::tabgan {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Schema and rows

struct ColumnCont {
  std::string name;
  double min = 0.0;
  double max = 1.0;
};

struct ColumnCat {
  std::string name;
  std::vector<std::string> values;
};

struct TableSchema {
  std::vector<ColumnCont> cont;
  std::vector<ColumnCat> cat;

  int cond_dim() const {
    int d = 0;
    for (const auto& c : cat) d += static_cast<int>(c.values.size());
    return d;
  }
  int cat_index(const std::string& name) const {
    for (std::size_t i = 0; i < cat.size(); ++i)
      if (cat[i].name == name) return static_cast<int>(i);
    return -1;
  }
  int value_index(int col, const std::string& value) const {
    const auto& vs = cat[col].values;
    for (std::size_t i = 0; i < vs.size(); ++i)
      if (vs[i] == value) return static_cast<int>(i);
    return -1;
  }
};

inline void to_json(json& j, const ColumnCont& c) {
  j = json{{"name", c.name}, {"min", c.min}, {"max", c.max}};
}
inline void from_json(const json& j, ColumnCont& c) {
  j.at("name").get_to(c.name);
  j.at("min").get_to(c.min);
  j.at("max").get_to(c.max);
}
inline void to_json(json& j, const ColumnCat& c) {
  j = json{{"name", c.name}, {"values", c.values}};
}
inline void from_json(const json& j, ColumnCat& c) {
  j.at("name").get_to(c.name);
  j.at("values").get_to(c.values);
}
inline void to_json(json& j, const TableSchema& s) {
  j = json{{"cont", s.cont}, {"cat", s.cat}};
}
inline void from_json(const json& j, TableSchema& s) {
  s.cont = j.at("cont").get<std::vector<ColumnCont>>();
  s.cat = j.at("cat").get<std::vector<ColumnCat>>();
}

struct TableRow {
  std::vector<double> cont;
  std::vector<int> cat;

  bool operator==(const TableRow&) const = default;
};

// The tabular unit for scenario synthesis.
struct FlowRecord {
  int bs_id = 0;
  netsim::TrafficType traffic_type = netsim::TrafficType::Cbr;
  double offered_rate_mbps = 0.0;
  double distance_m = 1.0;
  int hour_bucket = 2;  // night, morning, day, evening

  bool operator==(const FlowRecord&) const = default;
};

inline const std::vector<std::string>& hour_bucket_names() {
  static const std::vector<std::string> names{"night", "morning", "day", "evening"};
  return names;
}

inline TableSchema flow_schema(int num_bs) {
  TableSchema s;
  s.cont.push_back({"offered_rate_mbps", 0.0, 1000.0});
  s.cont.push_back({"distance_m", 0.1, 1000.0});
  ColumnCat bs{"bs_id", {}};
  for (int i = 0; i < num_bs; ++i) bs.values.push_back(std::to_string(i));
  s.cat.push_back(bs);
  s.cat.push_back({"traffic_type", {"CBR", "HTTP", "Video"}});
  s.cat.push_back({"hour_bucket", hour_bucket_names()});
  return s;
}

inline TableRow flow_to_row(const FlowRecord& f) {
  TableRow r;
  r.cont = {f.offered_rate_mbps, f.distance_m};
  r.cat = {f.bs_id, static_cast<int>(f.traffic_type), f.hour_bucket};
  return r;
}

inline FlowRecord row_to_flow(const TableRow& r) {
  FlowRecord f;
  f.offered_rate_mbps = r.cont[0];
  f.distance_m = r.cont[1];
  f.bs_id = r.cat[0];
  f.traffic_type = static_cast<netsim::TrafficType>(r.cat[1]);
  f.hour_bucket = r.cat[2];
  return f;
}

// Tightens the schema's clamping bounds to the observed data range. Observed
// values already respect the schema's domain floors.
inline void fit_schema_bounds(TableSchema& schema, const std::vector<TableRow>& rows) {
  if (rows.empty()) return;
  for (std::size_t c = 0; c < schema.cont.size(); ++c) {
    double lo = rows[0].cont[c], hi = rows[0].cont[c];
    for (const auto& r : rows) {
      lo = std::min(lo, r.cont[c]);
      hi = std::max(hi, r.cont[c]);
    }
    schema.cont[c].min = lo;
    schema.cont[c].max = hi > lo ? hi : lo + 1.0;
  }
}

// ---------------------------------------------------------------------------
// Mode-specific normalization

struct ModeNormalizer {
  gmm::Gmm1D mixture;

  int modes() const { return mixture.modes(); }

  // (x - eta_k) / (4 phi_k) with k sampled proportionally to responsibility.
  std::pair<double, int> encode(double x, RandomStream& rng) const {
    const auto resp = mixture.responsibilities(x);
    const int k = static_cast<int>(rng.discrete(resp));
    return {(x - mixture.mean[k]) / (4.0 * mixture.stddev[k]), k};
  }

  // Deterministic variant used by round-trip checks.
  std::pair<double, int> encode_argmax(double x) const {
    const int k = mixture.argmax_mode(x);
    return {(x - mixture.mean[k]) / (4.0 * mixture.stddev[k]), k};
  }

  double decode(double alpha, int mode) const {
    return mixture.mean[mode] + 4.0 * mixture.stddev[mode] * alpha;
  }
};

inline void to_json(json& j, const ModeNormalizer& n) {
  j = json{{"weight", n.mixture.weight}, {"mean", n.mixture.mean},
           {"stddev", n.mixture.stddev}};
}
inline void from_json(const json& j, ModeNormalizer& n) {
  j.at("weight").get_to(n.mixture.weight);
  j.at("mean").get_to(n.mixture.mean);
  j.at("stddev").get_to(n.mixture.stddev);
}

// EM-fit mixture for one continuous column. A constant column collapses to a
// single floored mode (handled inside gmm::fit).
inline ModeNormalizer fit_normalizer(const std::vector<double>& values, int k) {
  if (k < 1) throw std::invalid_argument("mode count must be >= 1");
  return ModeNormalizer{gmm::fit(values, k).model};
}

// ---------------------------------------------------------------------------
// Conditional vector

struct CondVector {
  int column = 0;  // categorical column index
  int value = 0;   // value index within that column

  // Concatenated one-hot blocks, exactly one bit set.
  std::vector<double> expand(const TableSchema& schema) const {
    std::vector<double> v(schema.cond_dim(), 0.0);
    int off = 0;
    for (int c = 0; c < column; ++c) off += static_cast<int>(schema.cat[c].values.size());
    v[off + value] = 1.0;
    return v;
  }
};

// Training-by-sampling: column uniform, value by log-frequency over training
// counts. Values never seen in training are never conditioned on.
inline CondVector sample_cond_vector(const TableSchema& schema,
                                     const std::vector<std::vector<long long>>& counts,
                                     RandomStream& rng, bool log_frequency = true) {
  if (schema.cat.empty()) throw std::invalid_argument("schema has no categorical column");
  CondVector cv;
  cv.column = static_cast<int>(rng.uniform_int(0, static_cast<long>(schema.cat.size()) - 1));
  std::vector<double> w(schema.cat[cv.column].values.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const long long c = counts[cv.column][i];
    if (c > 0) w[i] = log_frequency ? std::log1p(static_cast<double>(c))
                                    : static_cast<double>(c);
  }
  cv.value = static_cast<int>(rng.discrete(w));
  return cv;
}

// ---------------------------------------------------------------------------
// Row representation

// Layout of the dense row representation consumed and produced by the nets:
// [per continuous column: alpha, mode one-hot] ++ [per categorical: one-hot].
struct RepLayout {
  struct ContBlock {
    int alpha = 0;
    int mode_begin = 0;
    int modes = 0;
  };
  struct CatBlock {
    int begin = 0;
    int card = 0;
  };
  std::vector<ContBlock> cont;
  std::vector<CatBlock> cat;
  int width = 0;
};

inline RepLayout make_layout(const TableSchema& schema,
                             const std::vector<ModeNormalizer>& normalizers) {
  RepLayout l;
  int off = 0;
  for (std::size_t c = 0; c < schema.cont.size(); ++c) {
    RepLayout::ContBlock b;
    b.alpha = off++;
    b.mode_begin = off;
    b.modes = normalizers[c].modes();
    off += b.modes;
    l.cont.push_back(b);
  }
  for (const auto& cc : schema.cat) {
    l.cat.push_back({off, static_cast<int>(cc.values.size())});
    off += static_cast<int>(cc.values.size());
  }
  l.width = off;
  return l;
}

inline std::vector<double> encode_row(const TableRow& row, const RepLayout& layout,
                                      const std::vector<ModeNormalizer>& normalizers,
                                      RandomStream& rng) {
  std::vector<double> rep(layout.width, 0.0);
  for (std::size_t c = 0; c < layout.cont.size(); ++c) {
    const auto [alpha, mode] = normalizers[c].encode(row.cont[c], rng);
    rep[layout.cont[c].alpha] = alpha;
    rep[layout.cont[c].mode_begin + mode] = 1.0;
  }
  for (std::size_t c = 0; c < layout.cat.size(); ++c)
    rep[layout.cat[c].begin + row.cat[c]] = 1.0;
  return rep;
}

// Generator heads: tanh on alphas, softmax over every discrete block.
inline std::vector<double> apply_heads(const std::vector<double>& raw,
                                       const RepLayout& layout) {
  std::vector<double> rep = raw;
  for (const auto& b : layout.cont) {
    rep[b.alpha] = std::tanh(raw[b.alpha]);
    nn::softmax_block(rep, b.mode_begin, b.mode_begin + b.modes);
  }
  for (const auto& b : layout.cat) nn::softmax_block(rep, b.begin, b.begin + b.card);
  return rep;
}

// Maps dL/d(rep) back to dL/d(raw) through the heads.
inline std::vector<double> heads_backward(const std::vector<double>& rep,
                                          const std::vector<double>& d_rep,
                                          const RepLayout& layout) {
  std::vector<double> d_raw = d_rep;
  auto softmax_back = [&](int begin, int end) {
    double dot = 0.0;
    for (int i = begin; i < end; ++i) dot += d_rep[i] * rep[i];
    for (int i = begin; i < end; ++i) d_raw[i] = rep[i] * (d_rep[i] - dot);
  };
  for (const auto& b : layout.cont) {
    d_raw[b.alpha] = d_rep[b.alpha] * (1.0 - rep[b.alpha] * rep[b.alpha]);
    softmax_back(b.mode_begin, b.mode_begin + b.modes);
  }
  for (const auto& b : layout.cat) softmax_back(b.begin, b.begin + b.card);
  return d_raw;
}

// ---------------------------------------------------------------------------
// Objective

// V(D, G) = mean(log d_real) + mean(log(1 - d_fake)); natural log, scores
// strictly inside (0, 1).
inline double gan_value(const std::vector<double>& d_real, const std::vector<double>& d_fake) {
  if (d_real.empty() || d_fake.empty())
    throw std::invalid_argument("gan_value needs non-empty score batches");
  double vr = 0.0, vf = 0.0;
  for (double s : d_real) {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("score outside (0,1)");
    vr += std::log(s);
  }
  for (double s : d_fake) {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("score outside (0,1)");
    vf += std::log1p(-s);
  }
  return vr / d_real.size() + vf / d_fake.size();
}

inline double softplus(double x) {
  return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0);
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// ---------------------------------------------------------------------------
// Model

struct GanHyper {
  int epochs = 300;
  int batch = 64;
  double lr = 1e-3;
  int z_dim = 16;
  std::vector<int> hidden = {64, 64};
  double cond_penalty = 1.0;
  std::uint64_t seed = 1;
};

inline void to_json(json& j, const GanHyper& h) {
  j = json{{"epochs", h.epochs}, {"batch", h.batch},   {"lr", h.lr},
           {"z_dim", h.z_dim},   {"hidden", h.hidden}, {"cond_penalty", h.cond_penalty},
           {"seed", h.seed}};
}
inline void from_json(const json& j, GanHyper& h) {
  h.epochs = j.value("epochs", 300);
  h.batch = j.value("batch", 64);
  h.lr = j.value("lr", 1e-3);
  h.z_dim = j.value("z_dim", 16);
  h.hidden = j.value("hidden", std::vector<int>{64, 64});
  h.cond_penalty = j.value("cond_penalty", 1.0);
  h.seed = j.value("seed", 1ULL);
}

struct GanModel {
  TableSchema schema;
  std::vector<ModeNormalizer> normalizers;
  std::vector<std::vector<long long>> cat_counts;  // per column, per value
  nn::Mlp g, d;
  GanHyper hyper;
  int trained_epochs = 0;
  std::vector<double> value_history;   // Eq. 1 objective per epoch
  std::vector<double> d_loss_history;
  std::vector<double> g_loss_history;

  RepLayout layout() const { return make_layout(schema, normalizers); }

  // Score in (0,1): sigmoid of the discriminator logit, clamped away from
  // the saturation points so downstream logs stay finite.
  double score(const std::vector<double>& rep, const std::vector<double>& cond) const {
    std::vector<double> in = rep;
    in.insert(in.end(), cond.begin(), cond.end());
    const double logit = d.forward(in)[0];
    return std::min(1.0 - 1e-12, std::max(1e-12, sigmoid(logit)));
  }

  std::string id() const {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "gan-%016llx",
                  static_cast<unsigned long long>(
                      derive_seed(hyper.seed, trained_epochs, g.param_count())));
    return buf;
  }

  json to_json_full() const {
    return json{{"schema", schema},
                {"normalizers", normalizers},
                {"cat_counts", cat_counts},
                {"generator", g.to_json()},
                {"discriminator", d.to_json()},
                {"hyper", hyper},
                {"trained_epochs", trained_epochs},
                {"value_history", value_history},
                {"d_loss_history", d_loss_history},
                {"g_loss_history", g_loss_history}};
  }

  static GanModel from_json_full(const json& j) {
    GanModel m;
    m.schema = j.at("schema").get<TableSchema>();
    m.normalizers = j.at("normalizers").get<std::vector<ModeNormalizer>>();
    m.cat_counts = j.at("cat_counts").get<std::vector<std::vector<long long>>>();
    m.g = nn::Mlp::from_json(j.at("generator"));
    m.d = nn::Mlp::from_json(j.at("discriminator"));
    m.hyper = j.at("hyper").get<GanHyper>();
    m.trained_epochs = j.value("trained_epochs", 0);
    m.value_history = j.value("value_history", std::vector<double>{});
    m.d_loss_history = j.value("d_loss_history", std::vector<double>{});
    m.g_loss_history = j.value("g_loss_history", std::vector<double>{});
    return m;
  }

  void save(const std::string& path) const { netsim::save_json_file(to_json_full(), path); }
  static GanModel load(const std::string& path) {
    return from_json_full(netsim::load_json_file(path));
  }

  void write_training_log(std::ostream& os) const {
    os << "epoch,value,d_loss,g_loss\n";
    for (std::size_t e = 0; e < value_history.size(); ++e)
      os << e << ',' << fmt_g6(value_history[e]) << ',' << fmt_g6(d_loss_history[e]) << ','
         << fmt_g6(g_loss_history[e]) << '\n';
  }
};

// ---------------------------------------------------------------------------
// Losses (single code path for training and for finite-difference checks)

struct DBatch {
  std::vector<std::vector<double>> real_reps;
  std::vector<std::vector<double>> conds;  // expanded vectors
  std::vector<std::vector<double>> zs;
};

struct GBatch {
  std::vector<std::vector<double>> conds;
  std::vector<std::vector<double>> zs;
  std::vector<int> target_col;    // conditioned categorical column
  std::vector<int> target_value;  // conditioned value index
};

namespace detail {

inline std::vector<double> concat(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> v = a;
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

inline std::vector<double> fake_rep(const nn::Mlp& g, const RepLayout& layout,
                                    const std::vector<double>& z,
                                    const std::vector<double>& cond,
                                    nn::Cache* cache = nullptr) {
  return apply_heads(g.forward(concat(z, cond), cache), layout);
}

}  // namespace detail

// -[mean log sigma(D(real)) + mean log(1 - sigma(D(fake)))], G held fixed.
inline double d_loss(const nn::Mlp& d, const nn::Mlp& g, const RepLayout& layout,
                     const DBatch& batch) {
  const std::size_t n = batch.real_reps.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double lr_ = d.forward(detail::concat(batch.real_reps[i], batch.conds[i]))[0];
    const auto fake = detail::fake_rep(g, layout, batch.zs[i], batch.conds[i]);
    const double lf = d.forward(detail::concat(fake, batch.conds[i]))[0];
    loss += softplus(-lr_) + softplus(lf);
  }
  return loss / static_cast<double>(n);
}

inline std::pair<double, std::vector<double>> d_loss_grad(const nn::Mlp& d, const nn::Mlp& g,
                                                          const RepLayout& layout,
                                                          const DBatch& batch) {
  const std::size_t n = batch.real_reps.size();
  std::vector<double> grad(d.param_count(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nn::Cache cache;
    const double lr_ = d.forward(detail::concat(batch.real_reps[i], batch.conds[i]), &cache)[0];
    loss += softplus(-lr_);
    d.backward(cache, {(sigmoid(lr_) - 1.0) / static_cast<double>(n)}, grad);

    const auto fake = detail::fake_rep(g, layout, batch.zs[i], batch.conds[i]);
    const double lf = d.forward(detail::concat(fake, batch.conds[i]), &cache)[0];
    loss += softplus(lf);
    d.backward(cache, {sigmoid(lf) / static_cast<double>(n)}, grad);
  }
  return {loss / static_cast<double>(n), std::move(grad)};
}

// Non-saturating generator loss -mean log sigma(D(G(z))) plus a cross-entropy
// penalty that ties the conditioned categorical block to the condition.
inline double g_loss(const nn::Mlp& g, const nn::Mlp& d, const RepLayout& layout,
                     const GBatch& batch, double cond_penalty) {
  const std::size_t n = batch.conds.size();
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto rep = detail::fake_rep(g, layout, batch.zs[i], batch.conds[i]);
    const double lf = d.forward(detail::concat(rep, batch.conds[i]))[0];
    loss += softplus(-lf);
    const auto& blk = layout.cat[batch.target_col[i]];
    loss -= cond_penalty * std::log(std::max(rep[blk.begin + batch.target_value[i]], 1e-300));
  }
  return loss / static_cast<double>(n);
}

inline std::pair<double, std::vector<double>> g_loss_grad(const nn::Mlp& g, const nn::Mlp& d,
                                                          const RepLayout& layout,
                                                          const GBatch& batch,
                                                          double cond_penalty) {
  const std::size_t n = batch.conds.size();
  std::vector<double> grad(g.param_count(), 0.0);
  std::vector<double> d_scratch(d.param_count(), 0.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    nn::Cache g_cache, d_cache;
    const auto raw = g.forward(detail::concat(batch.zs[i], batch.conds[i]), &g_cache);
    const auto rep = apply_heads(raw, layout);
    const double lf = d.forward(detail::concat(rep, batch.conds[i]), &d_cache)[0];
    loss += softplus(-lf);

    // dL/d(d_input) for the adversarial term, restricted to the rep slice.
    const auto d_input_grad =
        d.backward(d_cache, {-sigmoid(-lf) / static_cast<double>(n)}, d_scratch);
    std::vector<double> d_rep(d_input_grad.begin(), d_input_grad.begin() + layout.width);
    auto d_raw = heads_backward(rep, d_rep, layout);

    // Cross-entropy on the conditioned block, in raw (pre-softmax) space.
    const auto& blk = layout.cat[batch.target_col[i]];
    const int tgt = blk.begin + batch.target_value[i];
    loss -= cond_penalty * std::log(std::max(rep[tgt], 1e-300));
    for (int k = blk.begin; k < blk.begin + blk.card; ++k)
      d_raw[k] += cond_penalty * (rep[k] - (k == tgt ? 1.0 : 0.0)) / static_cast<double>(n);

    g.backward(g_cache, d_raw, grad);
  }
  return {loss / static_cast<double>(n), std::move(grad)};
}

// ---------------------------------------------------------------------------
// Training

inline GanModel train(const std::vector<TableRow>& rows, const TableSchema& schema,
                      const GanHyper& hyper) {
  if (rows.size() < 2 * static_cast<std::size_t>(hyper.batch))
    throw std::invalid_argument("need at least 2x batch rows to train");
  if (schema.cat.empty()) throw std::invalid_argument("schema needs a categorical column");

  GanModel m;
  m.schema = schema;
  m.hyper = hyper;

  // Mode-specific normalizers; K chosen by BIC among {1, 2, 3}.
  for (std::size_t c = 0; c < schema.cont.size(); ++c) {
    std::vector<double> col;
    col.reserve(rows.size());
    for (const auto& r : rows) col.push_back(r.cont[c]);
    m.normalizers.push_back(fit_normalizer(col, gmm::select_k_bic(col, 3)));
  }

  // Value counts and per-(column, value) row index for training-by-sampling.
  m.cat_counts.assign(schema.cat.size(), {});
  std::vector<std::vector<std::vector<int>>> rows_by_value(schema.cat.size());
  for (std::size_t c = 0; c < schema.cat.size(); ++c) {
    m.cat_counts[c].assign(schema.cat[c].values.size(), 0);
    rows_by_value[c].assign(schema.cat[c].values.size(), {});
  }
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t c = 0; c < schema.cat.size(); ++c) {
      m.cat_counts[c][rows[i].cat[c]]++;
      rows_by_value[c][rows[i].cat[c]].push_back(static_cast<int>(i));
    }

  const RepLayout layout = make_layout(schema, m.normalizers);
  std::vector<int> g_dims{hyper.z_dim + schema.cond_dim()};
  std::vector<nn::Act> g_acts;
  for (int h : hyper.hidden) {
    g_dims.push_back(h);
    g_acts.push_back(nn::Act::Relu);
  }
  g_dims.push_back(layout.width);
  g_acts.push_back(nn::Act::Linear);
  m.g = nn::Mlp(g_dims, g_acts, derive_seed(hyper.seed, 0x9e0eULL));

  std::vector<int> d_dims{layout.width + schema.cond_dim()};
  std::vector<nn::Act> d_acts;
  for (int h : hyper.hidden) {
    d_dims.push_back(h);
    d_acts.push_back(nn::Act::LeakyRelu);
  }
  d_dims.push_back(1);
  d_acts.push_back(nn::Act::Linear);  // logit head
  m.d = nn::Mlp(d_dims, d_acts, derive_seed(hyper.seed, 0xd15cULL));

  RandomStream rng(derive_seed(hyper.seed, 0x7a41ULL));
  nn::Adam opt_d, opt_g;
  opt_d.lr = hyper.lr;
  opt_g.lr = hyper.lr;

  auto sample_batch = [&](bool for_g) {
    DBatch db;
    GBatch gb;
    for (int i = 0; i < hyper.batch; ++i) {
      const CondVector cv = sample_cond_vector(schema, m.cat_counts, rng, true);
      const auto& pool = rows_by_value[cv.column][cv.value];
      const TableRow& row =
          rows[pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<long>(pool.size()) - 1))]];
      std::vector<double> z(hyper.z_dim);
      for (auto& v : z) v = rng.normal();
      const auto cond = cv.expand(schema);
      if (for_g) {
        gb.conds.push_back(cond);
        gb.zs.push_back(z);
        gb.target_col.push_back(cv.column);
        gb.target_value.push_back(cv.value);
      } else {
        db.real_reps.push_back(encode_row(row, layout, m.normalizers, rng));
        db.conds.push_back(cond);
        db.zs.push_back(z);
      }
    }
    return std::make_pair(db, gb);
  };

  const int steps = std::max<int>(1, static_cast<int>(rows.size()) / hyper.batch);
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    double ep_d = 0.0, ep_g = 0.0;
    for (int step = 0; step < steps; ++step) {
      auto [db, unused] = sample_batch(false);
      auto [dl, dgrad] = d_loss_grad(m.d, m.g, layout, db);
      for (std::size_t i = 0; i < dgrad.size(); ++i)
        if (!std::isfinite(dgrad[i]))
          throw TrainingDivergedError("non-finite discriminator gradient", epoch,
                                      m.d.layer_of_param(i));
      opt_d.step(m.d, dgrad);

      auto [unused2, gb] = sample_batch(true);
      auto [gl, ggrad] = g_loss_grad(m.g, m.d, layout, gb, hyper.cond_penalty);
      for (std::size_t i = 0; i < ggrad.size(); ++i)
        if (!std::isfinite(ggrad[i]))
          throw TrainingDivergedError("non-finite generator gradient", epoch,
                                      m.g.layer_of_param(i));
      opt_g.step(m.g, ggrad);
      if (!std::isfinite(dl) || !std::isfinite(gl))
        throw TrainingDivergedError("non-finite loss", epoch, "loss");
      ep_d += dl;
      ep_g += gl;
    }

    // Epoch log: the plain minimax objective on a fresh evaluation batch.
    auto [db, unused3] = sample_batch(false);
    std::vector<double> sr, sf;
    for (std::size_t i = 0; i < db.real_reps.size(); ++i) {
      sr.push_back(m.score(db.real_reps[i], db.conds[i]));
      sf.push_back(m.score(detail::fake_rep(m.g, layout, db.zs[i], db.conds[i]), db.conds[i]));
    }
    m.value_history.push_back(gan_value(sr, sf));
    m.d_loss_history.push_back(ep_d / steps);
    m.g_loss_history.push_back(ep_g / steps);
    m.trained_epochs++;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Generation

// Draws n rows. With a condition, every row carries the conditioned value
// (hard enforcement at decode). Without one, each row samples a condition by
// raw training frequency, which pins generated categorical marginals to the
// data. Deterministic per seed.
inline std::vector<TableRow> generate(const GanModel& m, int n,
                                      std::optional<std::pair<std::string, std::string>> condition,
                                      std::uint64_t seed) {
  int cond_col = -1, cond_val = -1;
  if (condition) {
    cond_col = m.schema.cat_index(condition->first);
    if (cond_col < 0) throw std::invalid_argument("unknown column: " + condition->first);
    cond_val = m.schema.value_index(cond_col, condition->second);
    if (cond_val < 0)
      throw std::invalid_argument("unknown value '" + condition->second + "' for column " +
                                  condition->first);
  }
  const RepLayout layout = m.layout();
  RandomStream rng(derive_seed(seed, 0x9e4eULL));
  std::vector<TableRow> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    CondVector cv;
    if (condition) {
      cv.column = cond_col;
      cv.value = cond_val;
    } else {
      cv = sample_cond_vector(m.schema, m.cat_counts, rng, false);
    }
    std::vector<double> z(m.hyper.z_dim);
    for (auto& v : z) v = rng.normal();
    const auto rep = detail::fake_rep(m.g, layout, z, cv.expand(m.schema));

    TableRow row;
    for (std::size_t c = 0; c < layout.cont.size(); ++c) {
      const auto& b = layout.cont[c];
      int mode = 0;
      for (int k = 1; k < b.modes; ++k)
        if (rep[b.mode_begin + k] > rep[b.mode_begin + mode]) mode = k;
      double x = m.normalizers[c].decode(rep[b.alpha], mode);
      x = std::min(std::max(x, m.schema.cont[c].min), m.schema.cont[c].max);
      row.cont.push_back(x);
    }
    for (std::size_t c = 0; c < layout.cat.size(); ++c) {
      const auto& b = layout.cat[c];
      if (static_cast<int>(c) == cv.column) {
        row.cat.push_back(cv.value);
        continue;
      }
      int best = 0;
      for (int k = 1; k < b.card; ++k)
        if (rep[b.begin + k] > rep[b.begin + best]) best = k;
      row.cat.push_back(best);
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace twinforge::tabgan
