#include "csgan/neural.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "csgan/error.hpp"

namespace csgan::nn {

// ---------------------------------------------------------------- ParamBlock

std::size_t ParamBlock::add(std::string name, Eigen::Index rows, Eigen::Index cols, InitSpec init) {
  if (index_.count(name)) throw DomainError("duplicate parameter name " + name);
  if (rows <= 0 || cols <= 0) throw ShapeError("parameter " + name + " must have positive shape");
  std::size_t i = entries_.size();
  index_.emplace(name, i);
  entries_.push_back({std::move(name), Matrix::Zero(rows, cols), init});
  return i;
}

std::size_t ParamBlock::index(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw DomainError("unknown parameter " + std::string(name));
  return it->second;
}

bool ParamBlock::contains(std::string_view name) const { return index_.count(std::string(name)) > 0; }

void ParamBlock::initialize(std::uint64_t seed) {
  Rng rng(seed);
  for (auto& e : entries_) {
    switch (e.init.kind) {
      case InitSpec::Kind::Zero:
        e.value.setZero();
        break;
      case InitSpec::Kind::Uniform: {
        std::uniform_real_distribution<double> dist(-e.init.range, e.init.range);
        for (Eigen::Index c = 0; c < e.value.cols(); ++c)
          for (Eigen::Index r = 0; r < e.value.rows(); ++r) e.value(r, c) = dist(rng);
        break;
      }
      case InitSpec::Kind::LstmBias: {
        e.value.setZero();
        Eigen::Index h = e.value.cols() / 4;
        e.value.block(0, h, 1, h).setOnes();  // forget gate
        break;
      }
    }
  }
}

void ParamBlock::set_zero() {
  for (auto& e : entries_) e.value.setZero();
}

bool ParamBlock::all_finite() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.value.allFinite(); });
}

std::size_t ParamBlock::parameter_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.value.size());
  return n;
}

std::vector<std::size_t> ParamBlock::indices_with_prefix(std::string_view prefix) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries_.size(); ++i)
    if (std::string_view(entries_[i].name).substr(0, prefix.size()) == prefix) out.push_back(i);
  return out;
}

bool ParamBlock::operator==(const ParamBlock& o) const {
  if (entries_.size() != o.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = o.entries_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols()) return false;
    if (!(a.value.array() == b.value.array()).all()) return false;
  }
  return true;
}

// ----------------------------------------------------------------- GradBlock

GradBlock::GradBlock(const ParamBlock& params) {
  grads_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    grads_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
}

void GradBlock::set_zero() {
  for (auto& g : grads_) g.setZero();
}

void GradBlock::add(const GradBlock& o, double scale) {
  if (o.grads_.size() != grads_.size()) throw ShapeError("gradient blocks have different layouts");
  for (std::size_t i = 0; i < grads_.size(); ++i) grads_[i] += scale * o.grads_[i];
}

void GradBlock::scale(double s) {
  for (auto& g : grads_) g *= s;
}

double GradBlock::squared_norm(std::span<const std::size_t> indices) const {
  double s = 0.0;
  for (std::size_t i : indices) s += grads_[i].squaredNorm();
  return s;
}

double GradBlock::squared_norm() const {
  double s = 0.0;
  for (const auto& g : grads_) s += g.squaredNorm();
  return s;
}

// ---------------------------------------------------------------------- Tape

Matrix* BackwardContext::node_grad(NodeId id) {
  if (!tape_.nodes_[id].requires_grad) return nullptr;
  if (!tape_.has_grad_[id]) {
    const auto& v = tape_.nodes_[id].value;
    tape_.node_grads_[id] = Matrix::Zero(v.rows(), v.cols());
    tape_.has_grad_[id] = true;
  }
  return &tape_.node_grads_[id];
}

Matrix* BackwardContext::param_grad(std::size_t index) {
  if (!tape_.trainable(index)) return nullptr;
  return &grads_[index];
}

Tape::Tape(const ParamBlock& params, bool record)
    : params_(params), record_(record), frozen_(params.size(), false) {}

void Tape::freeze(std::string_view prefix) {
  for (std::size_t i : params_.indices_with_prefix(prefix)) frozen_[i] = true;
}

bool Tape::trainable(std::size_t param_index) const { return record_ && !frozen_[param_index]; }

NodeId Tape::input(Matrix value) {
  nodes_.push_back({std::move(value), record_, nullptr});
  return nodes_.size() - 1;
}

NodeId Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), false, nullptr});
  return nodes_.size() - 1;
}

NodeId Tape::push(Matrix value, bool depends, BackwardFn backward) {
  bool keep = record_ && depends;
  nodes_.push_back({std::move(value), keep, keep ? std::move(backward) : nullptr});
  return nodes_.size() - 1;
}

GradBlock Tape::backward(NodeId output, const Matrix& upstream) {
  GradBlock grads(params_);
  backward(output, upstream, grads);
  return grads;
}

void Tape::backward(NodeId output, const Matrix& upstream, GradBlock& grads) {
  if (!record_) throw LifecycleError("backward() on an inference-only tape");
  if (consumed_) throw LifecycleError("tape already consumed by a previous backward()");
  consumed_ = true;
  if (output >= nodes_.size()) throw DomainError("backward() from an unknown node");
  if (grads.size() != params_.size()) throw ShapeError("gradient block does not match the tape's parameters");
  const Matrix& out = nodes_[output].value;
  if (upstream.rows() != out.rows() || upstream.cols() != out.cols())
    throw ShapeError("upstream gradient shape does not match the output node");

  node_grads_.assign(nodes_.size(), Matrix());
  has_grad_.assign(nodes_.size(), false);
  if (!nodes_[output].requires_grad) return;
  node_grads_[output] = upstream;
  has_grad_[output] = true;
  BackwardContext ctx(*this, grads);
  for (std::size_t k = output + 1; k-- > 0;) {
    if (!has_grad_[k] || !nodes_[k].backward) continue;
    nodes_[k].backward(node_grads_[k], ctx);
  }
}

const Matrix& Tape::input_grad(NodeId id) const {
  if (!consumed_) throw LifecycleError("input_grad() before backward()");
  if (!has_grad_.at(id)) {
    static thread_local Matrix empty;
    const auto& v = nodes_[id].value;
    empty = Matrix::Zero(v.rows(), v.cols());
    return empty;
  }
  return node_grads_[id];
}

// ------------------------------------------------------------- Construction

std::size_t add_embedding(ParamBlock& block, const std::string& name, Eigen::Index rows, Eigen::Index dim) {
  return block.add(name, rows, dim, {InitSpec::Kind::Uniform, kEmbeddingInitRange});
}

DenseParams add_dense(ParamBlock& block, const std::string& prefix, Eigen::Index in, Eigen::Index out) {
  DenseParams p;
  p.w = block.add(prefix + ".W", out, in, {InitSpec::Kind::Uniform, kWeightInitRange});
  p.b = block.add(prefix + ".b", 1, out, {InitSpec::Kind::Zero, 0.0});
  return p;
}

LstmParams add_lstm(ParamBlock& block, const std::string& prefix, Eigen::Index in, Eigen::Index hidden) {
  LstmParams p;
  p.hidden = hidden;
  p.w = block.add(prefix + ".W", 4 * hidden, in, {InitSpec::Kind::Uniform, kWeightInitRange});
  p.u = block.add(prefix + ".U", 4 * hidden, hidden, {InitSpec::Kind::Uniform, kWeightInitRange});
  p.b = block.add(prefix + ".b", 1, 4 * hidden, {InitSpec::Kind::LstmBias, 0.0});
  return p;
}

BlstmParams add_blstm(ParamBlock& block, const std::string& prefix, Eigen::Index in, Eigen::Index hidden) {
  return {add_lstm(block, prefix + ".fw", in, hidden), add_lstm(block, prefix + ".bw", in, hidden)};
}

// ----------------------------------------------------------------------- Ops

double sigmoid(double a) {
  if (a >= 0) return 1.0 / (1.0 + std::exp(-a));
  double e = std::exp(a);
  return e / (1.0 + e);
}

namespace {

Matrix sigmoid_m(const Matrix& a) { return a.unaryExpr([](double v) { return sigmoid(v); }); }

}  // namespace

NodeId embed(Tape& tape, std::size_t table, std::span<const std::int32_t> ids) {
  const Matrix& e = tape.params().value(table);
  if (ids.empty()) throw DomainError("embedding lookup of an empty sequence");
  Matrix out(static_cast<Eigen::Index>(ids.size()), e.cols());
  for (std::size_t t = 0; t < ids.size(); ++t) {
    if (ids[t] < 0 || ids[t] >= e.rows())
      throw DomainError("embedding id " + std::to_string(ids[t]) + " out of range for " + tape.params().name(table));
    out.row(static_cast<Eigen::Index>(t)) = e.row(ids[t]);
  }
  std::vector<std::int32_t> keep(ids.begin(), ids.end());
  return tape.push(std::move(out), tape.trainable(table), [table, keep](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.param_grad(table))
      for (std::size_t t = 0; t < keep.size(); ++t) g->row(keep[t]) += up.row(static_cast<Eigen::Index>(t));
  });
}

NodeId concat_cols(Tape& tape, NodeId a, NodeId b) {
  const Matrix& va = tape.value(a);
  const Matrix& vb = tape.value(b);
  if (va.rows() != vb.rows()) throw ShapeError("concat_cols: row counts differ");
  Matrix out(va.rows(), va.cols() + vb.cols());
  out << va, vb;
  Eigen::Index ca = va.cols();
  Eigen::Index cb = vb.cols();
  return tape.push(std::move(out), tape.requires_grad(a) || tape.requires_grad(b),
                   [a, b, ca, cb](const Matrix& up, BackwardContext& ctx) {
                     if (Matrix* g = ctx.node_grad(a)) *g += up.leftCols(ca);
                     if (Matrix* g = ctx.node_grad(b)) *g += up.rightCols(cb);
                   });
}

NodeId broadcast_rows(Tape& tape, NodeId row, Eigen::Index rows) {
  const Matrix& v = tape.value(row);
  if (v.rows() != 1) throw ShapeError("broadcast_rows expects a single row");
  Matrix out = v.replicate(rows, 1);
  return tape.push(std::move(out), tape.requires_grad(row), [row](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.node_grad(row)) *g += up.colwise().sum();
  });
}

NodeId lstm(Tape& tape, const LstmParams& p, NodeId x, bool reverse) {
  const ParamBlock& params = tape.params();
  const Matrix& X = tape.value(x);
  const Matrix& W = params.value(p.w);
  const Matrix& U = params.value(p.u);
  const Matrix& bias = params.value(p.b);
  const Eigen::Index T = X.rows();
  const Eigen::Index H = p.hidden;
  if (T == 0) throw DomainError("LSTM over an empty sequence");
  if (X.cols() != W.cols()) throw ShapeError("LSTM input width does not match " + params.name(p.w));
  if (!X.allFinite()) throw NumericError("non-finite LSTM input");

  Matrix A = X * W.transpose();
  A.rowwise() += bias.row(0);
  Matrix I(T, H), F(T, H), O(T, H), G(T, H), C(T, H), TC(T, H), Hs(T, H);
  RowVector h = RowVector::Zero(H);
  RowVector c = RowVector::Zero(H);
  for (Eigen::Index k = 0; k < T; ++k) {
    Eigen::Index t = reverse ? T - 1 - k : k;
    RowVector a = A.row(t) + h * U.transpose();
    RowVector i = sigmoid_m(a.segment(0, H));
    RowVector f = sigmoid_m(a.segment(H, H));
    RowVector o = sigmoid_m(a.segment(2 * H, H));
    RowVector g = a.segment(3 * H, H).array().tanh();
    c = f.cwiseProduct(c) + i.cwiseProduct(g);
    RowVector tc = c.array().tanh();
    h = o.cwiseProduct(tc);
    I.row(t) = i;
    F.row(t) = f;
    O.row(t) = o;
    G.row(t) = g;
    C.row(t) = c;
    TC.row(t) = tc;
    Hs.row(t) = h;
  }

  bool depends = tape.requires_grad(x) || tape.trainable(p.w) || tape.trainable(p.u) || tape.trainable(p.b);
  Matrix out = Hs;
  return tape.push(
      std::move(out), depends,
      [&tape, p, x, reverse, I, F, O, G, C, TC, Hs](const Matrix& up, BackwardContext& ctx) {
        const ParamBlock& params = tape.params();
        const Matrix& X = tape.value(x);
        const Matrix& W = params.value(p.w);
        const Matrix& U = params.value(p.u);
        const Eigen::Index T = X.rows();
        const Eigen::Index H = p.hidden;
        Matrix dA(T, 4 * H);
        Matrix Hprev = Matrix::Zero(T, H);
        RowVector dh_next = RowVector::Zero(H);
        RowVector dc_next = RowVector::Zero(H);
        for (Eigen::Index k = T; k-- > 0;) {
          Eigen::Index t = reverse ? T - 1 - k : k;
          Eigen::Index prev = reverse ? t + 1 : t - 1;
          bool has_prev = k > 0;
          RowVector dh = up.row(t) + dh_next;
          RowVector tc = TC.row(t);
          RowVector d_o = dh.cwiseProduct(tc);
          RowVector dc = dh.cwiseProduct(O.row(t)).cwiseProduct((1.0 - tc.array().square()).matrix()) + dc_next;
          RowVector c_prev = has_prev ? RowVector(C.row(prev)) : RowVector::Zero(H);
          if (has_prev) Hprev.row(t) = Hs.row(prev);
          RowVector i = I.row(t);
          RowVector f = F.row(t);
          RowVector o = O.row(t);
          RowVector g = G.row(t);
          dA.row(t).segment(0, H) = dc.cwiseProduct(g).array() * i.array() * (1.0 - i.array());
          dA.row(t).segment(H, H) = dc.cwiseProduct(c_prev).array() * f.array() * (1.0 - f.array());
          dA.row(t).segment(2 * H, H) = d_o.array() * o.array() * (1.0 - o.array());
          dA.row(t).segment(3 * H, H) = dc.cwiseProduct(i).array() * (1.0 - g.array().square());
          dh_next = dA.row(t) * U;
          dc_next = dc.cwiseProduct(f);
        }
        if (Matrix* g = ctx.param_grad(p.w)) g->noalias() += dA.transpose() * X;
        if (Matrix* g = ctx.param_grad(p.u)) g->noalias() += dA.transpose() * Hprev;
        if (Matrix* g = ctx.param_grad(p.b)) *g += dA.colwise().sum();
        if (Matrix* g = ctx.node_grad(x)) g->noalias() += dA * W;
      });
}

NodeId blstm(Tape& tape, const BlstmParams& p, NodeId x) {
  NodeId fw = lstm(tape, p.forward, x, false);
  NodeId bw = lstm(tape, p.backward, x, true);
  return concat_cols(tape, fw, bw);
}

NodeId final_states(Tape& tape, NodeId seq) {
  const Matrix& v = tape.value(seq);
  if (v.cols() % 2 != 0) throw ShapeError("final_states expects an even-width BLSTM output");
  Eigen::Index h = v.cols() / 2;
  Eigen::Index last = v.rows() - 1;
  Matrix out(1, 2 * h);
  out << v.block(last, 0, 1, h), v.block(0, h, 1, h);
  return tape.push(std::move(out), tape.requires_grad(seq), [seq, h, last](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.node_grad(seq)) {
      g->block(last, 0, 1, h) += up.leftCols(h);
      g->block(0, h, 1, h) += up.rightCols(h);
    }
  });
}

NodeId mean_rows(Tape& tape, NodeId x) {
  const Matrix& v = tape.value(x);
  double n = static_cast<double>(v.rows());
  Matrix out = v.colwise().mean();
  return tape.push(std::move(out), tape.requires_grad(x), [x, n](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.node_grad(x)) g->rowwise() += up.row(0) / n;
  });
}

NodeId dense(Tape& tape, const DenseParams& p, NodeId x) {
  const Matrix& X = tape.value(x);
  const Matrix& W = tape.params().value(p.w);
  const Matrix& b = tape.params().value(p.b);
  if (X.cols() != W.cols())
    throw ShapeError("dense input width " + std::to_string(X.cols()) + " does not match " + tape.params().name(p.w) +
                     " (" + std::to_string(W.cols()) + ")");
  Matrix out = X * W.transpose();
  out.rowwise() += b.row(0);
  bool depends = tape.requires_grad(x) || tape.trainable(p.w) || tape.trainable(p.b);
  return tape.push(std::move(out), depends, [&tape, p, x](const Matrix& up, BackwardContext& ctx) {
    const Matrix& X = tape.value(x);
    if (Matrix* g = ctx.param_grad(p.w)) g->noalias() += up.transpose() * X;
    if (Matrix* g = ctx.param_grad(p.b)) *g += up.colwise().sum();
    if (Matrix* g = ctx.node_grad(x)) g->noalias() += up * tape.params().value(p.w);
  });
}

NodeId sigmoid(Tape& tape, NodeId x) {
  Matrix y = sigmoid_m(tape.value(x));
  Matrix keep = y;
  return tape.push(std::move(y), tape.requires_grad(x), [x, keep](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.node_grad(x)) *g += (up.array() * keep.array() * (1.0 - keep.array())).matrix();
  });
}

NodeId dense_sigmoid(Tape& tape, const DenseParams& p, NodeId x) { return sigmoid(tape, dense(tape, p, x)); }

Matrix dropout(const Matrix& x, double rate, Rng& rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout rate must lie in [0, 1)");
  if (mode == Mode::Eval || rate == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - rate);
  double scale = 1.0 / (1.0 - rate);
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c)
    for (Eigen::Index r = 0; r < x.rows(); ++r) out(r, c) = keep(rng) ? x(r, c) * scale : 0.0;
  return out;
}

NodeId dropout(Tape& tape, NodeId x, double rate, Rng& rng, Mode mode) {
  if (rate < 0.0 || rate >= 1.0) throw DomainError("dropout rate must lie in [0, 1)");
  if (mode == Mode::Eval || rate == 0.0) return x;
  const Matrix& v = tape.value(x);
  std::bernoulli_distribution keep(1.0 - rate);
  double scale = 1.0 / (1.0 - rate);
  Matrix mask(v.rows(), v.cols());
  for (Eigen::Index c = 0; c < v.cols(); ++c)
    for (Eigen::Index r = 0; r < v.rows(); ++r) mask(r, c) = keep(rng) ? scale : 0.0;
  Matrix out = v.cwiseProduct(mask);
  return tape.push(std::move(out), tape.requires_grad(x), [x, mask](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.node_grad(x)) *g += up.cwiseProduct(mask);
  });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    double mx = logits.row(r).maxCoeff();
    RowVector e = (logits.row(r).array() - mx).exp();
    out.row(r) = e / e.sum();
  }
  return out;
}

NodeId softmax_xent(Tape& tape, NodeId logits, std::span<const std::int32_t> targets) {
  const Matrix& z = tape.value(logits);
  if (static_cast<Eigen::Index>(targets.size()) != z.rows())
    throw ShapeError("softmax_xent: one target per row required");
  Matrix P = softmax_rows(z);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    auto t = targets[static_cast<std::size_t>(r)];
    if (t < 0 || t >= z.cols()) throw DomainError("softmax_xent target out of range");
    double mx = z.row(r).maxCoeff();
    double lse = mx + std::log((z.row(r).array() - mx).exp().sum());
    loss += lse - z(r, t);
  }
  Matrix out(1, 1);
  out(0, 0) = loss;
  std::vector<std::int32_t> keep(targets.begin(), targets.end());
  return tape.push(std::move(out), tape.requires_grad(logits),
                   [logits, keep, P](const Matrix& up, BackwardContext& ctx) {
                     if (Matrix* g = ctx.node_grad(logits)) {
                       Matrix d = P;
                       for (std::size_t r = 0; r < keep.size(); ++r) d(static_cast<Eigen::Index>(r), keep[r]) -= 1.0;
                       *g += up(0, 0) * d;
                     }
                   });
}

NodeId sum_all(Tape& tape, NodeId x) {
  Matrix out(1, 1);
  out(0, 0) = tape.value(x).sum();
  return tape.push(std::move(out), tape.requires_grad(x), [x](const Matrix& up, BackwardContext& ctx) {
    if (Matrix* g = ctx.node_grad(x)) g->array() += up(0, 0);
  });
}

// ---------------------------------------------------------------------- Adam

AdamState make_adam(const ParamBlock& params, std::vector<std::size_t> indices, AdamConfig config) {
  AdamState s;
  s.config = config;
  s.indices = std::move(indices);
  for (std::size_t i : s.indices) {
    const Matrix& v = params.value(i);
    s.m.push_back(Matrix::Zero(v.rows(), v.cols()));
    s.v.push_back(Matrix::Zero(v.rows(), v.cols()));
  }
  return s;
}

AdamState make_adam(const ParamBlock& params, AdamConfig config) {
  std::vector<std::size_t> all(params.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return make_adam(params, std::move(all), config);
}

double adam_step(ParamBlock& params, const GradBlock& grads, AdamState& state) {
  if (grads.size() != params.size()) throw ShapeError("gradient block does not match parameters");
  for (std::size_t i : state.indices) {
    if (grads[i].rows() != params.value(i).rows() || grads[i].cols() != params.value(i).cols())
      throw ShapeError("gradient shape mismatch for " + params.name(i));
    if (!grads[i].allFinite()) throw NumericError("non-finite gradient for " + params.name(i));
  }
  double norm = std::sqrt(grads.squared_norm(state.indices));
  const auto& cfg = state.config;
  double scale = (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) ? cfg.clip_norm / norm : 1.0;
  ++state.t;
  double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < state.indices.size(); ++k) {
    std::size_t i = state.indices[k];
    Matrix g = grads[i] * scale;
    state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
    state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g.cwiseProduct(g);
    params.value(i).array() -=
        cfg.step_size * (state.m[k].array() / bc1) / ((state.v[k].array() / bc2).sqrt() + cfg.epsilon);
  }
  return norm;
}

// ---------------------------------------------------------------- grad check

double relative_error(double analytic, double numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult grad_check(const std::function<double(const ParamBlock&)>& loss, ParamBlock& params,
                           const GradBlock& analytic, double eps, std::size_t coords_per_param, Rng& rng) {
  if (eps <= 0.0) throw DomainError("grad_check eps must be positive");
  GradCheckResult result;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& v = params.value(i);
    std::vector<Eigen::Index> coords;
    if (static_cast<std::size_t>(v.size()) <= coords_per_param) {
      for (Eigen::Index k = 0; k < v.size(); ++k) coords.push_back(k);
    } else {
      std::uniform_int_distribution<Eigen::Index> pick(0, v.size() - 1);
      for (std::size_t k = 0; k < coords_per_param; ++k) coords.push_back(pick(rng));
    }
    for (Eigen::Index k : coords) {
      double saved = v.data()[k];
      auto at = [&](double delta) {
        v.data()[k] = saved + delta;
        return loss(params);
      };
      // five-point central stencil: O(eps^4) truncation lets eps stay large
      // enough that rounding noise sits far below the relative-error floor
      double numeric = (at(-2 * eps) - 8 * at(-eps) + 8 * at(eps) - at(2 * eps)) / (12.0 * eps);
      v.data()[k] = saved;
      double err = relative_error(analytic[i].data()[k], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = params.name(i);
      }
    }
  }
  return result;
}

// ----------------------------------------------------------------- Container

void Container::put_params(const ParamBlock& params) {
  for (std::size_t i = 0; i < params.size(); ++i) matrices.emplace_back(params.name(i), params.value(i));
}

void Container::get_params(ParamBlock& params) const {
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = std::find_if(matrices.begin(), matrices.end(), [&](const auto& m) { return m.first == params.name(i); });
    if (it == matrices.end()) throw ShapeError("checkpoint lacks parameter " + params.name(i));
    if (it->second.rows() != params.value(i).rows() || it->second.cols() != params.value(i).cols())
      throw ShapeError("checkpoint shape mismatch for " + params.name(i));
    params.value(i) = it->second;
  }
}

const std::string& Container::require_meta(const std::string& key) const {
  auto it = meta.find(key);
  if (it == meta.end()) throw ParseError("checkpoint lacks metadata key " + key, 0);
  return it->second;
}

void write_container(std::ostream& out, const Container& c) {
  out << "csgan-container " << kContainerVersion << '\n';
  for (const auto& [k, v] : c.meta) {
    if (k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw DomainError("metadata entry " + k + " cannot be serialized");
    out << "meta " << k << '\t' << v << '\n';
  }
  for (const auto& [name, items] : c.lists) {
    out << "list " << name << ' ' << items.size() << '\n';
    for (const auto& item : items) {
      if (item.find('\n') != std::string::npos) throw DomainError("list item with newline in " + name);
      out << item << '\n';
    }
  }
  char buf[64];
  for (const auto& [name, m] : c.matrices) {
    out << "matrix " << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index col = 0; col < m.cols(); ++col) {
        auto res = std::to_chars(buf, buf + sizeof buf, m(r, col));
        if (col) out << ' ';
        out.write(buf, res.ptr - buf);
      }
      out << '\n';
    }
  }
  out << "end\n";
}

Container read_container(std::istream& in) {
  Container c;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError("empty checkpoint", 1);
  {
    std::istringstream head(line);
    std::string magic;
    int version = 0;
    head >> magic >> version;
    if (magic != "csgan-container") throw ParseError("not a csgan container", 1);
    if (version != kContainerVersion) throw ParseError("unsupported container version " + std::to_string(version), 1);
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (line == "end") return c;
    if (line.rfind("meta ", 0) == 0) {
      auto tab = line.find('\t');
      if (tab == std::string::npos) throw ParseError("malformed meta record", lineno);
      c.meta[line.substr(5, tab - 5)] = line.substr(tab + 1);
    } else if (line.rfind("list ", 0) == 0) {
      std::istringstream is(line.substr(5));
      std::string name;
      std::size_t n = 0;
      if (!(is >> name >> n)) throw ParseError("malformed list header", lineno);
      auto& items = c.lists[name];
      items.reserve(n);
      for (std::size_t k = 0; k < n; ++k) {
        if (!std::getline(in, line)) throw ParseError("truncated list " + name, lineno);
        ++lineno;
        items.push_back(line);
      }
    } else if (line.rfind("matrix ", 0) == 0) {
      std::istringstream is(line.substr(7));
      std::string name;
      Eigen::Index rows = 0;
      Eigen::Index cols = 0;
      if (!(is >> name >> rows >> cols) || rows < 0 || cols < 0) throw ParseError("malformed matrix header", lineno);
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r) {
        if (!std::getline(in, line)) throw ParseError("truncated matrix " + name, lineno);
        ++lineno;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        for (Eigen::Index col = 0; col < cols; ++col) {
          while (p < end && *p == ' ') ++p;
          double v = 0.0;
          auto res = std::from_chars(p, end, v);
          if (res.ec != std::errc()) throw ParseError("bad value in matrix " + name, lineno);
          m(r, col) = v;
          p = res.ptr;
        }
      }
      c.matrices.emplace_back(std::move(name), std::move(m));
    } else {
      throw ParseError("unknown container record", lineno);
    }
  }
  throw ParseError("checkpoint missing end marker", lineno);
}

void save_container(const std::string& path, const Container& c) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint " + path);
  write_container(out, c);
}

Container load_container(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_container(in);
}

}  // namespace csgan::nn
