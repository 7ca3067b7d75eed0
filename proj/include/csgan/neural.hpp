#pragma once

// Fixed-layer reverse-mode differentiation for per-sentence models.
//
// Parameters live in a ParamBlock (named, ordered matrices). Forward ops record
// onto a Tape; Tape::backward returns a GradBlock with the same keys as the
// ParamBlock. Sequences are matrices with one row per time step.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace csgan::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;
using Rng = std::mt19937_64;

struct InitSpec {
  enum class Kind : std::uint8_t { Zero, Uniform, LstmBias } kind = Kind::Zero;
  double range = 0.0;  // Uniform: values in [-range, range]
};

class ParamBlock {
 public:
  std::size_t add(std::string name, Eigen::Index rows, Eigen::Index cols, InitSpec init = {});

  std::size_t size() const { return entries_.size(); }
  std::size_t index(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::string& name(std::size_t i) const { return entries_[i].name; }
  Matrix& value(std::size_t i) { return entries_[i].value; }
  const Matrix& value(std::size_t i) const { return entries_[i].value; }
  Matrix& value(std::string_view name) { return entries_[index(name)].value; }
  const Matrix& value(std::string_view name) const { return entries_[index(name)].value; }
  const InitSpec& init_spec(std::size_t i) const { return entries_[i].init; }

  /// Applies every entry's InitSpec in insertion order from one seeded stream.
  void initialize(std::uint64_t seed);
  void set_zero();
  bool all_finite() const;
  std::size_t parameter_count() const;
  /// Indices whose names start with `prefix`.
  std::vector<std::size_t> indices_with_prefix(std::string_view prefix) const;
  bool operator==(const ParamBlock& o) const;

 private:
  struct Entry {
    std::string name;
    Matrix value;
    InitSpec init;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Gradients keyed like a ParamBlock (same indices, same shapes).
class GradBlock {
 public:
  GradBlock() = default;
  explicit GradBlock(const ParamBlock& params);

  std::size_t size() const { return grads_.size(); }
  Matrix& operator[](std::size_t i) { return grads_[i]; }
  const Matrix& operator[](std::size_t i) const { return grads_[i]; }
  void set_zero();
  void add(const GradBlock& o, double scale = 1.0);
  void scale(double s);
  double squared_norm(std::span<const std::size_t> indices) const;
  double squared_norm() const;

 private:
  std::vector<Matrix> grads_;
};

enum class Mode : std::uint8_t { Train, Eval };

using NodeId = std::size_t;

class Tape;

/// Accumulation targets handed to an op's backward closure.
class BackwardContext {
 public:
  /// Gradient slot of an input node, or nullptr when that node needs no gradient.
  Matrix* node_grad(NodeId id);
  /// Gradient slot of a parameter, or nullptr when the parameter is frozen.
  Matrix* param_grad(std::size_t index);

 private:
  friend class Tape;
  BackwardContext(Tape& tape, GradBlock& grads) : tape_(tape), grads_(grads) {}
  Tape& tape_;
  GradBlock& grads_;
};

class Tape {
 public:
  using BackwardFn = std::function<void(const Matrix& upstream, BackwardContext& ctx)>;

  /// `record = false` builds an inference-only tape: ops still compute values but
  /// keep no closures, and backward() is a lifecycle error.
  explicit Tape(const ParamBlock& params, bool record = true);

  const ParamBlock& params() const { return params_; }
  bool recording() const { return record_; }

  /// Excludes every parameter whose name starts with `prefix` from gradients.
  void freeze(std::string_view prefix);
  bool trainable(std::size_t param_index) const;

  NodeId input(Matrix value);     // leaf with a retrievable gradient
  NodeId constant(Matrix value);  // leaf without gradient
  const Matrix& value(NodeId id) const { return nodes_.at(id).value; }
  bool requires_grad(NodeId id) const { return nodes_.at(id).requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  /// Records an op output. `depends` says whether any input or trainable
  /// parameter feeds it; when false (or not recording) the closure is dropped.
  NodeId push(Matrix value, bool depends, BackwardFn backward);

  /// Reverse pass seeded with `upstream` at `output`. A tape can be consumed once.
  GradBlock backward(NodeId output, const Matrix& upstream);
  /// Same, accumulating into an existing block laid out like params().
  void backward(NodeId output, const Matrix& upstream, GradBlock& into);
  /// Gradient w.r.t. an input() leaf after backward().
  const Matrix& input_grad(NodeId id) const;

 private:
  friend class BackwardContext;
  struct Node {
    Matrix value;
    bool requires_grad = false;
    BackwardFn backward;
  };
  const ParamBlock& params_;
  bool record_;
  bool consumed_ = false;
  std::vector<bool> frozen_;
  std::vector<Node> nodes_;
  std::vector<Matrix> node_grads_;
  std::vector<bool> has_grad_;
};

struct DenseParams {
  std::size_t w = 0;  // out x in
  std::size_t b = 0;  // 1 x out
};

struct LstmParams {
  std::size_t w = 0;  // 4H x in, gate blocks ordered input, forget, output, candidate
  std::size_t u = 0;  // 4H x H
  std::size_t b = 0;  // 1 x 4H
  Eigen::Index hidden = 0;
};

struct BlstmParams {
  LstmParams forward;
  LstmParams backward;
};

inline constexpr double kWeightInitRange = 0.08;
inline constexpr double kEmbeddingInitRange = 0.1;

std::size_t add_embedding(ParamBlock& block, const std::string& name, Eigen::Index rows, Eigen::Index dim);
DenseParams add_dense(ParamBlock& block, const std::string& prefix, Eigen::Index in, Eigen::Index out);
LstmParams add_lstm(ParamBlock& block, const std::string& prefix, Eigen::Index in, Eigen::Index hidden);
BlstmParams add_blstm(ParamBlock& block, const std::string& prefix, Eigen::Index in, Eigen::Index hidden);

// Ops. Each returns the id of its output node.

/// Row lookup: output row t is table row ids[t]. Throws DomainError on a bad id.
NodeId embed(Tape& tape, std::size_t table, std::span<const std::int32_t> ids);
NodeId concat_cols(Tape& tape, NodeId a, NodeId b);
/// Repeats a 1 x D row for `rows` rows.
NodeId broadcast_rows(Tape& tape, NodeId row, Eigen::Index rows);
NodeId lstm(Tape& tape, const LstmParams& p, NodeId x, bool reverse = false);
/// Per-step [forward | backward] hidden states, T x 2H.
NodeId blstm(Tape& tape, const BlstmParams& p, NodeId x);
/// [last forward state | first-position backward state], 1 x 2H.
NodeId final_states(Tape& tape, NodeId blstm_out);
NodeId mean_rows(Tape& tape, NodeId x);
/// x W^T + b, row-wise.
NodeId dense(Tape& tape, const DenseParams& p, NodeId x);
NodeId sigmoid(Tape& tape, NodeId x);
NodeId dense_sigmoid(Tape& tape, const DenseParams& p, NodeId x);
/// Inverted dropout; identity in Eval mode or at rate 0.
NodeId dropout(Tape& tape, NodeId x, double rate, Rng& rng, Mode mode);
/// Sum over rows of -log softmax(logits)[target]; 1 x 1.
NodeId softmax_xent(Tape& tape, NodeId logits, std::span<const std::int32_t> targets);
NodeId sum_all(Tape& tape, NodeId x);

/// Tape-free dropout on a plain matrix.
Matrix dropout(const Matrix& x, double rate, Rng& rng, Mode mode);
Matrix softmax_rows(const Matrix& logits);
double sigmoid(double a);

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;  // global-norm clip over the optimized set; <= 0 disables
};

struct AdamState {
  AdamConfig config;
  std::vector<std::size_t> indices;  // parameters this optimizer owns
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t t = 0;
};

AdamState make_adam(const ParamBlock& params, std::vector<std::size_t> indices, AdamConfig config);
AdamState make_adam(const ParamBlock& params, AdamConfig config);  // all parameters

/// Bias-corrected Adam on the owned parameters. Throws NumericError naming the
/// first parameter with a non-finite gradient. Returns the pre-clip gradient norm.
double adam_step(ParamBlock& params, const GradBlock& grads, AdamState& state);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t checked = 0;
};

/// Compares `analytic` with five-point central differences of `loss` (step
/// `eps`, 1e-3 is a good choice in double precision) on up to
/// `coords_per_param` randomly chosen coordinates per parameter.
GradCheckResult grad_check(const std::function<double(const ParamBlock&)>& loss, ParamBlock& params,
                           const GradBlock& analytic, double eps, std::size_t coords_per_param, Rng& rng);

inline constexpr double kRelativeErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

/// Self-describing text container: metadata, string lists and named matrices.
struct Container {
  std::map<std::string, std::string> meta;
  std::map<std::string, std::vector<std::string>> lists;
  std::vector<std::pair<std::string, Matrix>> matrices;

  void put_params(const ParamBlock& params);
  /// Copies matrices into an already-shaped block; throws ShapeError on mismatch.
  void get_params(ParamBlock& params) const;
  const std::string& require_meta(const std::string& key) const;
};

inline constexpr int kContainerVersion = 1;

void write_container(std::ostream& out, const Container& c);
Container read_container(std::istream& in);
void save_container(const std::string& path, const Container& c);
Container load_container(const std::string& path);

}  // namespace csgan::nn
