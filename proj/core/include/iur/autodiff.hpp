#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace iur {

// Dense fp64 tensor, rank 1 or 2, row-major. Scalars use shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);
  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor scalar(double v) { return from({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  int rows() const;  // rank-2 only
  int cols() const;

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& at(int i) { return data_[i]; }
  double at(int i) const { return data_[i]; }
  double& at(int r, int c) { return data_[static_cast<std::int64_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<std::int64_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  std::string shape_str() const;
  bool all_finite() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

struct Node;
using Value = std::shared_ptr<Node>;

// One recorded operation result. Gradients accumulate additively in `grad`
// during the backward sweep.
struct Node {
  Tensor value;
  Tensor grad;  // same shape as value once backward touches the node
  bool requires_grad = false;
  std::vector<Value> parents;
  std::function<void(Node&)> backward_fn;  // reads this->grad, adds into parents

  void ensure_grad();
  void add_grad(const Tensor& g);
};

Value constant(Tensor t);
Value make_param(Tensor t);  // leaf with requires_grad

// Records nodes in creation order while active (RAII). Creation order is a
// topological order, so the reverse sweep visits every node exactly once.
// One tape is single-threaded; independent tapes may run on other threads.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();
  void record(Value v) { nodes_.push_back(std::move(v)); }
  std::size_t size() const { return nodes_.size(); }

  // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. The loss must be
  // scalar and recorded on this tape.
  void backward(const Value& loss);

 private:
  std::vector<Value> nodes_;
  Tape* prev_ = nullptr;
};

// Named trainable leaves, ordered by name for deterministic iteration.
class ParamStore {
 public:
  Value create(const std::string& name, Tensor init);
  Value get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }
  void zero_grad();
  std::int64_t num_scalars() const;

  const std::map<std::string, Value>& all() const { return params_; }

 private:
  std::map<std::string, Value> params_;
};

// ------------------------------------------------------------------- ops

Value add(const Value& a, const Value& b);          // same shape
Value add_rowvec(const Value& a, const Value& b);   // [m,n] + [n]
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);          // elementwise
Value mul_rowvec(const Value& a, const Value& b);   // [m,n] * [n], column scaling
Value scale(const Value& a, double c);
Value add_scalar(const Value& a, double c);
Value neg(const Value& a);
Value matmul(const Value& a, const Value& b);       // [m,k] x [k,n]
Value transpose(const Value& a);
Value concat(const std::vector<Value>& parts, int axis);  // rank-2, axis 0 or 1
Value slice_rows(const Value& a, int r0, int r1);
Value slice_cols(const Value& a, int c0, int c1);
Value reshape(const Value& a, std::vector<int> shape);
Value embedding_lookup(const Value& table, const std::vector<int>& ids);
Value softmax_rows(const Value& a);  // softmax along the last axis
Value log_v(const Value& a);
Value tanh_v(const Value& a);
Value relu(const Value& a);
Value layer_norm(const Value& a, const Value& gamma, const Value& beta, double eps = 1e-5);
Value mean_all(const Value& a);  // scalar {1}
Value sum_all(const Value& a);
Value dropout(const Value& a, double p, std::uint64_t seed);
Value pick(const Value& a, const std::vector<int>& cols);  // {m} of a[i, cols[i]]
Value detach(const Value& a);  // identity value, gradient barrier

// ------------------------------------------------------------- grad check

struct GradCheckIssue {
  std::string param;
  int flat_index = 0;
  double analytic = 0.0, numeric = 0.0, rel_err = 0.0;
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  GradCheckIssue worst;
  std::int64_t coords_checked = 0;
};

// Runs `forward` once under a fresh tape for the analytic gradient, then
// re-evaluates it twice per coordinate for central differences.
// rel_err = |a - n| / max(1e-8, |a| + |n|). `forward` must be re-entrant and
// read parameters from `params` on every call.
GradCheckResult grad_check(const std::function<Value()>& forward, ParamStore& params,
                           double eps = 1e-5);

}  // namespace iur
