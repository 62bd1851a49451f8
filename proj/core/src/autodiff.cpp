#include "iur/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>

namespace iur {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<EMat>;
using ECMap = Eigen::Map<const EMat>;

// ------------------------------------------------------------------ Tensor

Tensor::Tensor(std::vector<int> shape) : shape_(std::move(shape)) {
  if (shape_.empty() || shape_.size() > 2)
    throw std::invalid_argument("tensor rank must be 1 or 2");
  std::int64_t n = 1;
  for (int d : shape_) {
    if (d < 0) throw std::invalid_argument("negative tensor dimension");
    n *= d;
  }
  data_.assign(n, 0.0);
}

Tensor Tensor::full(std::vector<int> shape, double v) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), v);
  return t;
}

Tensor Tensor::from(std::vector<int> shape, std::vector<double> data) {
  Tensor t(std::move(shape));
  if (static_cast<std::int64_t>(data.size()) != t.size())
    throw std::invalid_argument("tensor data does not fill shape " + t.shape_str());
  t.data_ = std::move(data);
  return t;
}

int Tensor::rows() const {
  if (rank() != 2) throw std::logic_error("rows() on tensor of shape " + shape_str());
  return shape_[0];
}

int Tensor::cols() const {
  if (rank() != 2) throw std::logic_error("cols() on tensor of shape " + shape_str());
  return shape_[1];
}

std::string Tensor::shape_str() const {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ']';
  return os.str();
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

// -------------------------------------------------------------------- Node

void Node::ensure_grad() {
  if (grad.size() == 0) grad = Tensor::zeros(value.shape());
}

void Node::add_grad(const Tensor& g) {
  if (!requires_grad) return;
  if (!value.same_shape(g))
    throw std::logic_error("gradient shape " + g.shape_str() + " != value shape " +
                           value.shape_str());
  ensure_grad();
  double* dst = grad.data();
  const double* src = g.data();
  for (std::int64_t i = 0; i < g.size(); ++i) dst[i] += src[i];
}

Value constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  return n;
}

Value make_param(Tensor t) {
  auto n = std::make_shared<Node>();
  n->value = std::move(t);
  n->requires_grad = true;
  return n;
}

// -------------------------------------------------------------------- Tape

static thread_local Tape* g_active_tape = nullptr;

Tape::Tape() : prev_(g_active_tape) { g_active_tape = this; }
Tape::~Tape() { g_active_tape = prev_; }
Tape* Tape::active() { return g_active_tape; }

void Tape::backward(const Value& loss) {
  if (!loss) throw std::invalid_argument("backward on a null value");
  if (loss->value.size() != 1)
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                loss->value.shape_str());
  loss->ensure_grad();
  loss->grad.at(0) += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node& n = **it;
    if (!n.backward_fn || n.grad.size() == 0) continue;  // off the loss path
    n.backward_fn(n);
  }
}

// -------------------------------------------------------------- ParamStore

Value ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw std::logic_error("duplicate parameter: " + name);
  Value v = make_param(std::move(init));
  params_[name] = v;
  return v;
}

Value ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::logic_error("unknown parameter: " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : params_) v->grad = Tensor();
}

std::int64_t ParamStore::num_scalars() const {
  std::int64_t n = 0;
  for (const auto& [name, v] : params_) n += v->value.size();
  return n;
}

// --------------------------------------------------------------------- ops

namespace {

Value make(Tensor val, std::vector<Value> parents, std::function<void(Node&)> back) {
  auto n = std::make_shared<Node>();
  n->value = std::move(val);
  bool need = false;
  for (const auto& p : parents)
    if (p && p->requires_grad) { need = true; break; }
  if (need && Tape::active()) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(back);
    Tape::active()->record(n);
  }
  return n;
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
  if (!a->value.same_shape(b->value))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                a->value.shape_str() + " vs " + b->value.shape_str());
}

}  // namespace

Value add(const Value& a, const Value& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) po[i] += pb[i];
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    a->add_grad(n.grad);
    b->add_grad(n.grad);
  });
}

Value add_rowvec(const Value& a, const Value& b) {
  if (a->value.rank() != 2 || b->value.rank() != 1 || b->value.shape()[0] != a->value.cols())
    throw std::invalid_argument("add_rowvec: shapes " + a->value.shape_str() + " vs " +
                                b->value.shape_str());
  Tensor out = a->value;
  const int m = out.rows(), c = out.cols();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) += b->value.at(j);
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    a->add_grad(n.grad);
    Tensor gb = Tensor::zeros(b->value.shape());
    const int m = n.grad.rows(), c = n.grad.cols();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < c; ++j) gb.at(j) += n.grad.at(i, j);
    b->add_grad(gb);
  });
}

Value sub(const Value& a, const Value& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) po[i] -= pb[i];
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    a->add_grad(n.grad);
    Tensor gb = n.grad;
    double* p = gb.data();
    for (std::int64_t i = 0; i < gb.size(); ++i) p[i] = -p[i];
    b->add_grad(gb);
  });
}

Value mul(const Value& a, const Value& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->value;
  const double* pb = b->value.data();
  double* po = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) po[i] *= pb[i];
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    Tensor ga = n.grad, gb = n.grad;
    const double* pa = a->value.data();
    const double* pb = b->value.data();
    for (std::int64_t i = 0; i < ga.size(); ++i) {
      ga.data()[i] *= pb[i];
      gb.data()[i] *= pa[i];
    }
    a->add_grad(ga);
    b->add_grad(gb);
  });
}

Value mul_rowvec(const Value& a, const Value& b) {
  if (a->value.rank() != 2 || b->value.rank() != 1 || b->value.shape()[0] != a->value.cols())
    throw std::invalid_argument("mul_rowvec: shapes " + a->value.shape_str() + " vs " +
                                b->value.shape_str());
  Tensor out = a->value;
  const int m = out.rows(), c = out.cols();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j) out.at(i, j) *= b->value.at(j);
  return make(std::move(out), {a, b}, [a, b](Node& n) {
    const int m = n.grad.rows(), c = n.grad.cols();
    Tensor ga = Tensor::zeros(a->value.shape());
    Tensor gb = Tensor::zeros(b->value.shape());
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < c; ++j) {
        ga.at(i, j) = n.grad.at(i, j) * b->value.at(j);
        gb.at(j) += n.grad.at(i, j) * a->value.at(i, j);
      }
    a->add_grad(ga);
    b->add_grad(gb);
  });
}

Value scale(const Value& a, double c) {
  Tensor out = a->value;
  double* p = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) p[i] *= c;
  return make(std::move(out), {a}, [a, c](Node& n) {
    Tensor g = n.grad;
    double* p = g.data();
    for (std::int64_t i = 0; i < g.size(); ++i) p[i] *= c;
    a->add_grad(g);
  });
}

Value add_scalar(const Value& a, double c) {
  Tensor out = a->value;
  double* p = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) p[i] += c;
  return make(std::move(out), {a}, [a](Node& n) { a->add_grad(n.grad); });
}

Value neg(const Value& a) { return scale(a, -1.0); }

Value matmul(const Value& a, const Value& b) {
  if (a->value.rank() != 2 || b->value.rank() != 2 || a->value.cols() != b->value.rows())
    throw std::invalid_argument("matmul: shapes " + a->value.shape_str() + " vs " +
                                b->value.shape_str());
  const int m = a->value.rows(), k = a->value.cols(), n2 = b->value.cols();
  Tensor out({m, n2});
  {
    ECMap A(a->value.data(), m, k), B(b->value.data(), k, n2);
    EMap C(out.data(), m, n2);
    C.noalias() = A * B;
  }
  return make(std::move(out), {a, b}, [a, b, m, k, n2](Node& n) {
    ECMap A(a->value.data(), m, k), B(b->value.data(), k, n2), G(n.grad.data(), m, n2);
    Tensor ga({m, k}), gb({k, n2});
    EMap GA(ga.data(), m, k), GB(gb.data(), k, n2);
    GA.noalias() = G * B.transpose();
    GB.noalias() = A.transpose() * G;
    a->add_grad(ga);
    b->add_grad(gb);
  });
}

Value transpose(const Value& a) {
  if (a->value.rank() != 2)
    throw std::invalid_argument("transpose: rank-2 tensor required, got " +
                                a->value.shape_str());
  const int m = a->value.rows(), c = a->value.cols();
  Tensor out({c, m});
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < c; ++j) out.at(j, i) = a->value.at(i, j);
  return make(std::move(out), {a}, [a, m, c](Node& n) {
    Tensor g({m, c});
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < c; ++j) g.at(i, j) = n.grad.at(j, i);
    a->add_grad(g);
  });
}

Value concat(const std::vector<Value>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  for (const auto& p : parts)
    if (p->value.rank() != 2)
      throw std::invalid_argument("concat: rank-2 tensors required");
  int rows = parts[0]->value.rows(), cols = parts[0]->value.cols();
  int total = 0;
  for (const auto& p : parts) {
    if (axis == 0) {
      if (p->value.cols() != cols)
        throw std::invalid_argument("concat: column mismatch");
      total += p->value.rows();
    } else {
      if (p->value.rows() != rows)
        throw std::invalid_argument("concat: row mismatch");
      total += p->value.cols();
    }
  }
  Tensor out(axis == 0 ? std::vector<int>{total, cols} : std::vector<int>{rows, total});
  int off = 0;
  for (const auto& p : parts) {
    const int pr = p->value.rows(), pc = p->value.cols();
    for (int i = 0; i < pr; ++i)
      for (int j = 0; j < pc; ++j) {
        if (axis == 0) out.at(off + i, j) = p->value.at(i, j);
        else out.at(i, off + j) = p->value.at(i, j);
      }
    off += axis == 0 ? pr : pc;
  }
  std::vector<Value> parents = parts;
  return make(std::move(out), parents, [parts, axis](Node& n) {
    int off = 0;
    for (const auto& p : parts) {
      const int pr = p->value.rows(), pc = p->value.cols();
      Tensor g({pr, pc});
      for (int i = 0; i < pr; ++i)
        for (int j = 0; j < pc; ++j)
          g.at(i, j) = axis == 0 ? n.grad.at(off + i, j) : n.grad.at(i, off + j);
      p->add_grad(g);
      off += axis == 0 ? pr : pc;
    }
  });
}

Value slice_rows(const Value& a, int r0, int r1) {
  if (a->value.rank() != 2 || r0 < 0 || r1 > a->value.rows() || r0 >= r1)
    throw std::invalid_argument("slice_rows: bad range on " + a->value.shape_str());
  const int c = a->value.cols();
  Tensor out({r1 - r0, c});
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < c; ++j) out.at(i - r0, j) = a->value.at(i, j);
  return make(std::move(out), {a}, [a, r0, r1, c](Node& n) {
    Tensor g = Tensor::zeros(a->value.shape());
    for (int i = r0; i < r1; ++i)
      for (int j = 0; j < c; ++j) g.at(i, j) = n.grad.at(i - r0, j);
    a->add_grad(g);
  });
}

Value slice_cols(const Value& a, int c0, int c1) {
  if (a->value.rank() != 2 || c0 < 0 || c1 > a->value.cols() || c0 >= c1)
    throw std::invalid_argument("slice_cols: bad range on " + a->value.shape_str());
  const int m = a->value.rows();
  Tensor out({m, c1 - c0});
  for (int i = 0; i < m; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = a->value.at(i, j);
  return make(std::move(out), {a}, [a, c0, c1, m](Node& n) {
    Tensor g = Tensor::zeros(a->value.shape());
    for (int i = 0; i < m; ++i)
      for (int j = c0; j < c1; ++j) g.at(i, j) = n.grad.at(i, j - c0);
    a->add_grad(g);
  });
}

Value reshape(const Value& a, std::vector<int> shape) {
  Tensor out(shape);
  if (out.size() != a->value.size())
    throw std::invalid_argument("reshape: size mismatch " + a->value.shape_str());
  std::copy(a->value.data(), a->value.data() + a->value.size(), out.data());
  return make(std::move(out), {a}, [a](Node& n) {
    Tensor g = a->value;  // shape template
    std::copy(n.grad.data(), n.grad.data() + n.grad.size(), g.data());
    a->add_grad(g);
  });
}

Value embedding_lookup(const Value& table, const std::vector<int>& ids) {
  if (table->value.rank() != 2)
    throw std::invalid_argument("embedding_lookup: table must be rank 2");
  const int v = table->value.rows(), d = table->value.cols();
  for (int id : ids)
    if (id < 0 || id >= v)
      throw std::invalid_argument("embedding_lookup: id " + std::to_string(id) +
                                  " outside table of " + std::to_string(v) + " rows");
  Tensor out({static_cast<int>(ids.size()), d});
  for (size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = table->value.at(ids[i], j);
  return make(std::move(out), {table}, [table, ids, d](Node& n) {
    Tensor g = Tensor::zeros(table->value.shape());
    for (size_t i = 0; i < ids.size(); ++i)
      for (int j = 0; j < d; ++j) g.at(ids[i], j) += n.grad.at(static_cast<int>(i), j);
    table->add_grad(g);
  });
}

Value softmax_rows(const Value& a) {
  const bool vec = a->value.rank() == 1;
  const int m = vec ? 1 : a->value.rows();
  const int c = vec ? a->value.shape()[0] : a->value.cols();
  Tensor out = a->value;
  for (int i = 0; i < m; ++i) {
    double* row = out.data() + static_cast<std::int64_t>(i) * c;
    double mx = row[0];
    for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int j = 0; j < c; ++j) { row[j] = std::exp(row[j] - mx); sum += row[j]; }
    for (int j = 0; j < c; ++j) row[j] /= sum;
  }
  return make(std::move(out), {a}, [a, m, c](Node& n) {
    Tensor g = Tensor::zeros(a->value.shape());
    for (int i = 0; i < m; ++i) {
      const double* p = n.value.data() + static_cast<std::int64_t>(i) * c;
      const double* go = n.grad.data() + static_cast<std::int64_t>(i) * c;
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += go[j] * p[j];
      double* gi = g.data() + static_cast<std::int64_t>(i) * c;
      for (int j = 0; j < c; ++j) gi[j] = p[j] * (go[j] - dot);
    }
    a->add_grad(g);
  });
}

Value log_v(const Value& a) {
  Tensor out = a->value;
  double* p = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) p[i] = std::log(p[i]);
  return make(std::move(out), {a}, [a](Node& n) {
    Tensor g = n.grad;
    const double* x = a->value.data();
    double* pg = g.data();
    for (std::int64_t i = 0; i < g.size(); ++i) pg[i] /= x[i];
    a->add_grad(g);
  });
}

Value tanh_v(const Value& a) {
  Tensor out = a->value;
  double* p = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) p[i] = std::tanh(p[i]);
  return make(std::move(out), {a}, [a](Node& n) {
    Tensor g = n.grad;
    const double* t = n.value.data();
    double* pg = g.data();
    for (std::int64_t i = 0; i < g.size(); ++i) pg[i] *= 1.0 - t[i] * t[i];
    a->add_grad(g);
  });
}

Value relu(const Value& a) {
  Tensor out = a->value;
  double* p = out.data();
  for (std::int64_t i = 0; i < out.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  return make(std::move(out), {a}, [a](Node& n) {
    Tensor g = n.grad;
    const double* x = a->value.data();
    double* pg = g.data();
    for (std::int64_t i = 0; i < g.size(); ++i)
      if (x[i] <= 0.0) pg[i] = 0.0;
    a->add_grad(g);
  });
}

Value layer_norm(const Value& a, const Value& gamma, const Value& beta, double eps) {
  if (a->value.rank() != 2 || gamma->value.rank() != 1 || beta->value.rank() != 1 ||
      gamma->value.shape()[0] != a->value.cols() ||
      beta->value.shape()[0] != a->value.cols())
    throw std::invalid_argument("layer_norm: shapes " + a->value.shape_str() + ", " +
                                gamma->value.shape_str() + ", " + beta->value.shape_str());
  const int m = a->value.rows(), c = a->value.cols();
  Tensor out({m, c});
  Tensor xhat({m, c});
  std::vector<double> inv_std(m);
  for (int i = 0; i < m; ++i) {
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += a->value.at(i, j);
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double d = a->value.at(i, j) - mu;
      var += d * d;
    }
    var /= c;
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j) {
      xhat.at(i, j) = (a->value.at(i, j) - mu) * inv_std[i];
      out.at(i, j) = gamma->value.at(j) * xhat.at(i, j) + beta->value.at(j);
    }
  }
  return make(std::move(out), {a, gamma, beta},
              [a, gamma, beta, xhat, inv_std, m, c](Node& n) {
    Tensor ga = Tensor::zeros(a->value.shape());
    Tensor gg = Tensor::zeros(gamma->value.shape());
    Tensor gb = Tensor::zeros(beta->value.shape());
    for (int i = 0; i < m; ++i) {
      double mean_dxhat = 0.0, mean_dxhat_x = 0.0;
      for (int j = 0; j < c; ++j) {
        double go = n.grad.at(i, j);
        gg.at(j) += go * xhat.at(i, j);
        gb.at(j) += go;
        double dxhat = go * gamma->value.at(j);
        mean_dxhat += dxhat;
        mean_dxhat_x += dxhat * xhat.at(i, j);
      }
      mean_dxhat /= c;
      mean_dxhat_x /= c;
      for (int j = 0; j < c; ++j) {
        double dxhat = n.grad.at(i, j) * gamma->value.at(j);
        ga.at(i, j) = inv_std[i] * (dxhat - mean_dxhat - xhat.at(i, j) * mean_dxhat_x);
      }
    }
    a->add_grad(ga);
    gamma->add_grad(gg);
    beta->add_grad(gb);
  });
}

Value mean_all(const Value& a) {
  const std::int64_t n = a->value.size();
  if (n == 0) throw std::invalid_argument("mean_all: empty tensor");
  double s = 0.0;
  const double* p = a->value.data();
  for (std::int64_t i = 0; i < n; ++i) s += p[i];
  return make(Tensor::scalar(s / n), {a}, [a, n](Node& nd) {
    Tensor g = Tensor::full(a->value.shape(), nd.grad.at(0) / n);
    a->add_grad(g);
  });
}

Value sum_all(const Value& a) {
  double s = 0.0;
  const double* p = a->value.data();
  for (std::int64_t i = 0; i < a->value.size(); ++i) s += p[i];
  return make(Tensor::scalar(s), {a}, [a](Node& nd) {
    a->add_grad(Tensor::full(a->value.shape(), nd.grad.at(0)));
  });
}

Value dropout(const Value& a, double p, std::uint64_t seed) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout: p must lie in [0,1)");
  if (p == 0.0) return a;
  std::mt19937_64 gen(seed);
  const double keep = 1.0 - p;
  Tensor mask = Tensor::zeros(a->value.shape());
  for (std::int64_t i = 0; i < mask.size(); ++i) {
    double u = (gen() >> 11) * 0x1.0p-53;
    mask.data()[i] = u < keep ? 1.0 / keep : 0.0;
  }
  Tensor out = a->value;
  for (std::int64_t i = 0; i < out.size(); ++i) out.data()[i] *= mask.data()[i];
  return make(std::move(out), {a}, [a, mask](Node& n) {
    Tensor g = n.grad;
    for (std::int64_t i = 0; i < g.size(); ++i) g.data()[i] *= mask.data()[i];
    a->add_grad(g);
  });
}

Value pick(const Value& a, const std::vector<int>& cols) {
  if (a->value.rank() != 2 || static_cast<int>(cols.size()) != a->value.rows())
    throw std::invalid_argument("pick: need one column per row of " + a->value.shape_str());
  const int m = a->value.rows();
  for (int i = 0; i < m; ++i)
    if (cols[i] < 0 || cols[i] >= a->value.cols())
      throw std::invalid_argument("pick: column index out of range");
  Tensor out({m});
  for (int i = 0; i < m; ++i) out.at(i) = a->value.at(i, cols[i]);
  return make(std::move(out), {a}, [a, cols, m](Node& n) {
    Tensor g = Tensor::zeros(a->value.shape());
    for (int i = 0; i < m; ++i) g.at(i, cols[i]) = n.grad.at(i);
    a->add_grad(g);
  });
}

Value detach(const Value& a) { return constant(a->value); }

// -------------------------------------------------------------- grad check

GradCheckResult grad_check(const std::function<Value()>& forward, ParamStore& params,
                           double eps) {
  params.zero_grad();
  {
    Tape tape;
    Value loss = forward();
    tape.backward(loss);
  }
  std::map<std::string, Tensor> analytic;
  for (const auto& [name, v] : params.all()) {
    Tensor g = v->grad.size() ? v->grad : Tensor::zeros(v->value.shape());
    analytic.emplace(name, std::move(g));
  }

  auto eval = [&]() {
    Value out = forward();  // no tape active here: plain forward
    if (out->value.size() != 1)
      throw std::logic_error("grad_check: forward must produce a scalar");
    return out->value.at(0);
  };

  GradCheckResult res;
  for (const auto& [name, v] : params.all()) {
    Tensor& t = v->value;
    const Tensor& ga = analytic.at(name);
    for (std::int64_t i = 0; i < t.size(); ++i) {
      const double orig = t.data()[i];
      t.data()[i] = orig + eps;
      const double f1 = eval();
      t.data()[i] = orig - eps;
      const double f2 = eval();
      t.data()[i] = orig;
      const double numeric = (f1 - f2) / (2.0 * eps);
      const double a = ga.data()[i];
      const double rel = std::abs(a - numeric) /
                         std::max(1e-8, std::abs(a) + std::abs(numeric));
      ++res.coords_checked;
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = {name, static_cast<int>(i), a, numeric, rel};
      }
    }
  }
  return res;
}

}  // namespace iur
