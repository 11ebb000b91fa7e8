#include "treegcn/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "treegcn/error.hpp"

namespace treegcn {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

ConstMap as_matrix(std::span<const double> data, std::size_t rows, std::size_t cols) {
  return ConstMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MutMap as_matrix(std::span<double> data, std::size_t rows, std::size_t cols) {
  return MutMap(data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  raise(ErrorKind::kShape, std::string(op) + ": incompatible shapes " + shape_string(a.shape()) +
                               " and " + shape_string(b.shape()));
}

void require_matrix(const char* op, const Tensor& x) {
  if (x.rank() != 2) {
    raise(ErrorKind::kShape,
          std::string(op) + ": expected a matrix, got shape " + shape_string(x.shape()));
  }
}

void accumulate(const Tensor& target, std::span<const double> delta) {
  auto g = target.grad_mut();
  for (std::size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

// ---- Tensor -------------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<Impl>()) {
  for (std::size_t extent : shape) {
    if (extent == 0) raise(ErrorKind::kShape, "tensor extents must be positive: " + shape_string(shape));
  }
  if (shape_size(shape) != data.size()) {
    raise(ErrorKind::kShape, "tensor of shape " + shape_string(shape) + " cannot hold " +
                                 std::to_string(data.size()) + " values");
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                      bool requires_grad) {
  return Tensor({rows, cols}, std::move(data), requires_grad);
}

const Shape& Tensor::shape() const {
  if (!impl_) raise(ErrorKind::kContract, "use of an undefined tensor");
  return impl_->shape;
}

std::size_t Tensor::size() const { return shape_size(shape()); }

std::size_t Tensor::rows() const { return shape().empty() ? 1 : shape().front(); }

std::size_t Tensor::cols() const { return size() / rows(); }

std::span<const double> Tensor::data() const {
  shape();
  return impl_->data;
}

std::span<double> Tensor::mutable_data() {
  shape();
  return impl_->data;
}

double Tensor::item() const {
  if (size() != 1) raise(ErrorKind::kShape, "item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  const std::size_t c = cols();
  if (row >= rows() || col >= c) raise(ErrorKind::kShape, "tensor index out of range");
  return impl_->data[row * c + col];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

void Tensor::set_requires_grad(bool value) {
  shape();
  impl_->requires_grad = value;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<const double> Tensor::grad() const {
  shape();
  return impl_->grad;
}

std::span<double> Tensor::grad_mut() const {
  shape();
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (impl_) impl_->grad.clear();
}

Tensor Tensor::detach() const { return Tensor(shape(), impl_->data, false); }

// ---- Tape ---------------------------------------------------------------------

Tensor Tape::record(std::vector<Tensor> inputs, Tensor output, BackwardRule rule) {
  if (!recording_) return output;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return output;
  output.set_requires_grad(true);
  entries_.push_back(Entry{std::move(inputs), output, std::move(rule)});
  return output;
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) raise(ErrorKind::kContract, "backward already ran on this tape; reset() first");
  if (!loss.defined() || loss.size() != 1) {
    raise(ErrorKind::kContract, "backward needs a scalar loss, got shape " +
                                    (loss.defined() ? shape_string(loss.shape()) : "undefined"));
  }
  const bool on_tape = std::any_of(entries_.begin(), entries_.end(),
                                   [&](const Entry& e) { return e.output.same_as(loss); });
  if (!on_tape && !loss.requires_grad()) {
    raise(ErrorKind::kContract, "backward: loss was not recorded on this tape");
  }
  consumed_ = true;
  Tensor seed = loss;
  seed.grad_mut()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->rule(it->output.grad());
  }
}

void Tape::reset() {
  entries_.clear();
  consumed_ = false;
}

// ---- Operations ---------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) shape_mismatch("matmul", a, b);
  Tensor out = Tensor::zeros({m, n});
  as_matrix(out.mutable_data(), m, n).noalias() = as_matrix(a.data(), m, k) * as_matrix(b.data(), k, n);
  return tape.record({a, b}, out, [a, b, m, k, n](std::span<const double> g) mutable {
    const auto gm = as_matrix(g, m, n);
    if (a.requires_grad()) {
      as_matrix(a.grad_mut(), m, k).noalias() += gm * as_matrix(b.data(), k, n).transpose();
    }
    if (b.requires_grad()) {
      as_matrix(b.grad_mut(), k, n).noalias() += as_matrix(a.data(), m, k).transpose() * gm;
    }
  });
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("add", a, b);
  std::vector<double> values(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = x[i] + y[i];
  Tensor out(a.shape(), std::move(values));
  return tape.record({a, b}, out, [a, b](std::span<const double> g) mutable {
    if (a.requires_grad()) accumulate(a, g);
    if (b.requires_grad()) accumulate(b, g);
  });
}

Tensor add_row_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  require_matrix("add_row_bias", x);
  const std::size_t n = x.rows(), f = x.cols();
  if (bias.size() != f || bias.rows() * bias.cols() != f || (bias.rank() == 2 && bias.rows() != 1)) {
    shape_mismatch("add_row_bias", x, bias);
  }
  std::vector<double> values(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < f; ++c) values[r * f + c] += b[c];
  }
  Tensor out(x.shape(), std::move(values));
  return tape.record({x, bias}, out, [x, bias, n, f](std::span<const double> g) mutable {
    if (x.requires_grad()) accumulate(x, g);
    if (bias.requires_grad()) {
      auto gb = bias.grad_mut();
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < f; ++c) gb[c] += g[r * f + c];
      }
    }
  });
}

Tensor scale(Tape& tape, const Tensor& x, double factor) {
  std::vector<double> values(x.data().begin(), x.data().end());
  for (double& v : values) v *= factor;
  Tensor out(x.shape(), std::move(values));
  return tape.record({x}, out, [x, factor](std::span<const double> g) mutable {
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += factor * g[i];
  });
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_mismatch("mul", a, b);
  std::vector<double> values(a.size());
  const auto x = a.data(), y = b.data();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = x[i] * y[i];
  Tensor out(a.shape(), std::move(values));
  return tape.record({a, b}, out, [a, b](std::span<const double> g) mutable {
    if (a.requires_grad()) {
      auto ga = a.grad_mut();
      const auto y = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_mut();
      const auto x = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * x[i];
    }
  });
}

Tensor leaky_relu(Tape& tape, const Tensor& x, double slope) {
  if (!(slope > 0.0 && slope < 1.0)) {
    raise(ErrorKind::kContract, "leaky_relu slope must lie in (0, 1), got " + std::to_string(slope));
  }
  std::vector<double> values(x.data().begin(), x.data().end());
  for (double& v : values) v = std::max(v, slope * v);
  Tensor out(x.shape(), std::move(values));
  return tape.record({x}, out, [x, slope](std::span<const double> g) mutable {
    auto gx = x.grad_mut();
    const auto v = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += v[i] > 0.0 ? g[i] : slope * g[i];
  });
}

Tensor group_max(Tape& tape, const Tensor& x, std::size_t group) {
  require_matrix("group_max", x);
  const std::size_t n = x.rows(), f = x.cols();
  if (group == 0 || n % group != 0) {
    raise(ErrorKind::kShape, "group_max: " + std::to_string(n) + " rows not divisible into groups of " +
                                 std::to_string(group));
  }
  const std::size_t blocks = n / group;
  const auto v = x.data();
  std::vector<double> values(blocks * f);
  std::vector<std::size_t> argmax(blocks * f);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t c = 0; c < f; ++c) {
      std::size_t best = b * group;
      for (std::size_t r = b * group + 1; r < (b + 1) * group; ++r) {
        if (v[r * f + c] > v[best * f + c]) best = r;
      }
      values[b * f + c] = v[best * f + c];
      argmax[b * f + c] = best;
    }
  }
  Tensor out({blocks, f}, std::move(values));
  return tape.record({x}, out, [x, f, argmax = std::move(argmax)](std::span<const double> g) mutable {
    auto gx = x.grad_mut();
    for (std::size_t i = 0; i < g.size(); ++i) gx[argmax[i] * f + i % f] += g[i];
  });
}

Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) raise(ErrorKind::kShape, "concat_rows: no inputs");
  const std::size_t f = parts.front().cols();
  std::size_t n = 0;
  std::vector<double> values;
  for (const Tensor& p : parts) {
    require_matrix("concat_rows", p);
    if (p.cols() != f) shape_mismatch("concat_rows", parts.front(), p);
    n += p.rows();
    values.insert(values.end(), p.data().begin(), p.data().end());
  }
  Tensor out({n, f}, std::move(values));
  return tape.record(parts, out, [parts](std::span<const double> g) mutable {
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
      if (p.requires_grad()) accumulate(p, g.subspan(offset, p.size()));
      offset += p.size();
    }
  });
}

Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts) {
  if (parts.empty()) raise(ErrorKind::kShape, "concat_cols: no inputs");
  const std::size_t n = parts.front().rows();
  std::size_t width = 0;
  for (const Tensor& p : parts) {
    require_matrix("concat_cols", p);
    if (p.rows() != n) shape_mismatch("concat_cols", parts.front(), p);
    width += p.cols();
  }
  std::vector<double> values(n * width);
  std::size_t col0 = 0;
  for (const Tensor& p : parts) {
    const std::size_t w = p.cols();
    const auto v = p.data();
    for (std::size_t r = 0; r < n; ++r) {
      std::copy_n(v.begin() + r * w, w, values.begin() + r * width + col0);
    }
    col0 += w;
  }
  Tensor out({n, width}, std::move(values));
  return tape.record(parts, out, [parts, n, width](std::span<const double> g) mutable {
    std::size_t c0 = 0;
    for (const Tensor& p : parts) {
      const std::size_t w = p.cols();
      if (p.requires_grad()) {
        auto gp = p.grad_mut();
        for (std::size_t r = 0; r < n; ++r) {
          for (std::size_t c = 0; c < w; ++c) gp[r * w + c] += g[r * width + c0 + c];
        }
      }
      c0 += w;
    }
  });
}

Tensor repeat_rows(Tape& tape, const Tensor& x, std::size_t times) {
  require_matrix("repeat_rows", x);
  if (times == 0) raise(ErrorKind::kShape, "repeat_rows: repeat count must be positive");
  if (times == 1) return x;
  const std::size_t n = x.rows(), f = x.cols();
  std::vector<double> values(n * times * f);
  const auto v = x.data();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(v.begin() + r * f, f, values.begin() + (r * times + t) * f);
    }
  }
  Tensor out({n * times, f}, std::move(values));
  return tape.record({x}, out, [x, n, f, times](std::span<const double> g) mutable {
    auto gx = x.grad_mut();
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t t = 0; t < times; ++t) {
        for (std::size_t c = 0; c < f; ++c) gx[r * f + c] += g[(r * times + t) * f + c];
      }
    }
  });
}

Tensor reshape(Tape& tape, const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    raise(ErrorKind::kShape, "reshape: cannot view " + shape_string(x.shape()) + " as " + shape_string(shape));
  }
  Tensor out(std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  return tape.record({x}, out, [x](std::span<const double> g) mutable { accumulate(x, g); });
}

Tensor reduce_sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::scalar(total);
  return tape.record({x}, out, [x](std::span<const double> g) mutable {
    auto gx = x.grad_mut();
    for (double& v : gx) v += g[0];
  });
}

Tensor pairwise_sqdist(Tape& tape, const Tensor& a, const Tensor& b) {
  require_matrix("pairwise_sqdist", a);
  require_matrix("pairwise_sqdist", b);
  if (a.cols() != 3 || b.cols() != 3) shape_mismatch("pairwise_sqdist", a, b);
  const std::size_t n = a.rows(), m = b.rows();
  const auto x = a.data(), y = b.data();
  std::vector<double> values(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double dx = x[3 * i] - y[3 * j];
      const double dy = x[3 * i + 1] - y[3 * j + 1];
      const double dz = x[3 * i + 2] - y[3 * j + 2];
      values[i * m + j] = dx * dx + dy * dy + dz * dz;
    }
  }
  Tensor out({n, m}, std::move(values));
  return tape.record({a, b}, out, [a, b, n, m](std::span<const double> g) mutable {
    const auto x = a.data(), y = b.data();
    std::span<double> ga, gb;
    if (a.requires_grad()) ga = a.grad_mut();
    if (b.requires_grad()) gb = b.grad_mut();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        const double w = 2.0 * g[i * m + j];
        for (std::size_t d = 0; d < 3; ++d) {
          const double diff = w * (x[3 * i + d] - y[3 * j + d]);
          if (!ga.empty()) ga[3 * i + d] += diff;
          if (!gb.empty()) gb[3 * j + d] -= diff;
        }
      }
    }
  });
}

// ---- Gradient checking ----------------------------------------------------------

double finite_diff_check(const ScalarFn& f, std::span<Tensor> wrt, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    raise(ErrorKind::kContract, "finite_diff_check: step must be positive and finite");
  }
  std::vector<bool> previous(wrt.size());
  for (std::size_t t = 0; t < wrt.size(); ++t) {
    previous[t] = wrt[t].requires_grad();
    wrt[t].zero_grad();
    wrt[t].set_requires_grad(true);
  }

  auto evaluate = [&f]() {
    Tape tape = Tape::inference();
    const double v = f(tape).item();
    if (!std::isfinite(v)) raise(ErrorKind::kNumeric, "finite_diff_check: non-finite function value");
    return v;
  };

  {
    Tape tape;
    Tensor loss = f(tape);
    if (!std::isfinite(loss.item())) {
      raise(ErrorKind::kNumeric, "finite_diff_check: non-finite function value");
    }
    tape.backward(loss);
  }

  double worst = 0.0;
  for (Tensor& t : wrt) {
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    auto values = t.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = evaluate();
      values[i] = original - step;
      const double down = evaluate();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  for (std::size_t t = 0; t < wrt.size(); ++t) {
    wrt[t].zero_grad();
    wrt[t].set_requires_grad(previous[t]);
  }
  return worst;
}

double finite_diff_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                         double step) {
  std::vector<Tensor> leaf{x.detach()};
  return finite_diff_check([&](Tape& tape) { return f(tape, leaf[0]); }, leaf, step);
}

}  // namespace treegcn
