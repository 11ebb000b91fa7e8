#pragma once

// Minimal dense tensor engine with a reverse-mode tape.
//
// Tensors are shared handles onto a row-major buffer of doubles. Operations
// are free functions that take the Tape they record onto; an operation is
// recorded only if the tape is recording and at least one input requires a
// gradient. Tape::backward replays the recorded rules in exact reverse order,
// which fixes the gradient accumulation order.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace treegcn {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data,
                       bool requires_grad = false);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;
  // Leading extent; 1 for rank-0 tensors.
  std::size_t rows() const;
  // size() / rows().
  std::size_t cols() const;

  std::span<const double> data() const;
  // Direct access for initialisation and optimiser updates. Never call this on
  // a tensor whose value has already been consumed by a live tape.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t row, std::size_t col) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const;
  // Zero-initialised on first access. Used by backward rules.
  std::span<double> grad_mut() const;
  void zero_grad();

  // Fresh leaf holding a copy of the values.
  Tensor detach() const;
  bool same_as(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

class Tape {
 public:
  // Receives the gradient of the loss w.r.t. the recorded output.
  using BackwardRule = std::function<void(std::span<const double> output_grad)>;

  explicit Tape(bool recording = true) : recording_(recording) {}

  // Non-recording tape for inference.
  static Tape inference() { return Tape(false); }

  bool recording() const noexcept { return recording_; }
  std::size_t size() const noexcept { return entries_.size(); }

  // Marks `output` as produced from `inputs`. When any input requires a
  // gradient (and the tape records) the output is flagged requires_grad and
  // `rule` is appended. Returns `output`.
  Tensor record(std::vector<Tensor> inputs, Tensor output, BackwardRule rule);

  // Accumulates d(loss)/d(t) into every requires_grad tensor reachable from
  // `loss`. A tape can be replayed once; call reset() before reuse.
  void backward(const Tensor& loss);

  // Drops all recorded entries (and the references they hold).
  void reset();

 private:
  struct Entry {
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardRule rule;
  };
  std::vector<Entry> entries_;
  bool recording_;
  bool consumed_ = false;
};

// ---- Operations --------------------------------------------------------------
// Matrices are rank-2 tensors. Row vectors may be given as rank-1 tensors
// where noted.

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
// x[N x F] + bias[F] added to every row. The only broadcast supported.
Tensor add_row_bias(Tape& tape, const Tensor& x, const Tensor& bias);
Tensor scale(Tape& tape, const Tensor& x, double factor);
// Elementwise product of equal-shape tensors.
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor leaky_relu(Tape& tape, const Tensor& x, double slope);
// Max over each block of `group` consecutive rows. Ties go to the lowest row.
Tensor group_max(Tape& tape, const Tensor& x, std::size_t group);
// Stacks matrices with equal column counts.
Tensor concat_rows(Tape& tape, const std::vector<Tensor>& parts);
// Joins matrices with equal row counts side by side.
Tensor concat_cols(Tape& tape, const std::vector<Tensor>& parts);
// Each row repeated `times` times consecutively: [N x F] -> [N*times x F].
Tensor repeat_rows(Tape& tape, const Tensor& x, std::size_t times);
Tensor reshape(Tape& tape, const Tensor& x, Shape shape);
// Sum of all entries, shape {1}.
Tensor reduce_sum(Tape& tape, const Tensor& x);
// out[i][j] = |a_i - b_j|^2 for a[N x 3], b[M x 3].
Tensor pairwise_sqdist(Tape& tape, const Tensor& a, const Tensor& b);

// ---- Gradient checking -------------------------------------------------------

using ScalarFn = std::function<Tensor(Tape&)>;

// Compares tape gradients of `f` w.r.t. each tensor in `wrt` against central
// differences with the given step, perturbing the tensors in place (values
// are restored). Returns max |a - n| / max(|a|, |n|, 1e-8).
double finite_diff_check(const ScalarFn& f, std::span<Tensor> wrt, double step);

// Single-input form: f is evaluated on a leaf copy of `x`.
double finite_diff_check(const std::function<Tensor(Tape&, const Tensor&)>& f, const Tensor& x,
                         double step);

}  // namespace treegcn
