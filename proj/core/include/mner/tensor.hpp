#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace mner {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class GradientTape;

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient reaches this node
  bool requires_grad = false;
  const GradientTape* tape = nullptr;  // set when produced by a recorded op
};

}  // namespace detail

// Dense row-major tensor handle. Copies share storage; use clone() or
// detach() for an independent copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor from(Shape shape, std::vector<double> values);
  static Tensor scalar(double value);
  // A leaf that accumulates gradient during backward().
  static Tensor parameter(Shape shape, std::vector<double> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct storage access for initializers and optimizers. Never call on a
  // tensor whose value has already been consumed by a recorded op.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  // Gradient buffer, same shape as data once any gradient has flowed.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Copy of the values that never receives gradient.
  Tensor detach() const;
  // Identity of underlying storage.
  bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::initializer_list<Tensor>,
                            std::function<void(std::span<const double>)>);
  friend Tensor make_result(Shape, std::vector<double>, const std::vector<Tensor>&,
                            std::function<void(std::span<const double>)>);
};

// Records operations for reverse-mode differentiation. Ops executed while a
// tape is active on the current thread (see TapeScope) and touching at least
// one gradient-requiring input are appended in execution order, which is a
// topological order of the graph.
class GradientTape {
 public:
  GradientTape() = default;
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  void record(std::shared_ptr<detail::TensorNode> output,
              std::function<void(std::span<const double>)> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and runs recorded backward functions in
  // reverse order. A second call without a new recorded op throws.
  void backward(const Tensor& loss);

  // Drops all recorded ops (and the references they hold).
  void reset();

  std::size_t size() const { return entries_.size(); }
  bool consumed() const { return consumed_; }

 private:
  struct Entry {
    std::shared_ptr<detail::TensorNode> output;
    std::function<void(std::span<const double>)> backward_fn;
  };
  std::vector<Entry> entries_;
  bool consumed_ = false;
};

// Makes a tape the active recorder for the current thread for its lifetime.
class TapeScope {
 public:
  explicit TapeScope(GradientTape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  GradientTape* previous_;
};

GradientTape* active_tape();

// Builds an op result. When a tape is active and any input requires
// gradient, the result joins the tape and backward_fn is invoked with the
// result's gradient during backward().
Tensor make_result(Shape shape, std::vector<double> values, std::initializer_list<Tensor> inputs,
                   std::function<void(std::span<const double>)> backward_fn);
Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   std::function<void(std::span<const double>)> backward_fn);

// Gradient accumulator for an op input; empty span when the input does not
// take gradient.
std::span<double> grad_sink(const Tensor& input);

}  // namespace mner
