#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "survflow/errors.hpp"
#include "survflow/rng.hpp"

namespace survflow::net {

enum class Head { Identity, Softmax };

/// Fully connected network with SELU hidden activations. Layout for
/// layer_sizes = [n0, n1, ..., nL]: L affine layers, SELU after every layer
/// except the last, then the head. A single-element list [n] is treated as the
/// affine map [n, n].
struct DenseNet {
  std::vector<Eigen::MatrixXd> weights;  // layer l: (n_{l+1} x n_l)
  std::vector<Eigen::VectorXd> biases;
  Head head = Head::Identity;

  int input_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.front().cols());
  }
  int output_dim() const {
    return weights.empty() ? 0 : static_cast<int>(weights.back().rows());
  }
  int layer_count() const { return static_cast<int>(weights.size()); }
  Eigen::Index param_count() const;
};

/// LeCun-normal initialization: W ~ N(0, 1/fan_in), biases zero.
DenseNet init_dense(const std::vector<int>& layer_sizes, Head head, rng::Engine& rng);

/// Per-layer intermediates recorded by a forward pass, consumed by vjp.
struct ForwardTrace {
  std::vector<Eigen::MatrixXd> activations;      // H_l, l = 0..L (H_0 = input)
  std::vector<Eigen::MatrixXd> pre;              // U_l = W_l H_l + b_l
  std::vector<Eigen::MatrixXd> tangent_act;      // tangent pass only
  std::vector<Eigen::MatrixXd> tangent_pre;
  Eigen::MatrixXd head_out;                      // softmax output
  bool has_tangent = false;
};

/// Batched forward pass; X has one input column per batch element.
void forward(const DenseNet& net, const Eigen::MatrixXd& X, Eigen::MatrixXd& Y,
             ForwardTrace* trace = nullptr);
Eigen::MatrixXd forward(const DenseNet& net, const Eigen::MatrixXd& X);

/// Single-input convenience wrapper.
Eigen::VectorXd forward_vec(const DenseNet& net, const Eigen::VectorXd& x);

/// Forward pass carrying an input tangent Xdot (identity head only): Ydot is
/// the Jacobian-vector product J(X) Xdot per column.
void forward_tangent(const DenseNet& net, const Eigen::MatrixXd& X,
                     const Eigen::MatrixXd& Xdot, Eigen::MatrixXd& Y,
                     Eigen::MatrixXd& Ydot, ForwardTrace* trace = nullptr);

struct NetGrad {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;

  explicit NetGrad(const DenseNet& net);
  void set_zero();
  void axpy(double a, const NetGrad& other);  // this += a * other
};

/// Reverse pass over forward(): accumulates parameter gradients of
/// sum_b Ybar_b . Y_b into grad and writes the input cotangent (if requested).
void vjp(const DenseNet& net, const ForwardTrace& trace, const Eigen::MatrixXd& Ybar,
         NetGrad& grad, Eigen::MatrixXd* Xbar);

/// Reverse pass over forward_tangent(): gradients of
/// sum_b [Ybar_b . Y_b + Ydotbar_b . Ydot_b] treating Xdot as constant.
/// Identity head only.
void vjp_tangent(const DenseNet& net, const ForwardTrace& trace,
                 const Eigen::MatrixXd& Ybar, const Eigen::MatrixXd& Ydotbar,
                 NetGrad& grad, Eigen::MatrixXd* Xbar);

/// Convenience single-input vjp: gradients of cotangent . forward(x).
std::pair<NetGrad, Eigen::VectorXd> vjp(const DenseNet& net, const Eigen::VectorXd& x,
                                        const Eigen::VectorXd& cotangent);

/// Flat parameter storage with named segments.
struct ParamLayout {
  struct Segment {
    std::string name;
    Eigen::Index offset = 0;
    Eigen::Index size = 0;
  };
  std::vector<Segment> segments;

  Eigen::Index total() const {
    return segments.empty() ? 0 : segments.back().offset + segments.back().size;
  }
  const Segment& find(const std::string& name) const;
};

struct ParamVector {
  ParamLayout layout;
  Eigen::VectorXd values;

  Eigen::VectorBlock<Eigen::VectorXd> segment(const std::string& name) {
    const auto& s = layout.find(name);
    return values.segment(s.offset, s.size);
  }
  Eigen::VectorBlock<const Eigen::VectorXd> segment(const std::string& name) const {
    const auto& s = layout.find(name);
    return values.segment(s.offset, s.size);
  }
};

/// Net parameters as a flat vector (per layer: column-major W, then b).
Eigen::Index pack_net(const DenseNet& net, Eigen::Ref<Eigen::VectorXd> out);
Eigen::Index unpack_net(DenseNet& net, const Eigen::Ref<const Eigen::VectorXd>& in);
Eigen::Index pack_grad(const NetGrad& grad, Eigen::Ref<Eigen::VectorXd> out);

}  // namespace survflow::net
