#include "survflow/netcore.hpp"

#include <cmath>

#include "survflow/special.hpp"

namespace survflow::net {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd selu_map(const MatrixXd& u) {
  return u.unaryExpr([](double v) { return special::selu(v); });
}
MatrixXd selu_d1_map(const MatrixXd& u) {
  return u.unaryExpr([](double v) { return special::selu_d1(v); });
}
MatrixXd selu_d2_map(const MatrixXd& u) {
  return u.unaryExpr([](double v) { return special::selu_d2(v); });
}

MatrixXd softmax_columns(const MatrixXd& u) {
  MatrixXd y(u.rows(), u.cols());
  for (Eigen::Index c = 0; c < u.cols(); ++c) {
    const double m = u.col(c).maxCoeff();
    y.col(c) = (u.col(c).array() - m).exp();
    y.col(c) /= y.col(c).sum();
  }
  return y;
}

void check_input(const DenseNet& net, const MatrixXd& X) {
  if (X.rows() != net.input_dim()) {
    throw DimensionError("DenseNet: input has " + std::to_string(X.rows()) +
                         " rows, expected " + std::to_string(net.input_dim()));
  }
}

}  // namespace

Eigen::Index DenseNet::param_count() const {
  Eigen::Index n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += weights[l].size() + biases[l].size();
  }
  return n;
}

DenseNet init_dense(const std::vector<int>& layer_sizes, Head head, rng::Engine& rng) {
  std::vector<int> dims = layer_sizes;
  if (dims.empty()) throw DimensionError("init_dense: empty layer_sizes");
  if (dims.size() == 1) dims.push_back(dims.front());
  for (int d : dims) {
    if (d < 0) throw DimensionError("init_dense: negative layer size");
  }

  DenseNet net;
  net.head = head;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const int fan_in = dims[l];
    const int fan_out = dims[l + 1];
    MatrixXd w(fan_out, fan_in);
    const double sd = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = sd * rng.normal();
      }
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(VectorXd::Zero(fan_out));
  }
  return net;
}

void forward(const DenseNet& net, const MatrixXd& X, MatrixXd& Y, ForwardTrace* trace) {
  check_input(net, X);
  const int L = net.layer_count();
  if (trace) {
    trace->activations.assign(static_cast<std::size_t>(L) + 1, MatrixXd());
    trace->pre.assign(static_cast<std::size_t>(L), MatrixXd());
    trace->tangent_act.clear();
    trace->tangent_pre.clear();
    trace->has_tangent = false;
    trace->activations[0] = X;
  }
  MatrixXd h = X;
  for (int l = 0; l < L; ++l) {
    MatrixXd u = (net.weights[l] * h).colwise() + net.biases[l];
    if (trace) trace->pre[static_cast<std::size_t>(l)] = u;
    if (l + 1 < L) {
      h = selu_map(u);
      if (trace) trace->activations[static_cast<std::size_t>(l) + 1] = h;
    } else {
      h = std::move(u);
    }
  }
  if (net.head == Head::Softmax) {
    h = softmax_columns(h);
    if (trace) trace->head_out = h;
  }
  if (trace && L > 0) trace->activations[static_cast<std::size_t>(L)] = h;
  Y = std::move(h);
}

MatrixXd forward(const DenseNet& net, const MatrixXd& X) {
  MatrixXd y;
  forward(net, X, y);
  return y;
}

VectorXd forward_vec(const DenseNet& net, const VectorXd& x) {
  MatrixXd y;
  forward(net, MatrixXd(x), y);
  return VectorXd(y.col(0));
}

void forward_tangent(const DenseNet& net, const MatrixXd& X, const MatrixXd& Xdot,
                     MatrixXd& Y, MatrixXd& Ydot, ForwardTrace* trace) {
  check_input(net, X);
  if (net.head != Head::Identity) {
    throw DimensionError("forward_tangent: identity head required");
  }
  if (Xdot.rows() != X.rows() || Xdot.cols() != X.cols()) {
    throw DimensionError("forward_tangent: tangent shape mismatch");
  }
  const int L = net.layer_count();
  if (trace) {
    trace->activations.assign(static_cast<std::size_t>(L) + 1, MatrixXd());
    trace->pre.assign(static_cast<std::size_t>(L), MatrixXd());
    trace->tangent_act.assign(static_cast<std::size_t>(L) + 1, MatrixXd());
    trace->tangent_pre.assign(static_cast<std::size_t>(L), MatrixXd());
    trace->has_tangent = true;
    trace->activations[0] = X;
    trace->tangent_act[0] = Xdot;
  }
  MatrixXd h = X;
  MatrixXd hd = Xdot;
  for (int l = 0; l < L; ++l) {
    MatrixXd u = (net.weights[l] * h).colwise() + net.biases[l];
    MatrixXd ud = net.weights[l] * hd;
    if (trace) {
      trace->pre[static_cast<std::size_t>(l)] = u;
      trace->tangent_pre[static_cast<std::size_t>(l)] = ud;
    }
    if (l + 1 < L) {
      h = selu_map(u);
      hd = selu_d1_map(u).cwiseProduct(ud);
      if (trace) {
        trace->activations[static_cast<std::size_t>(l) + 1] = h;
        trace->tangent_act[static_cast<std::size_t>(l) + 1] = hd;
      }
    } else {
      h = std::move(u);
      hd = std::move(ud);
    }
  }
  if (trace && L > 0) {
    trace->activations[static_cast<std::size_t>(L)] = h;
    trace->tangent_act[static_cast<std::size_t>(L)] = hd;
  }
  Y = std::move(h);
  Ydot = std::move(hd);
}

NetGrad::NetGrad(const DenseNet& net) {
  weights.reserve(net.weights.size());
  biases.reserve(net.biases.size());
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    weights.emplace_back(MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    biases.emplace_back(VectorXd::Zero(net.biases[l].size()));
  }
}

void NetGrad::set_zero() {
  for (auto& w : weights) w.setZero();
  for (auto& b : biases) b.setZero();
}

void NetGrad::axpy(double a, const NetGrad& other) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l] += a * other.weights[l];
    biases[l] += a * other.biases[l];
  }
}

void vjp(const DenseNet& net, const ForwardTrace& trace, const MatrixXd& Ybar,
         NetGrad& grad, MatrixXd* Xbar) {
  const int L = net.layer_count();
  MatrixXd hbar;
  if (net.head == Head::Softmax) {
    // u_bar = y .* (y_bar - <y_bar, y>) per column.
    const MatrixXd& y = trace.head_out;
    hbar.resizeLike(y);
    for (Eigen::Index c = 0; c < y.cols(); ++c) {
      const double dot = Ybar.col(c).dot(y.col(c));
      hbar.col(c) = y.col(c).cwiseProduct(Ybar.col(c).array().matrix() -
                                          VectorXd::Constant(y.rows(), dot));
    }
  } else {
    hbar = Ybar;
  }
  for (int l = L - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    MatrixXd ubar = (l + 1 < L)
                        ? MatrixXd(selu_d1_map(trace.pre[lu]).cwiseProduct(hbar))
                        : std::move(hbar);
    grad.weights[lu].noalias() += ubar * trace.activations[lu].transpose();
    grad.biases[lu] += ubar.rowwise().sum();
    if (l > 0 || Xbar) hbar.noalias() = net.weights[lu].transpose() * ubar;
  }
  if (Xbar) *Xbar = std::move(hbar);
}

void vjp_tangent(const DenseNet& net, const ForwardTrace& trace, const MatrixXd& Ybar,
                 const MatrixXd& Ydotbar, NetGrad& grad, MatrixXd* Xbar) {
  if (net.head != Head::Identity || !trace.has_tangent) {
    throw DimensionError("vjp_tangent: identity head with tangent trace required");
  }
  const int L = net.layer_count();
  MatrixXd hbar = Ybar;
  MatrixXd hdbar = Ydotbar;
  for (int l = L - 1; l >= 0; --l) {
    const auto lu = static_cast<std::size_t>(l);
    MatrixXd ubar, udbar;
    if (l + 1 < L) {
      const MatrixXd d1 = selu_d1_map(trace.pre[lu]);
      ubar = d1.cwiseProduct(hbar) +
             selu_d2_map(trace.pre[lu])
                 .cwiseProduct(trace.tangent_pre[lu])
                 .cwiseProduct(hdbar);
      udbar = d1.cwiseProduct(hdbar);
    } else {
      ubar = std::move(hbar);
      udbar = std::move(hdbar);
    }
    grad.weights[lu].noalias() += ubar * trace.activations[lu].transpose();
    grad.weights[lu].noalias() += udbar * trace.tangent_act[lu].transpose();
    grad.biases[lu] += ubar.rowwise().sum();
    if (l > 0 || Xbar) {
      hbar.noalias() = net.weights[lu].transpose() * ubar;
      hdbar.noalias() = net.weights[lu].transpose() * udbar;
    }
  }
  if (Xbar) *Xbar = std::move(hbar);
}

std::pair<NetGrad, VectorXd> vjp(const DenseNet& net, const VectorXd& x,
                                 const VectorXd& cotangent) {
  if (cotangent.size() != net.output_dim()) {
    throw DimensionError("vjp: cotangent length must equal the output dimension");
  }
  ForwardTrace trace;
  MatrixXd y;
  forward(net, MatrixXd(x), y, &trace);
  NetGrad grad(net);
  MatrixXd xbar;
  vjp(net, trace, MatrixXd(cotangent), grad, &xbar);
  return {std::move(grad), VectorXd(xbar.col(0))};
}

const ParamLayout::Segment& ParamLayout::find(const std::string& name) const {
  for (const auto& s : segments) {
    if (s.name == name) return s;
  }
  throw DimensionError("ParamLayout: unknown segment '" + name + "'");
}

Eigen::Index pack_net(const DenseNet& net, Eigen::Ref<Eigen::VectorXd> out) {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    const auto& w = net.weights[l];
    out.segment(k, w.size()) = Eigen::Map<const VectorXd>(w.data(), w.size());
    k += w.size();
    out.segment(k, net.biases[l].size()) = net.biases[l];
    k += net.biases[l].size();
  }
  return k;
}

Eigen::Index unpack_net(DenseNet& net, const Eigen::Ref<const Eigen::VectorXd>& in) {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto& w = net.weights[l];
    Eigen::Map<VectorXd>(w.data(), w.size()) = in.segment(k, w.size());
    k += w.size();
    net.biases[l] = in.segment(k, net.biases[l].size());
    k += net.biases[l].size();
  }
  return k;
}

Eigen::Index pack_grad(const NetGrad& grad, Eigen::Ref<Eigen::VectorXd> out) {
  Eigen::Index k = 0;
  for (std::size_t l = 0; l < grad.weights.size(); ++l) {
    const auto& w = grad.weights[l];
    out.segment(k, w.size()) = Eigen::Map<const VectorXd>(w.data(), w.size());
    k += w.size();
    out.segment(k, grad.biases[l].size()) = grad.biases[l];
    k += grad.biases[l].size();
  }
  return k;
}

}  // namespace survflow::net
