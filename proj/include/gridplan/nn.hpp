#pragma once

// Minimal dense networks: tanh hidden layers, linear output, manual
// backpropagation and Adam.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gridplan/error.hpp"

namespace gridplan {

class Mlp {
 public:
  Mlp() = default;

  /// Glorot-uniform weights; the output layer is scaled by `out_scale`.
  Mlp(const std::vector<int>& sizes, std::mt19937_64& rng, double out_scale = 1.0) : sizes_(sizes) {
    if (sizes.size() < 2) throw ValidationError("network needs input and output sizes");
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      const int in = sizes[i], out = sizes[i + 1];
      if (in < 1 || out < 1) throw ValidationError("layer sizes must be positive");
      const double limit = std::sqrt(6.0 / (in + out)) * (i + 2 == sizes.size() ? out_scale : 1.0);
      Eigen::MatrixXd w(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) w(r, c) = limit * unit(rng);
      weights_.push_back(std::move(w));
      biases_.push_back(Eigen::VectorXd::Zero(out));
    }
  }

  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }
  std::size_t layer_count() const { return weights_.size(); }
  Eigen::MatrixXd& weight(std::size_t i) { return weights_[i]; }
  Eigen::VectorXd& bias(std::size_t i) { return biases_[i]; }
  const Eigen::MatrixXd& weight(std::size_t i) const { return weights_[i]; }
  const Eigen::VectorXd& bias(std::size_t i) const { return biases_[i]; }

  /// Activations per layer, columns are samples. acts[0] is the input.
  struct Tape {
    std::vector<Eigen::MatrixXd> acts;
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Tape* tape = nullptr) const {
    if (x.rows() != input_size()) throw ValidationError("network input has the wrong size");
    Eigen::MatrixXd a = x;
    if (tape) tape->acts = {a};
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      Eigen::MatrixXd z = weights_[i] * a;
      z.colwise() += biases_[i];
      if (i + 1 < weights_.size()) z = z.array().tanh().matrix();
      a = std::move(z);
      if (tape) tape->acts.push_back(a);
    }
    return a;
  }

  Eigen::VectorXd forward_one(const std::vector<double>& x) const {
    return forward(Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())));
  }

  struct Gradients {
    std::vector<Eigen::MatrixXd> w;
    std::vector<Eigen::VectorXd> b;
  };

  Gradients zero_gradients() const {
    Gradients g;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      g.w.push_back(Eigen::MatrixXd::Zero(weights_[i].rows(), weights_[i].cols()));
      g.b.push_back(Eigen::VectorXd::Zero(biases_[i].size()));
    }
    return g;
  }

  /// Accumulates d(loss)/d(params) given d(loss)/d(output) for the batch
  /// recorded in `tape`.
  void backward(const Tape& tape, const Eigen::MatrixXd& d_out, Gradients& g) const {
    Eigen::MatrixXd delta = d_out;
    for (std::size_t i = weights_.size(); i-- > 0;) {
      if (i + 1 < weights_.size()) delta = (delta.array() * (1.0 - tape.acts[i + 1].array().square())).matrix();
      g.w[i] += delta * tape.acts[i].transpose();
      g.b[i] += delta.rowwise().sum();
      if (i > 0) delta = weights_[i].transpose() * delta;
    }
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.sizes_ != b.sizes_) return false;
    for (std::size_t i = 0; i < a.weights_.size(); ++i)
      if (a.weights_[i] != b.weights_[i] || a.biases_[i] != b.biases_[i]) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["sizes"] = sizes_;
    j["layers"] = nlohmann::json::array();
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      std::vector<double> w;
      for (Eigen::Index r = 0; r < weights_[i].rows(); ++r)
        for (Eigen::Index c = 0; c < weights_[i].cols(); ++c) w.push_back(weights_[i](r, c));
      std::vector<double> b(biases_[i].data(), biases_[i].data() + biases_[i].size());
      j["layers"].push_back({{"weights", w}, {"bias", b}});
    }
    return j;
  }

  static Mlp from_json(const nlohmann::json& j) {
    Mlp m;
    m.sizes_ = j.at("sizes").get<std::vector<int>>();
    const auto& layers = j.at("layers");
    if (m.sizes_.size() < 2 || layers.size() + 1 != m.sizes_.size()) throw ValidationError("network shape mismatch");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const int in = m.sizes_[i], out = m.sizes_[i + 1];
      const auto w = layers[i].at("weights").get<std::vector<double>>();
      const auto b = layers[i].at("bias").get<std::vector<double>>();
      if (static_cast<int>(w.size()) != in * out || static_cast<int>(b.size()) != out)
        throw ValidationError("network layer size mismatch");
      Eigen::MatrixXd wm(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * in + c];
      m.weights_.push_back(std::move(wm));
      m.biases_.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), out));
    }
    return m;
  }

 private:
  std::vector<int> sizes_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double lr, double max_grad_norm = 1.0)
      : lr_(lr), max_norm_(max_grad_norm), m_(net.zero_gradients()), v_(net.zero_gradients()) {}

  void step(Mlp& net, Mlp::Gradients g) {
    double norm2 = 0.0;
    for (std::size_t i = 0; i < g.w.size(); ++i) norm2 += g.w[i].squaredNorm() + g.b[i].squaredNorm();
    const double norm = std::sqrt(norm2);
    if (max_norm_ > 0.0 && norm > max_norm_) {
      const double s = max_norm_ / norm;
      for (std::size_t i = 0; i < g.w.size(); ++i) {
        g.w[i] *= s;
        g.b[i] *= s;
      }
    }
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_), c2 = 1.0 - std::pow(kBeta2, t_);
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = kBeta1 * m + (1.0 - kBeta1) * grad;
      v = (kBeta2 * v.array() + (1.0 - kBeta2) * grad.array().square()).matrix();
      param.array() -= lr_ * (m.array() / c1) / ((v.array() / c2).sqrt() + kEps);
    };
    for (std::size_t i = 0; i < g.w.size(); ++i) {
      update(net.weight(i), m_.w[i], v_.w[i], g.w[i]);
      update(net.bias(i), m_.b[i], v_.b[i], g.b[i]);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  double lr_ = 1e-3;
  double max_norm_ = 1.0;
  int t_ = 0;
  Mlp::Gradients m_, v_;
};

}  // namespace gridplan
