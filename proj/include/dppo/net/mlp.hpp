#pragma once

#include <Eigen/Core>
#include <Eigen/QR>

#include <cmath>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dppo::net {

enum class Activation { tanh, identity };

inline std::string_view to_string(Activation a) { return a == Activation::tanh ? "tanh" : "identity"; }

inline Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw std::invalid_argument("unknown activation '" + std::string(name) + "'");
}

/// tanh through the vectorised exp: 1 - 2 / (e^{2x} + 1). Absolute error
/// stays at rounding level; Eigen's own tanh is scalar for double.
template <typename Derived>
void tanh_in_place(Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  x = Scalar(1) - Scalar(2) / ((Scalar(2) * x).exp() + Scalar(1));
}

template <typename Scalar>
struct DenseLayer {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  Matrix weight;  // out x in
  Vector bias;    // out
  Activation activation = Activation::identity;

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

/// Activations kept by a batched forward pass. Column b of every matrix
/// belongs to sample b.
template <typename Scalar>
struct ForwardCache {
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> inputs;   // input of layer l
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> outputs;  // activated output of layer l
};

/// Feed-forward network. Samples are columns: forward maps (in x B) to (out x B).
template <typename Scalar = double>
class Mlp {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Layer = DenseLayer<Scalar>;

  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) { check_shapes(); }

  /// Zero-initialised network with `sizes` = {in, h1, ..., out}; hidden layers
  /// use `hidden`, the last layer is linear.
  static Mlp zeros(const std::vector<Eigen::Index>& sizes, Activation hidden = Activation::tanh) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
    std::vector<Layer> layers;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      Layer layer;
      layer.weight = Matrix::Zero(sizes[l + 1], sizes[l]);
      layer.bias = Vector::Zero(sizes[l + 1]);
      layer.activation = l + 2 == sizes.size() ? Activation::identity : hidden;
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  }

  /// Orthogonal initialisation, gain `hidden_gain` on hidden layers and
  /// `output_gain` on the last one; biases zero.
  template <typename Urbg>
  static Mlp orthogonal(const std::vector<Eigen::Index>& sizes, double hidden_gain, double output_gain,
                        Urbg& rng, Activation hidden = Activation::tanh) {
    Mlp net = zeros(sizes, hidden);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < net.layers_.size(); ++l) {
      auto& w = net.layers_[l].weight;
      const Eigen::Index rows = w.rows(), cols = w.cols();
      const bool tall = rows >= cols;
      Eigen::MatrixXd sample(tall ? rows : cols, tall ? cols : rows);
      for (Eigen::Index i = 0; i < sample.size(); ++i) sample.data()[i] = normal(rng);
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(sample);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(sample.rows(), sample.cols());
      // Sign fix so the draw is uniform over the orthogonal group.
      const Eigen::MatrixXd r = qr.matrixQR().topLeftCorner(sample.cols(), sample.cols());
      for (Eigen::Index c = 0; c < q.cols(); ++c) {
        if (r(c, c) < 0) q.col(c) = -q.col(c);
      }
      const double gain = l + 1 == net.layers_.size() ? output_gain : hidden_gain;
      Eigen::MatrixXd oriented = tall ? q : Eigen::MatrixXd(q.transpose());
      w = (gain * oriented).template cast<Scalar>();
    }
    return net;
  }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }
  Eigen::Index inputs() const { return layers_.front().inputs(); }
  Eigen::Index outputs() const { return layers_.back().outputs(); }

  Eigen::Index parameter_count() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Batched forward pass; `cache` (optional) receives what backward needs.
  Matrix forward(const Eigen::Ref<const Matrix>& input, ForwardCache<Scalar>* cache = nullptr) const {
    if (input.rows() != inputs()) {
      throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.rows()) +
                                  " rows, expected " + std::to_string(inputs()));
    }
    if (cache) {
      cache->inputs.clear();
      cache->outputs.clear();
    }
    Matrix x = input;
    for (const auto& layer : layers_) {
      Matrix y = layer.weight * x;
      y.colwise() += layer.bias;
      if (layer.activation == Activation::tanh) {
        auto a = y.array();
        tanh_in_place(a);
      }
      if (cache) {
        cache->inputs.push_back(std::move(x));
        cache->outputs.push_back(y);
      }
      x = std::move(y);
    }
    return x;
  }

  Vector forward_one(const Eigen::Ref<const Vector>& input) const {
    return forward(Matrix(input)).col(0);
  }

  /// Reverse-mode pass. Returns parameter gradients (shaped like this network)
  /// summed over the batch; writes d loss / d input to `input_grad` if given.
  Mlp backward(const ForwardCache<Scalar>& cache, const Eigen::Ref<const Matrix>& output_grad,
               Matrix* input_grad = nullptr) const {
    if (cache.outputs.size() != layers_.size() ||
        output_grad.rows() != outputs() || output_grad.cols() != cache.outputs.back().cols()) {
      throw std::invalid_argument("Mlp::backward: cache does not match network or gradient shape");
    }
    Mlp grads = zeros_like();
    Matrix delta = output_grad;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& layer = layers_[k];
      if (layer.activation == Activation::tanh) {
        delta = (delta.array() * (Scalar(1) - cache.outputs[k].array().square())).matrix();
      }
      grads.layers_[k].weight.noalias() = delta * cache.inputs[k].transpose();
      grads.layers_[k].bias = delta.rowwise().sum();
      if (k > 0 || input_grad) {
        Matrix next = layer.weight.transpose() * delta;
        delta = std::move(next);
      }
    }
    if (input_grad) *input_grad = std::move(delta);
    return grads;
  }

  Mlp zeros_like() const {
    Mlp out = *this;
    for (auto& l : out.layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return out;
  }

  /// Flat parameter view: per layer, weights column-major then bias.
  Vector flatten() const {
    Vector flat(parameter_count());
    Eigen::Index offset = 0;
    for (const auto& l : layers_) {
      flat.segment(offset, l.weight.size()) = l.weight.reshaped();
      offset += l.weight.size();
      flat.segment(offset, l.bias.size()) = l.bias;
      offset += l.bias.size();
    }
    return flat;
  }

  void assign(const Eigen::Ref<const Vector>& flat) {
    if (flat.size() != parameter_count()) {
      throw std::invalid_argument("Mlp::assign: flat vector has wrong length");
    }
    Eigen::Index offset = 0;
    for (auto& l : layers_) {
      l.weight.reshaped() = flat.segment(offset, l.weight.size());
      offset += l.weight.size();
      l.bias = flat.segment(offset, l.bias.size());
      offset += l.bias.size();
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

 private:
  void check_shapes() const {
    if (layers_.empty()) throw std::invalid_argument("Mlp needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      if (layers_[l].bias.size() != layers_[l].weight.rows()) {
        throw std::invalid_argument("Mlp layer " + std::to_string(l) + ": bias length mismatch");
      }
      if (l > 0 && layers_[l].inputs() != layers_[l - 1].outputs()) {
        throw std::invalid_argument("Mlp layer " + std::to_string(l) + ": input width mismatch");
      }
    }
  }

  std::vector<Layer> layers_;
};

}  // namespace dppo::net
