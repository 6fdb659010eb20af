#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fairvec/rng.hpp"

namespace fairvec::nn {

/// Row-major matrix of doubles; rows are batch entries.
class Tensor2 {
 public:
  Tensor2() = default;
  Tensor2(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  // Throws NumericError naming `where` if any entry is NaN or infinite.
  void require_finite(const std::string& where) const;

  friend bool operator==(const Tensor2&, const Tensor2&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Rows of `x` picked by `index`.
Tensor2 gather_rows(const Tensor2& x, std::span<const std::size_t> index);

// A trainable array and its gradient buffer.
struct Param {
  std::vector<double>* value = nullptr;
  std::vector<double>* grad = nullptr;
  std::string name;
};

enum class LayerKind : std::uint8_t {
  dense = 1,
  relu = 2,
  dropout = 3,
  gradient_reversal = 4,
  l2_normalize = 5,
};

std::string to_string(LayerKind kind);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual LayerKind kind() const = 0;
  virtual Tensor2 forward(const Tensor2& x, bool training) = 0;
  // Gradient w.r.t. the input of the last forward; accumulates parameter grads.
  virtual Tensor2 backward(const Tensor2& grad_out) = 0;
  virtual std::vector<Param> params() { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
  // Layer-specific scalar stored in checkpoints (dropout p, GRL lambda, ...).
  virtual double scalar() const { return 0.0; }
};

class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out);
  // Glorot uniform weights in +-sqrt(6 / (in + out)), zero bias.
  Dense(std::size_t in, std::size_t out, Rng& rng);

  LayerKind kind() const override { return LayerKind::dense; }
  Tensor2 forward(const Tensor2& x, bool training) override;
  Tensor2 backward(const Tensor2& grad_out) override;
  std::vector<Param> params() override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dense>(*this); }

  std::size_t in() const { return in_; }
  std::size_t out() const { return out_; }
  // in x out, row-major
  std::vector<double>& weights() { return w_; }
  const std::vector<double>& weights() const { return w_; }
  std::vector<double>& bias() { return b_; }
  const std::vector<double>& bias() const { return b_; }
  const std::vector<double>& weight_grad() const { return gw_; }
  const std::vector<double>& bias_grad() const { return gb_; }

 private:
  std::size_t in_;
  std::size_t out_;
  std::vector<double> w_, b_, gw_, gb_;
  Tensor2 input_;
};

class Relu final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::relu; }
  Tensor2 forward(const Tensor2& x, bool training) override;
  Tensor2 backward(const Tensor2& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Relu>(*this); }

 private:
  Tensor2 input_;
};

/// Inverted dropout: in training each unit is zeroed with probability p and
/// survivors are scaled by 1 / (1 - p); evaluation is the identity.
class Dropout final : public Layer {
 public:
  Dropout(double p, std::uint64_t seed);

  LayerKind kind() const override { return LayerKind::dropout; }
  Tensor2 forward(const Tensor2& x, bool training) override;
  Tensor2 backward(const Tensor2& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Dropout>(*this); }
  double scalar() const override { return p_; }

  double p() const { return p_; }
  void reseed(std::uint64_t seed) { rng_ = Rng(seed); }
  // While frozen, training passes reuse the last mask (for gradient checks).
  void freeze_mask(bool frozen) { frozen_ = frozen; }

 private:
  double p_;
  Rng rng_;
  bool frozen_ = false;
  Tensor2 mask_;  // 0 or 1 / (1 - p); empty for eval passes
};

/// Identity forward; backward multiplies the incoming gradient by -lambda.
class GradientReversal final : public Layer {
 public:
  explicit GradientReversal(double lambda);

  LayerKind kind() const override { return LayerKind::gradient_reversal; }
  Tensor2 forward(const Tensor2& x, bool training) override;
  Tensor2 backward(const Tensor2& grad_out) override;
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<GradientReversal>(*this);
  }
  double scalar() const override { return lambda_; }

  double lambda() const { return lambda_; }
  void set_lambda(double lambda);

 private:
  double lambda_;
};

// Row-wise x / |x|.
class L2Normalize final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::l2_normalize; }
  Tensor2 forward(const Tensor2& x, bool training) override;
  Tensor2 backward(const Tensor2& grad_out) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<L2Normalize>(*this); }

 private:
  Tensor2 output_;
  std::vector<double> norms_;
};

class Sequential {
 public:
  Sequential() = default;
  Sequential(const Sequential& other);
  Sequential& operator=(const Sequential& other);
  Sequential(Sequential&&) noexcept = default;
  Sequential& operator=(Sequential&&) noexcept = default;

  Sequential& add(std::unique_ptr<Layer> layer);

  Tensor2 forward(const Tensor2& x, bool training);
  Tensor2 backward(const Tensor2& grad_out);

  std::vector<Param> params();
  void zero_grad();

  std::size_t size() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }

  // Applies `fn` to every layer of type T.
  template <typename T, typename Fn>
  void for_each(Fn&& fn) {
    for (auto& l : layers_) {
      if (auto* t = dynamic_cast<T*>(l.get())) fn(*t);
    }
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

Tensor2 softmax(const Tensor2& logits);

struct XentResult {
  double loss = 0.0;     // mean negative log-likelihood over the batch
  Tensor2 grad;          // d loss / d logits = (softmax - onehot) / batch
  std::size_t correct = 0;
};

XentResult softmax_xent(const Tensor2& logits, std::span<const int> labels);

std::vector<int> argmax_rows(const Tensor2& x);

enum class OptimizerKind { sgd_momentum, adam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::sgd_momentum;
  double lr = 0.1;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
};

/// sgd_momentum: v = mu v + (g + wd theta); theta -= lr v.
/// adam: g' = g + wd theta, bias-corrected moments, theta -= lr m^ / (sqrt(v^) + eps).
class Optimizer {
 public:
  Optimizer(OptimizerConfig config, std::vector<Param> params);

  void step();
  void zero_grad();

  double lr() const { return config_.lr; }
  void set_lr(double lr);
  const OptimizerConfig& config() const { return config_; }

 private:
  OptimizerConfig config_;
  std::vector<Param> params_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t t_ = 0;
};

/// Multiplies the learning rate by `factor` once the observed loss has
/// improved by less than `min_rel_improvement` (relative to the best so far)
/// for `patience` consecutive epochs, at most `max_decays` times. Counting
/// starts only after the loss first drops `min_rel_improvement` below its
/// initial value.
class PlateauScheduler {
 public:
  PlateauScheduler(double factor = 0.1, int patience = 3, int max_decays = 2,
                   double min_rel_improvement = 0.01);

  // Returns true when the learning rate was decayed.
  bool observe(double loss, Optimizer& opt);
  int decays() const { return decays_; }

 private:
  double factor_;
  int patience_;
  int max_decays_;
  double min_rel_;
  double best_;
  int stale_ = 0;
  int decays_ = 0;
  bool has_best_ = false;
  bool armed_ = false;
};

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t retried = 0;  // entries re-estimated at a tenth of the step
  std::string worst;        // "param[index]" of the worst entry
};

/// Central differences on up to `per_param` sampled entries of every
/// parameter, keeping the better of `eps` and `eps / 10` for entries that
/// disagree (a kink inside the step). `loss` must be deterministic;
/// `analytic` must fill the gradient buffers for the current parameter values.
GradientCheckResult gradient_check(std::vector<Param> params, const std::function<double()>& loss,
                                   const std::function<void()>& analytic,
                                   std::size_t per_param = 50, double eps = 1e-4,
                                   std::uint64_t seed = 0);

}  // namespace fairvec::nn
