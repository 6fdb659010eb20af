#include "fairvec/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairvec/error.hpp"

namespace fairvec::nn {

Tensor2::Tensor2(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw InputError("tensor data does not match its shape");
}

void Tensor2::require_finite(const std::string& where) const {
  for (std::size_t n = 0; n < data_.size(); ++n) {
    if (!std::isfinite(data_[n])) {
      throw NumericError("non-finite value in " + where + " at row " + std::to_string(n / cols_) +
                         ", column " + std::to_string(n % cols_));
    }
  }
}

Tensor2 gather_rows(const Tensor2& x, std::span<const std::size_t> index) {
  Tensor2 out(index.size(), x.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    std::copy_n(x.row(index[r]), x.cols(), out.row(r));
  }
  return out;
}

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::relu: return "relu";
    case LayerKind::dropout: return "dropout";
    case LayerKind::gradient_reversal: return "gradient_reversal";
    case LayerKind::l2_normalize: return "l2_normalize";
  }
  return "unknown";
}

namespace {

void require_cols(const Tensor2& x, std::size_t cols, const char* layer) {
  if (x.cols() != cols) {
    throw InputError(std::string(layer) + ": expected " + std::to_string(cols) +
                     " input columns, got " + std::to_string(x.cols()));
  }
}

void require_same_shape(const Tensor2& a, const Tensor2& b, const char* layer) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw InputError(std::string(layer) + ": gradient shape does not match the forward pass");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::size_t in, std::size_t out)
    : in_(in), out_(out), w_(in * out, 0.0), b_(out, 0.0), gw_(in * out, 0.0), gb_(out, 0.0) {
  if (in == 0 || out == 0) throw InputError("dense layer needs positive widths");
}

Dense::Dense(std::size_t in, std::size_t out, Rng& rng) : Dense(in, out) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  for (auto& w : w_) w = (2.0 * rng.uniform() - 1.0) * limit;
}

Tensor2 Dense::forward(const Tensor2& x, bool /*training*/) {
  require_cols(x, in_, "dense");
  input_ = x;
  Tensor2 y(x.rows(), out_);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* yr = y.row(r);
    std::copy(b_.begin(), b_.end(), yr);
    const double* xr = x.row(r);
    for (std::size_t k = 0; k < in_; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      const double* wk = w_.data() + k * out_;
      for (std::size_t c = 0; c < out_; ++c) yr[c] += xv * wk[c];
    }
  }
  return y;
}

Tensor2 Dense::backward(const Tensor2& grad_out) {
  require_cols(grad_out, out_, "dense backward");
  if (grad_out.rows() != input_.rows()) {
    throw InputError("dense: gradient batch does not match the forward pass");
  }
  const std::size_t batch = grad_out.rows();
  for (std::size_t r = 0; r < batch; ++r) {
    const double* g = grad_out.row(r);
    const double* xr = input_.row(r);
    for (std::size_t c = 0; c < out_; ++c) gb_[c] += g[c];
    for (std::size_t k = 0; k < in_; ++k) {
      const double xv = xr[k];
      if (xv == 0.0) continue;
      double* gwk = gw_.data() + k * out_;
      for (std::size_t c = 0; c < out_; ++c) gwk[c] += xv * g[c];
    }
  }
  // grad_in = grad_out W^T, through an explicit transpose so the inner loop
  // runs over contiguous memory.
  std::vector<double> wt(in_ * out_);
  for (std::size_t k = 0; k < in_; ++k) {
    for (std::size_t c = 0; c < out_; ++c) wt[c * in_ + k] = w_[k * out_ + c];
  }
  Tensor2 gx(batch, in_);
  for (std::size_t r = 0; r < batch; ++r) {
    const double* g = grad_out.row(r);
    double* gxr = gx.row(r);
    for (std::size_t c = 0; c < out_; ++c) {
      const double gv = g[c];
      if (gv == 0.0) continue;
      const double* wc = wt.data() + c * in_;
      for (std::size_t k = 0; k < in_; ++k) gxr[k] += gv * wc[k];
    }
  }
  return gx;
}

std::vector<Param> Dense::params() { return {{&w_, &gw_, "weight"}, {&b_, &gb_, "bias"}}; }

// ---------------------------------------------------------------------------
// Relu

Tensor2 Relu::forward(const Tensor2& x, bool /*training*/) {
  input_ = x;
  Tensor2 y = x;
  for (auto& v : y.data()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor2 Relu::backward(const Tensor2& grad_out) {
  require_same_shape(grad_out, input_, "relu");
  Tensor2 g = grad_out;
  const auto& in = input_.data();
  auto& gd = g.data();
  for (std::size_t n = 0; n < gd.size(); ++n) {
    if (!(in[n] > 0.0)) gd[n] = 0.0;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Dropout

Dropout::Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {
  if (!(p >= 0.0 && p < 1.0)) throw InputError("dropout probability must lie in [0, 1)");
}

Tensor2 Dropout::forward(const Tensor2& x, bool training) {
  if (!training || p_ == 0.0) {
    mask_ = Tensor2();
    return x;
  }
  const bool reuse = frozen_ && mask_.rows() == x.rows() && mask_.cols() == x.cols();
  if (!reuse) {
    mask_ = Tensor2(x.rows(), x.cols());
    const double keep_scale = 1.0 / (1.0 - p_);
    for (auto& m : mask_.data()) m = rng_.uniform() < p_ ? 0.0 : keep_scale;
  }
  Tensor2 y = x;
  auto& yd = y.data();
  const auto& md = mask_.data();
  for (std::size_t n = 0; n < yd.size(); ++n) yd[n] *= md[n];
  return y;
}

Tensor2 Dropout::backward(const Tensor2& grad_out) {
  if (mask_.data().empty()) return grad_out;
  require_same_shape(grad_out, mask_, "dropout");
  Tensor2 g = grad_out;
  auto& gd = g.data();
  const auto& md = mask_.data();
  for (std::size_t n = 0; n < gd.size(); ++n) gd[n] *= md[n];
  return g;
}

// ---------------------------------------------------------------------------
// GradientReversal

GradientReversal::GradientReversal(double lambda) : lambda_(0.0) { set_lambda(lambda); }

void GradientReversal::set_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InputError("lambda must be finite and >= 0");
  lambda_ = lambda;
}

Tensor2 GradientReversal::forward(const Tensor2& x, bool /*training*/) { return x; }

Tensor2 GradientReversal::backward(const Tensor2& grad_out) {
  Tensor2 g = grad_out;
  for (auto& v : g.data()) v *= -lambda_;
  return g;
}

// ---------------------------------------------------------------------------
// L2Normalize

Tensor2 L2Normalize::forward(const Tensor2& x, bool /*training*/) {
  output_ = x;
  norms_.assign(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double* row = output_.row(r);
    double sq = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) sq += row[c] * row[c];
    const double n = std::sqrt(sq);
    if (!(n > 1e-12)) throw NumericError("l2_normalize: zero row " + std::to_string(r));
    norms_[r] = n;
    for (std::size_t c = 0; c < x.cols(); ++c) row[c] /= n;
  }
  return output_;
}

Tensor2 L2Normalize::backward(const Tensor2& grad_out) {
  require_same_shape(grad_out, output_, "l2_normalize");
  Tensor2 g(grad_out.rows(), grad_out.cols());
  for (std::size_t r = 0; r < g.rows(); ++r) {
    const double* y = output_.row(r);
    const double* go = grad_out.row(r);
    double proj = 0.0;
    for (std::size_t c = 0; c < g.cols(); ++c) proj += y[c] * go[c];
    double* gr = g.row(r);
    for (std::size_t c = 0; c < g.cols(); ++c) gr[c] = (go[c] - y[c] * proj) / norms_[r];
  }
  return g;
}

// ---------------------------------------------------------------------------
// Sequential

Sequential::Sequential(const Sequential& other) {
  for (const auto& l : other.layers_) layers_.push_back(l->clone());
}

Sequential& Sequential::operator=(const Sequential& other) {
  if (this != &other) {
    layers_.clear();
    for (const auto& l : other.layers_) layers_.push_back(l->clone());
  }
  return *this;
}

Sequential& Sequential::add(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *this;
}

Tensor2 Sequential::forward(const Tensor2& x, bool training) {
  Tensor2 h = x;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    h = layers_[i]->forward(h, training);
    h.require_finite(to_string(layers_[i]->kind()) + " forward (layer " + std::to_string(i) + ")");
  }
  return h;
}

Tensor2 Sequential::backward(const Tensor2& grad_out) {
  Tensor2 g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(g);
    g.require_finite(to_string(layers_[i]->kind()) + " backward (layer " + std::to_string(i) + ")");
  }
  return g;
}

std::vector<Param> Sequential::params() {
  std::vector<Param> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    for (auto p : layers_[i]->params()) {
      p.name = "layer" + std::to_string(i) + "." + p.name;
      out.push_back(p);
    }
  }
  return out;
}

void Sequential::zero_grad() {
  for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

// ---------------------------------------------------------------------------
// Losses

Tensor2 softmax(const Tensor2& logits) {
  Tensor2 p = logits;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double* row = p.row(r);
    const double mx = *std::max_element(row, row + p.cols());
    double sum = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      row[c] = std::exp(row[c] - mx);
      sum += row[c];
    }
    for (std::size_t c = 0; c < p.cols(); ++c) row[c] /= sum;
  }
  return p;
}

XentResult softmax_xent(const Tensor2& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows()) throw InputError("softmax_xent: label count != batch size");
  if (logits.rows() == 0) throw InputError("softmax_xent: empty batch");
  XentResult out;
  out.grad = Tensor2(logits.rows(), logits.cols());
  const double inv_batch = 1.0 / static_cast<double>(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw InputError("softmax_xent: label " + std::to_string(y) + " outside [0, " +
                       std::to_string(logits.cols()) + ")");
    }
    const double* z = logits.row(r);
    const auto best = static_cast<std::size_t>(std::max_element(z, z + logits.cols()) - z);
    const double mx = z[best];
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) sum += std::exp(z[c] - mx);
    const double log_sum = std::log(sum);
    out.loss += (log_sum - (z[static_cast<std::size_t>(y)] - mx)) * inv_batch;
    double* g = out.grad.row(r);
    for (std::size_t c = 0; c < logits.cols(); ++c) g[c] = std::exp(z[c] - mx - log_sum) * inv_batch;
    g[static_cast<std::size_t>(y)] -= inv_batch;
    if (best == static_cast<std::size_t>(y)) ++out.correct;
  }
  if (!std::isfinite(out.loss)) throw NumericError("softmax_xent: non-finite loss");
  return out;
}

std::vector<int> argmax_rows(const Tensor2& x) {
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* row = x.row(r);
    out[r] = static_cast<int>(std::max_element(row, row + x.cols()) - row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

Optimizer::Optimizer(OptimizerConfig config, std::vector<Param> params)
    : config_(config), params_(std::move(params)) {
  set_lr(config.lr);
  for (const auto& p : params_) {
    if (p.value->size() != p.grad->size()) {
      throw InputError("parameter '" + p.name + "' and its gradient differ in size");
    }
    m_.emplace_back(p.value->size(), 0.0);
    if (config_.kind == OptimizerKind::adam) v_.emplace_back(p.value->size(), 0.0);
  }
}

void Optimizer::set_lr(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw InputError("learning rate must be positive");
  config_.lr = lr;
}

void Optimizer::zero_grad() {
  for (auto& p : params_) std::fill(p.grad->begin(), p.grad->end(), 0.0);
}

void Optimizer::step() {
  for (const auto& p : params_) {
    for (double g : *p.grad) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + p.name + "'");
    }
  }
  ++t_;
  const double lr = config_.lr;
  const double wd = config_.weight_decay;
  if (config_.kind == OptimizerKind::sgd_momentum) {
    const double mu = config_.momentum;
    for (std::size_t n = 0; n < params_.size(); ++n) {
      auto& theta = *params_[n].value;
      const auto& g = *params_[n].grad;
      auto& v = m_[n];
      for (std::size_t i = 0; i < theta.size(); ++i) {
        v[i] = mu * v[i] + (g[i] + wd * theta[i]);
        theta[i] -= lr * v[i];
      }
    }
    return;
  }
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t n = 0; n < params_.size(); ++n) {
    auto& theta = *params_[n].value;
    const auto& g = *params_[n].grad;
    auto& m = m_[n];
    auto& v = v_[n];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double gi = g[i] + wd * theta[i];
      m[i] = b1 * m[i] + (1.0 - b1) * gi;
      v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
      theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + config_.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// PlateauScheduler

PlateauScheduler::PlateauScheduler(double factor, int patience, int max_decays,
                                   double min_rel_improvement)
    : factor_(factor), patience_(patience), max_decays_(max_decays),
      min_rel_(min_rel_improvement), best_(0.0) {
  if (!(factor > 0.0 && factor < 1.0)) throw InputError("decay factor must lie in (0, 1)");
  if (patience < 1) throw InputError("patience must be at least 1");
}

bool PlateauScheduler::observe(double loss, Optimizer& opt) {
  if (!has_best_) {
    best_ = loss;
    has_best_ = true;
    return false;
  }
  if (!armed_) {
    // Waiting for the first real improvement: a loss that has not started
    // falling has not levelled off either.
    if (loss < best_ * (1.0 - min_rel_)) armed_ = true;
    best_ = std::min(best_, loss);
    return false;
  }
  if (loss < best_ * (1.0 - min_rel_)) {
    best_ = loss;
    stale_ = 0;
    return false;
  }
  best_ = std::min(best_, loss);
  if (++stale_ < patience_ || decays_ >= max_decays_) return false;
  opt.set_lr(opt.lr() * factor_);
  ++decays_;
  stale_ = 0;
  return true;
}

// ---------------------------------------------------------------------------
// gradient_check

GradientCheckResult gradient_check(std::vector<Param> params, const std::function<double()>& loss,
                                   const std::function<void()>& analytic, std::size_t per_param,
                                   double eps, std::uint64_t seed) {
  for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
  analytic();
  std::vector<std::vector<double>> grads;
  for (const auto& p : params) grads.push_back(*p.grad);

  GradientCheckResult out;
  Rng rng(seed);
  for (std::size_t n = 0; n < params.size(); ++n) {
    auto& value = *params[n].value;
    std::vector<std::size_t> index(value.size());
    std::iota(index.begin(), index.end(), std::size_t{0});
    if (index.size() > per_param) {
      rng.shuffle(std::span<std::size_t>(index));
      index.resize(per_param);
    }
    for (auto i : index) {
      const double a = grads[n][i];
      auto relative_error = [&](double step) {
        const double saved = value[i];
        value[i] = saved + step;
        const double up = loss();
        value[i] = saved - step;
        const double down = loss();
        value[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        return std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
      };
      double rel = relative_error(eps);
      // A step across a ReLU kink disagrees at any precision; a tenth of the
      // step usually stays on one side.
      if (rel > 1e-6) {
        rel = std::min(rel, relative_error(eps / 10.0));
        ++out.retried;
      }
      ++out.checked;
      if (rel > out.max_relative_error) {
        out.max_relative_error = rel;
        out.worst = params[n].name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return out;
}

}  // namespace fairvec::nn
