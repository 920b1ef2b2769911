#include "ltmn/neural.h"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace ltmn {

namespace {

Vector sigmoid(const Vector& z) {
  return z.unaryExpr([](double v) {
    if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
    double e = std::exp(v);
    return e / (1.0 + e);
  });
}

void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, std::string_view what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw ShapeError(std::string(what) + ": expected " + std::to_string(rows) + "x" +
                     std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                     std::to_string(m.cols()));
  }
}

}  // namespace

Matrix checked_matrix(Eigen::Index rows, Eigen::Index cols, std::span<const double> row_major) {
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != row_major.size())
    throw ShapeError("checked_matrix: data size does not match shape");
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row_major[static_cast<std::size_t>(r * cols + c)];
  require_finite(m, "checked_matrix");
  return m;
}

void require_finite(const Matrix& m, std::string_view what) {
  if (!m.allFinite()) throw PreconditionError(std::string(what) + ": non-finite entry");
}

double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double uniform(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

int sample_categorical(std::span<const double> weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw PreconditionError("sample_categorical: weights sum to zero");
  double u = uniform01(rng) * total;
  double acc = 0.0;
  int last_positive = -1;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last_positive = static_cast<int>(i);
    if (u < acc) return last_positive;
  }
  return last_positive;
}

void fill_uniform(Matrix& m, Rng& rng, double scale) {
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = uniform(rng, -scale, scale);
}

// --- ParameterSet -----------------------------------------------------------

std::size_t ParameterSet::add(std::string name, Matrix value) {
  if (find(name)) throw PreconditionError("duplicate parameter name " + name);
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(std::string_view name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return i;
  return std::nullopt;
}

Matrix& ParameterSet::at(std::string_view name) {
  auto slot = find(name);
  if (!slot) throw PreconditionError("no parameter named " + std::string(name));
  return values_[*slot];
}

const Matrix& ParameterSet::at(std::string_view name) const {
  auto slot = find(name);
  if (!slot) throw PreconditionError("no parameter named " + std::string(name));
  return values_[*slot];
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  out.names_ = names_;
  out.values_.reserve(values_.size());
  for (const Matrix& m : values_) out.values_.push_back(Matrix::Zero(m.rows(), m.cols()));
  return out;
}

void ParameterSet::set_zero() {
  for (Matrix& m : values_) m.setZero();
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const Matrix& m : values_) n += static_cast<std::size_t>(m.size());
  return n;
}

double ParameterSet::squared_norm() const {
  double s = 0.0;
  for (const Matrix& m : values_) s += m.squaredNorm();
  return s;
}

void ParameterSet::scale(double factor) {
  for (Matrix& m : values_) m *= factor;
}

void ParameterSet::add_scaled(const ParameterSet& other, double factor) {
  if (!same_shapes(other)) throw ShapeError("add_scaled: parameter shapes differ");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += factor * other.values_[i];
}

bool ParameterSet::same_shapes(const ParameterSet& other) const {
  if (values_.size() != other.values_.size()) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() || values_[i].cols() != other.values_[i].cols())
      return false;
  }
  return true;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  if (a.names_ != b.names_ || !a.same_shapes(b)) return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    const Matrix& x = a.values_[i];
    const Matrix& y = b.values_[i];
    if (std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) != 0)
      return false;
  }
  return true;
}

// --- LSTM -------------------------------------------------------------------

LstmParams LstmParams::zeros(Eigen::Index input_size, Eigen::Index hidden_size) {
  return {Matrix::Zero(4 * hidden_size, input_size), Matrix::Zero(4 * hidden_size, hidden_size),
          Matrix::Zero(4 * hidden_size, 1)};
}

LstmSlots add_lstm(ParameterSet& params, const std::string& prefix, Eigen::Index input_size,
                   Eigen::Index hidden_size, Rng& rng, double scale, double forget_bias) {
  Matrix w(4 * hidden_size, input_size), u(4 * hidden_size, hidden_size);
  fill_uniform(w, rng, scale);
  fill_uniform(u, rng, scale);
  Matrix b = Matrix::Zero(4 * hidden_size, 1);
  b.block(hidden_size, 0, hidden_size, 1).setConstant(forget_bias);
  LstmSlots slots;
  slots.input_weights = params.add(prefix + ".W", std::move(w));
  slots.recurrent_weights = params.add(prefix + ".U", std::move(u));
  slots.bias = params.add(prefix + ".b", std::move(b));
  return slots;
}

LstmStepCache lstm_forward(const LstmView& p, const Vector& x, const Vector& h_prev,
                           const Vector& c_prev) {
  const Eigen::Index hidden = p.recurrent_weights.cols();
  require_shape(p.recurrent_weights, 4 * hidden, hidden, "lstm recurrent weights");
  require_shape(p.input_weights, 4 * hidden, x.size(), "lstm input weights");
  require_shape(p.bias, 4 * hidden, 1, "lstm bias");
  if (h_prev.size() != hidden || c_prev.size() != hidden) throw ShapeError("lstm state size mismatch");

  Vector z = p.input_weights * x + p.recurrent_weights * h_prev + p.bias.col(0);
  LstmStepCache cache;
  cache.x = x;
  cache.h_prev = h_prev;
  cache.c_prev = c_prev;
  cache.i = sigmoid(z.segment(0, hidden));
  cache.f = sigmoid(z.segment(hidden, hidden));
  cache.o = sigmoid(z.segment(2 * hidden, hidden));
  cache.g = z.segment(3 * hidden, hidden).array().tanh();
  cache.c = cache.f.cwiseProduct(c_prev) + cache.i.cwiseProduct(cache.g);
  cache.tanh_c = cache.c.array().tanh();
  cache.h = cache.o.cwiseProduct(cache.tanh_c);
  return cache;
}

LstmState lstm_step(const LstmParams& p, const Vector& x, const Vector& h_prev, const Vector& c_prev) {
  auto cache = lstm_forward({p.input_weights, p.recurrent_weights, p.bias}, x, h_prev, c_prev);
  return {std::move(cache.h), std::move(cache.c)};
}

LstmInputGrads lstm_backward(const LstmView& p, const LstmStepCache& cache, const Vector& dh,
                             const Vector& dc, LstmGrads grads) {
  const Eigen::Index hidden = cache.h.size();
  if (dh.size() != hidden || dc.size() != hidden) throw ShapeError("lstm_backward: gradient size mismatch");

  Vector d_o = dh.cwiseProduct(cache.tanh_c);
  Vector dc_total =
      dc + dh.cwiseProduct(cache.o).cwiseProduct((1.0 - cache.tanh_c.array().square()).matrix());

  Vector dz(4 * hidden);
  dz.segment(0, hidden) = dc_total.cwiseProduct(cache.g).array() * cache.i.array() * (1.0 - cache.i.array());
  dz.segment(hidden, hidden) =
      dc_total.cwiseProduct(cache.c_prev).array() * cache.f.array() * (1.0 - cache.f.array());
  dz.segment(2 * hidden, hidden) = d_o.array() * cache.o.array() * (1.0 - cache.o.array());
  dz.segment(3 * hidden, hidden) = dc_total.cwiseProduct(cache.i).array() * (1.0 - cache.g.array().square());

  grads.input_weights.noalias() += dz * cache.x.transpose();
  grads.recurrent_weights.noalias() += dz * cache.h_prev.transpose();
  grads.bias.col(0) += dz;

  LstmInputGrads out;
  out.dx.noalias() = p.input_weights.transpose() * dz;
  out.dh_prev.noalias() = p.recurrent_weights.transpose() * dz;
  out.dc_prev = dc_total.cwiseProduct(cache.f);
  return out;
}

// --- Output layers ----------------------------------------------------------

Vector softmax_with_temperature(const Vector& logits, double tau) {
  if (!(tau > 0.0)) throw PreconditionError("temperature must be > 0");
  if (logits.size() == 0) throw ShapeError("softmax of an empty vector");
  if (!logits.allFinite()) throw PreconditionError("softmax: non-finite logits");
  Vector scaled = logits / tau;
  Vector e = (scaled.array() - scaled.maxCoeff()).exp();
  return e / e.sum();
}

Vector softmax(const Vector& logits) { return softmax_with_temperature(logits, 1.0); }

double cross_entropy(const Vector& probs, int target) {
  if (target < 0 || target >= probs.size())
    throw PreconditionError("cross_entropy: target " + std::to_string(target) + " out of range");
  return -std::log(std::max(probs[target], kProbabilityFloor));
}

double entropy(const Vector& probs) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return h;
}

int argmax(const Vector& v) {
  Eigen::Index best = 0;
  v.maxCoeff(&best);
  return static_cast<int>(best);
}

// --- Optimization -----------------------------------------------------------

AdamState AdamState::for_params(const ParameterSet& params) {
  AdamState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  return s;
}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr) {
  if (!params.same_shapes(grads) || !params.same_shapes(state.first_moment) ||
      !params.same_shapes(state.second_moment)) {
    throw ShapeError("adam_step: parameter, gradient and moment shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& m = state.first_moment[k];
    Matrix& v = state.second_moment[k];
    const Matrix& g = grads[k];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseProduct(g);
    params[k].array() -=
        lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + state.epsilon);
  }
}

double clip_grad_norm(ParameterSet& grads, double max_norm) {
  double norm = std::sqrt(grads.squared_norm());
  if (norm > max_norm) grads.scale(max_norm / norm);
  return norm;
}

double LrSchedule::at(int epoch) const {
  if (epoch < 0) throw PreconditionError("epoch must be >= 0");
  double factor = 1.0 - decay_step * static_cast<double>(epoch / decay_every);
  return initial * std::max(factor, floor_fraction);
}

double lr_schedule(int epoch, const LrSchedule& schedule) { return schedule.at(epoch); }

// --- Gradient checking ------------------------------------------------------

GradCheckResult grad_check_report(const Objective& objective, const ParameterSet& params, double eps,
                                  const std::function<bool(std::string_view)>& select) {
  if (!(eps > 0.0)) throw PreconditionError("grad_check: eps must be > 0");
  ParameterSet analytic = params.zeros_like();
  double base = objective(params, &analytic);
  if (!std::isfinite(base)) throw PreconditionError("grad_check: non-finite loss");

  GradCheckResult result;
  ParameterSet probe = params;
  for (std::size_t k = 0; k < probe.size(); ++k) {
    if (select && !select(probe.name(k))) continue;
    Matrix& m = probe[k];
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + eps;
      double plus = objective(probe, nullptr);
      m.data()[i] = saved - eps;
      double minus = objective(probe, nullptr);
      m.data()[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus))
        throw PreconditionError("grad_check: non-finite loss");
      double numeric = (plus - minus) / (2.0 * eps);
      double a = analytic[k].data()[i];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      double rel = std::abs(a - numeric) / denom;
      if (rel > result.max_relative_error || result.worst_index < 0) {
        result.max_relative_error = rel;
        result.worst_parameter = probe.name(k);
        result.worst_index = i;
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

double grad_check(const Objective& objective, const ParameterSet& params, double eps) {
  return grad_check_report(objective, params, eps).max_relative_error;
}

}  // namespace ltmn
