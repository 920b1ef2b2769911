#pragma once

// Numeric substrate shared by every model: named parameter sets, the gated
// LSTM cell with its hand-written backward pass, temperature softmax,
// cross-entropy, Adam and finite-difference gradient checking.

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "ltmn/error.h"

namespace ltmn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Builds a matrix from external row-major data, rejecting NaN and infinity.
Matrix checked_matrix(Eigen::Index rows, Eigen::Index cols, std::span<const double> row_major);
void require_finite(const Matrix& m, std::string_view what);

/// Uniform double in [0, 1) from the top 53 bits of one draw. Independent of
/// the standard library's distribution implementations.
double uniform01(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
/// Index drawn from unnormalized non-negative weights.
int sample_categorical(std::span<const double> weights, Rng& rng);
void fill_uniform(Matrix& m, Rng& rng, double scale);

/// Ordered, named collection of tensors. Models address their tensors by the
/// slot index returned from add(); gradients live in a set of the same shape.
class ParameterSet {
 public:
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const noexcept { return values_.size(); }
  Matrix& operator[](std::size_t slot) { return values_[slot]; }
  const Matrix& operator[](std::size_t slot) const { return values_[slot]; }
  const std::string& name(std::size_t slot) const { return names_[slot]; }
  std::optional<std::size_t> find(std::string_view name) const;
  Matrix& at(std::string_view name);
  const Matrix& at(std::string_view name) const;

  ParameterSet zeros_like() const;
  void set_zero();
  std::size_t scalar_count() const;
  double squared_norm() const;
  void scale(double factor);
  void add_scaled(const ParameterSet& other, double factor);
  bool same_shapes(const ParameterSet& other) const;

  /// Bitwise equality of names, shapes and values.
  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
};

// ---------------------------------------------------------------------------
// LSTM
// ---------------------------------------------------------------------------

/// Gate rows are stacked in the order input, forget, output, candidate:
///   z = W x + U h_prev + b
///   i, f, o = sigmoid(z_i), sigmoid(z_f), sigmoid(z_o);  g = tanh(z_g)
///   c = f * c_prev + i * g;  h = o * tanh(c)
struct LstmParams {
  Matrix input_weights;      // 4H x D
  Matrix recurrent_weights;  // 4H x H
  Matrix bias;               // 4H x 1

  static LstmParams zeros(Eigen::Index input_size, Eigen::Index hidden_size);
  Eigen::Index input_size() const { return input_weights.cols(); }
  Eigen::Index hidden_size() const { return recurrent_weights.cols(); }
};

struct LstmView {
  const Matrix& input_weights;
  const Matrix& recurrent_weights;
  const Matrix& bias;
};

struct LstmGrads {
  Matrix& input_weights;
  Matrix& recurrent_weights;
  Matrix& bias;
};

/// Slot indices of one LSTM's tensors inside a ParameterSet.
struct LstmSlots {
  std::size_t input_weights = 0;
  std::size_t recurrent_weights = 0;
  std::size_t bias = 0;

  LstmView view(const ParameterSet& p) const {
    return {p[input_weights], p[recurrent_weights], p[bias]};
  }
  LstmGrads grads(ParameterSet& g) const {
    return {g[input_weights], g[recurrent_weights], g[bias]};
  }
};

/// Registers `<prefix>.W`, `<prefix>.U`, `<prefix>.b`, uniform in [-scale, scale]
/// with the forget-gate bias set to `forget_bias`.
LstmSlots add_lstm(ParameterSet& params, const std::string& prefix, Eigen::Index input_size,
                   Eigen::Index hidden_size, Rng& rng, double scale, double forget_bias = 1.0);

struct LstmState {
  Vector h;
  Vector c;
};

/// Everything the backward pass needs from one forward step.
struct LstmStepCache {
  Vector x, h_prev, c_prev;
  Vector i, f, o, g;
  Vector c, tanh_c, h;
};

LstmStepCache lstm_forward(const LstmView& p, const Vector& x, const Vector& h_prev,
                           const Vector& c_prev);

LstmState lstm_step(const LstmParams& p, const Vector& x, const Vector& h_prev,
                    const Vector& c_prev);

struct LstmInputGrads {
  Vector dx;
  Vector dh_prev;
  Vector dc_prev;
};

/// Accumulates parameter gradients into `grads` given dL/dh and dL/dc flowing
/// into this step's outputs.
LstmInputGrads lstm_backward(const LstmView& p, const LstmStepCache& cache, const Vector& dh,
                             const Vector& dc, LstmGrads grads);

// ---------------------------------------------------------------------------
// Output layers
// ---------------------------------------------------------------------------

/// softmax(logits / tau), max-subtracted.
Vector softmax_with_temperature(const Vector& logits, double tau);
Vector softmax(const Vector& logits);

inline constexpr double kProbabilityFloor = 1e-12;

/// -log p[target], with p floored at kProbabilityFloor.
double cross_entropy(const Vector& probs, int target);
double entropy(const Vector& probs);
int argmax(const Vector& v);

// ---------------------------------------------------------------------------
// Optimization
// ---------------------------------------------------------------------------

struct AdamState {
  ParameterSet first_moment;
  ParameterSet second_moment;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ParameterSet& params);
};

/// One bias-corrected Adam update.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state, double lr);

/// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
/// norm before clipping.
double clip_grad_norm(ParameterSet& grads, double max_norm);

inline constexpr double kGradClipNorm = 5.0;

/// Stepwise learning-rate decay: lr = initial * max(1 - step * floor(epoch / every), floor).
struct LrSchedule {
  double initial = 1e-4;
  int decay_every = 10;
  double decay_step = 0.1;
  double floor_fraction = 0.1;

  double at(int epoch) const;
};

double lr_schedule(int epoch, const LrSchedule& schedule = {});

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

/// A differentiable scalar objective. When `grads` is non-null the analytic
/// gradient is accumulated into it.
using Objective = std::function<double(const ParameterSet& params, ParameterSet* grads)>;

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Compares the analytic gradient against central differences
/// (f(p + eps) - f(p - eps)) / 2eps for every scalar parameter. Relative
/// error is |a - n| / max(|a|, |n|, 1e-8).
/// `select`, when given, restricts the check to parameters whose name it accepts.
GradCheckResult grad_check_report(const Objective& objective, const ParameterSet& params,
                                  double eps,
                                  const std::function<bool(std::string_view)>& select = {});
double grad_check(const Objective& objective, const ParameterSet& params, double eps);

}  // namespace ltmn
