#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sidelobe/matrix.hpp"
#include "sidelobe/scenario.hpp"

namespace sidelobe {

/// Raised when a numeric computation leaves the finite range (diverging
/// training, degenerate fits the caller cannot recover from).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Layered tanh RNN with feedback of `order` previous states per layer.
struct RnnConfig {
  std::size_t n_layers = 1;
  std::size_t order = 1;
  std::vector<std::size_t> hidden_widths{2};
  std::size_t n_features = 9;
  /// Only the diagonal of each feedback matrix is trained. The per-channel
  /// line segment analysis requires this.
  bool diagonal_feedback = true;

  void validate() const;
  std::size_t width(std::size_t layer) const { return hidden_widths.at(layer); }
  std::size_t input_width(std::size_t layer) const {
    return layer == 0 ? n_features : hidden_widths.at(layer - 1);
  }
  std::string name() const;
};

/// The five configurations studied: one layer with order 1, 2 or 4, and two
/// or three first-order layers. Names are "<layers>L<order>", e.g. "2L1".
RnnConfig preset(std::string_view name, std::size_t width = 2, std::size_t n_features = 9);
std::vector<std::string> preset_names();

/// Affine map applied to every raw feature before the first layer.
struct InputScaling {
  double center = 0.0;
  double scale = 1.0;

  double apply(double x) const noexcept { return (x - center) / scale; }
};

struct RnnWeights {
  InputScaling scaling;
  std::vector<Matrix> input;                  ///< U_k, width_k x width_{k-1}
  std::vector<std::vector<Matrix>> feedback;  ///< W_{k,j}, j = 1..order
  std::vector<double> readout;                ///< over the last layer's state
  double bias = 0.0;
  /// +1 when larger scores mean fault on the training set, -1 otherwise.
  double polarity = 1.0;

  /// Zero weights with the shapes dictated by `cfg`.
  static RnnWeights zeros(const RnnConfig& cfg);
  bool all_finite() const;
  bool feedback_diagonal() const;
};

/// Carried recurrent state: layers[k][j] = h_k(n - 1 - j).
struct RecurrentState {
  std::vector<std::vector<std::vector<double>>> layers;
};

struct LayerTrace {
  Matrix input;  ///< a_k(n) = U_k x (scaled features or h_{k-1}(n))
  Matrix pre;    ///< a'_k(n), the argument of tanh
  Matrix state;  ///< h_k(n)
};

struct Trace {
  std::vector<LayerTrace> layers;
  std::vector<double> score;  ///< y(n) = readout . h_last(n) + bias

  std::size_t length() const noexcept { return score.size(); }
  /// The state that would be carried into a continuation of this input.
  RecurrentState final_state(std::size_t order) const;
};

/// Runs the network over `features` (rows are instants, raw units). With no
/// initial state, h(n - j) = 0 before the first instant.
Trace forward(const RnnWeights& weights, const RnnConfig& cfg, const Matrix& features,
              const RecurrentState* initial = nullptr);

/// Mean per-instant logistic loss with fault as the positive class.
double sequence_loss(const Trace& trace, std::span<const Status> labels);

/// Loss and its gradient by backpropagation through time. The gradient has
/// the same shape as `weights`; scaling and polarity entries are unused.
/// The initial state, when given, is treated as a constant.
struct LossGradient {
  double loss = 0.0;
  RnnWeights gradient;
};
LossGradient loss_gradient(const RnnWeights& weights, const RnnConfig& cfg, const Matrix& features,
                           std::span<const Status> labels, const RecurrentState* initial = nullptr);

struct TrainHyper {
  double learning_rate = 0.02;
  std::size_t epochs = 120;
  std::size_t batch = 8;
  std::uint64_t seed = 1;
  /// Elementwise bound on feedback weights; empty disables clipping.
  std::optional<double> weight_clip = 0.6;
  /// Elementwise bound on the first-layer input map; empty disables
  /// clipping.
  std::optional<double> input_clip;
};

struct TrainResult {
  RnnWeights weights;
  std::vector<double> train_loss;  ///< per epoch
  std::vector<double> val_loss;    ///< per epoch, stream mode
};

/// Adam on truncated BPTT: each epoch visits the training sequences in a
/// seeded shuffled order, carrying the recurrent state from one sequence to
/// the next without backpropagating across the boundary. Deterministic for
/// a fixed seed. Throws NumericError when the loss stops being finite and
/// std::invalid_argument on an empty training split.
TrainResult train(const RnnConfig& cfg, const Dataset& dataset, const TrainHyper& hyper);

/// Random initial weights (the starting point of `train`).
RnnWeights initialize(const RnnConfig& cfg, std::uint64_t seed);

struct Classification {
  std::vector<Status> labels;
  std::vector<double> scores;
};

/// Fault iff polarity * (y - threshold) > 0.
Classification classify(const Trace& trace, double threshold, double polarity = 1.0);

}  // namespace sidelobe
