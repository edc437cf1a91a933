#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "rifair/dataset.h"

namespace rifair {

// Training diverged (NaN/inf loss or parameters).
class NumericAbort : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Probability floor applied before taking logs in the cross-entropy.
inline constexpr double kProbClip = 1e-12;

struct Prediction {
  std::vector<double> probs;
  int label = 0;        // argmax
  double margin = 0.0;  // probs[label] minus the runner-up

  // Positive-class score f(v) of a binary task.
  double positive() const { return probs.at(1); }

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

Prediction make_prediction(std::vector<double> probs);

// -log(max(p_target, kProbClip)).
double cross_entropy(const Prediction& pred, int target);

// 1 iff the positive-class probability is >= tau_dec. Binary tasks only.
int predict_label(const Prediction& pred, double tau_dec);

// What the attacks need from a classifier.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Prediction forward(const Eigen::VectorXd& x) const = 0;
  // Gradient of cross_entropy(forward(x), target) with respect to x.
  virtual Eigen::VectorXd input_gradient(const Eigen::VectorXd& x, int target) const = 0;
};

struct MlpParams {
  std::vector<int> layer_dims;            // input, hidden..., classes
  std::vector<Eigen::MatrixXd> weights;   // layer k: dims[k+1] x dims[k]
  std::vector<Eigen::VectorXd> biases;    // layer k: dims[k+1]
  std::uint64_t seed = 0;
  std::string schema_hash;
};

// ReLU hidden layers, softmax output.
class Mlp final : public Classifier {
 public:
  explicit Mlp(MlpParams params);

  static Mlp zeros(std::vector<int> layer_dims);
  // Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<int> layer_dims, std::uint64_t seed);

  std::size_t input_dim() const override;
  std::size_t num_classes() const override;
  Prediction forward(const Eigen::VectorXd& x) const override;
  Eigen::VectorXd input_gradient(const Eigen::VectorXd& x, int target) const override;

  // Hidden-layer pre-activations; used to detect ReLU kinks.
  std::vector<Eigen::VectorXd> pre_activations(const Eigen::VectorXd& x) const;

  const MlpParams& params() const { return params_; }
  MlpParams& mutable_params() { return params_; }

  nlohmann::json to_json() const;
  static Mlp from_json(const nlohmann::json& j);

 private:
  Eigen::VectorXd logits(const Eigen::VectorXd& x, std::vector<Eigen::VectorXd>* pre) const;
  void check_input(const Eigen::VectorXd& x) const;

  MlpParams params_;
};

struct TrainConfig {
  std::vector<int> hidden{64, 32};
  int epochs = 20;
  int batch_size = 32;
  double learning_rate = 0.01;
  double l2 = 1e-5;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
};

struct TrainResult {
  Mlp model;
  std::vector<double> epoch_loss;  // mean cross-entropy (+ l2 term) per epoch
};

// Mini-batch SGD on cross-entropy + l2. Seeded init and shuffling, so the
// same inputs give bit-identical parameters.
TrainResult train(const std::vector<Instance>& train_set, const Encoder& encoder, const TrainConfig& config);

double accuracy(const Classifier& model, const Encoder& encoder, const std::vector<Instance>& data,
                double tau_dec = 0.5);

}  // namespace rifair
