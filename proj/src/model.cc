#include "rifair/model.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace rifair {
namespace {

using nlohmann::json;

Eigen::VectorXd softmax(const Eigen::VectorXd& z) {
  const double top = z.maxCoeff();
  Eigen::VectorXd e = (z.array() - top).exp();
  return e / e.sum();
}

bool all_finite(const MlpParams& p) {
  for (const auto& w : p.weights) {
    if (!w.allFinite()) return false;
  }
  for (const auto& b : p.biases) {
    if (!b.allFinite()) return false;
  }
  return true;
}

}  // namespace

Prediction make_prediction(std::vector<double> probs) {
  Prediction p;
  p.probs = std::move(probs);
  const auto top = std::max_element(p.probs.begin(), p.probs.end());
  p.label = static_cast<int>(top - p.probs.begin());
  double runner_up = 0.0;
  for (std::size_t k = 0; k < p.probs.size(); ++k) {
    if (static_cast<int>(k) != p.label) runner_up = std::max(runner_up, p.probs[k]);
  }
  p.margin = *top - runner_up;
  return p;
}

double cross_entropy(const Prediction& pred, int target) {
  return -std::log(std::max(pred.probs.at(static_cast<std::size_t>(target)), kProbClip));
}

int predict_label(const Prediction& pred, double tau_dec) {
  if (pred.probs.size() != 2) throw std::invalid_argument("predict_label needs a binary task");
  return pred.probs[1] >= tau_dec ? 1 : 0;
}

Mlp::Mlp(MlpParams params) : params_(std::move(params)) {
  const auto& d = params_.layer_dims;
  if (d.size() < 2) throw std::invalid_argument("an MLP needs at least input and output dims");
  if (params_.weights.size() != d.size() - 1 || params_.biases.size() != d.size() - 1) {
    throw std::invalid_argument("layer count does not match layer_dims");
  }
  for (std::size_t k = 0; k + 1 < d.size(); ++k) {
    if (d[k] <= 0 || d[k + 1] <= 0 || params_.weights[k].rows() != d[k + 1] ||
        params_.weights[k].cols() != d[k] || params_.biases[k].size() != d[k + 1]) {
      throw std::invalid_argument("layer " + std::to_string(k) + " dimensions do not chain");
    }
  }
  if (d.back() < 2) throw std::invalid_argument("output layer needs at least two classes");
  if (!all_finite(params_)) throw NumericAbort("MLP parameters contain non-finite values");
}

Mlp Mlp::zeros(std::vector<int> layer_dims) {
  MlpParams p;
  p.layer_dims = std::move(layer_dims);
  for (std::size_t k = 0; k + 1 < p.layer_dims.size(); ++k) {
    p.weights.push_back(Eigen::MatrixXd::Zero(p.layer_dims[k + 1], p.layer_dims[k]));
    p.biases.push_back(Eigen::VectorXd::Zero(p.layer_dims[k + 1]));
  }
  return Mlp(std::move(p));
}

Mlp Mlp::glorot(std::vector<int> layer_dims, std::uint64_t seed) {
  MlpParams p;
  p.layer_dims = std::move(layer_dims);
  p.seed = seed;
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k + 1 < p.layer_dims.size(); ++k) {
    const int fan_in = p.layer_dims[k];
    const int fan_out = p.layer_dims[k + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r) {
      for (int c = 0; c < fan_in; ++c) w(r, c) = u(rng);
    }
    p.weights.push_back(std::move(w));
    p.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return Mlp(std::move(p));
}

std::size_t Mlp::input_dim() const { return static_cast<std::size_t>(params_.layer_dims.front()); }
std::size_t Mlp::num_classes() const { return static_cast<std::size_t>(params_.layer_dims.back()); }

void Mlp::check_input(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != input_dim()) {
    throw std::invalid_argument("input has dimension " + std::to_string(x.size()) + ", model expects " +
                                std::to_string(input_dim()));
  }
}

Eigen::VectorXd Mlp::logits(const Eigen::VectorXd& x, std::vector<Eigen::VectorXd>* pre) const {
  Eigen::VectorXd a = x;
  const std::size_t layers = params_.weights.size();
  for (std::size_t k = 0; k < layers; ++k) {
    Eigen::VectorXd z = params_.weights[k] * a + params_.biases[k];
    if (k + 1 == layers) return z;
    if (pre) pre->push_back(z);
    a = z.cwiseMax(0.0);
  }
  return a;
}

Prediction Mlp::forward(const Eigen::VectorXd& x) const {
  check_input(x);
  const Eigen::VectorXd p = softmax(logits(x, nullptr));
  return make_prediction(std::vector<double>(p.data(), p.data() + p.size()));
}

std::vector<Eigen::VectorXd> Mlp::pre_activations(const Eigen::VectorXd& x) const {
  check_input(x);
  std::vector<Eigen::VectorXd> pre;
  logits(x, &pre);
  return pre;
}

Eigen::VectorXd Mlp::input_gradient(const Eigen::VectorXd& x, int target) const {
  check_input(x);
  if (target < 0 || static_cast<std::size_t>(target) >= num_classes()) {
    throw std::invalid_argument("target class out of range");
  }
  std::vector<Eigen::VectorXd> pre;
  const Eigen::VectorXd p = softmax(logits(x, &pre));
  // The clipped loss is flat where p_target < kProbClip.
  if (p[target] < kProbClip) return Eigen::VectorXd::Zero(x.size());
  Eigen::VectorXd delta = p;
  delta[target] -= 1.0;
  for (std::size_t k = params_.weights.size(); k-- > 0;) {
    Eigen::VectorXd back = params_.weights[k].transpose() * delta;
    if (k == 0) return back;
    // ReLU derivative, taking 0 at the kink.
    delta = back.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
  }
  return delta;
}

json Mlp::to_json() const {
  json weights = json::array();
  json biases = json::array();
  for (std::size_t k = 0; k < params_.weights.size(); ++k) {
    const auto& w = params_.weights[k];
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index c = 0; c < w.cols(); ++c) flat.push_back(w(r, c));
    }
    weights.push_back(flat);
    biases.push_back(std::vector<double>(params_.biases[k].data(),
                                         params_.biases[k].data() + params_.biases[k].size()));
  }
  return json{{"layer_dims", params_.layer_dims},
              {"weights", weights},
              {"biases", biases},
              {"seed", params_.seed},
              {"schema_hash", params_.schema_hash}};
}

Mlp Mlp::from_json(const json& j) {
  MlpParams p;
  try {
    p.layer_dims = j.at("layer_dims").get<std::vector<int>>();
    p.seed = j.value("seed", std::uint64_t{0});
    p.schema_hash = j.value("schema_hash", std::string{});
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (weights.size() + 1 != p.layer_dims.size() || biases.size() + 1 != p.layer_dims.size()) {
      throw std::invalid_argument("checkpoint layer count does not match layer_dims");
    }
    for (std::size_t k = 0; k + 1 < p.layer_dims.size(); ++k) {
      const int rows = p.layer_dims[k + 1];
      const int cols = p.layer_dims[k];
      const auto flat = weights[k].get<std::vector<double>>();
      const auto b = biases[k].get<std::vector<double>>();
      if (flat.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) ||
          b.size() != static_cast<std::size_t>(rows)) {
        throw std::invalid_argument("checkpoint layer " + std::to_string(k) + " has the wrong size");
      }
      Eigen::MatrixXd w(rows, cols);
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) w(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
      }
      p.weights.push_back(std::move(w));
      p.biases.push_back(Eigen::Map<const Eigen::VectorXd>(b.data(), rows));
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("malformed checkpoint: ") + e.what());
  }
  return Mlp(std::move(p));
}

json TrainConfig::to_json() const {
  return json{{"hidden", hidden},     {"epochs", epochs}, {"batch_size", batch_size},
              {"learning_rate", learning_rate}, {"l2", l2},        {"seed", seed}};
}

TrainResult train(const std::vector<Instance>& train_set, const Encoder& encoder, const TrainConfig& config) {
  if (train_set.empty()) throw std::invalid_argument("training set is empty");
  if (config.epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(config.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (config.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");

  std::vector<int> dims{static_cast<int>(encoder.dim())};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(static_cast<int>(encoder.schema().num_classes()));
  Mlp model = Mlp::glorot(dims, config.seed);
  MlpParams& p = model.mutable_params();
  p.schema_hash = encoder.schema().hash();

  const auto n = static_cast<Eigen::Index>(train_set.size());
  Eigen::MatrixXd inputs(static_cast<Eigen::Index>(encoder.dim()), n);
  std::vector<int> labels(train_set.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    inputs.col(i) = encoder.encode(train_set[static_cast<std::size_t>(i)]).dense;
    labels[static_cast<std::size_t>(i)] = train_set[static_cast<std::size_t>(i)].label;
  }

  std::mt19937_64 rng(config.seed ^ 0x5eed5eed5eedULL);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const std::size_t layers = p.weights.size();
  const int classes = dims.back();

  TrainResult result{model, {}};
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += config.batch_size) {
      const Eigen::Index b = std::min<Eigen::Index>(config.batch_size, n - start);
      Eigen::MatrixXd x(inputs.rows(), b);
      for (Eigen::Index j = 0; j < b; ++j) x.col(j) = inputs.col(order[static_cast<std::size_t>(start + j)]);

      std::vector<Eigen::MatrixXd> acts{x};
      std::vector<Eigen::MatrixXd> pre;
      for (std::size_t k = 0; k < layers; ++k) {
        Eigen::MatrixXd z = (p.weights[k] * acts.back()).colwise() + p.biases[k];
        if (k + 1 == layers) {
          acts.push_back(std::move(z));
        } else {
          pre.push_back(z);
          acts.push_back(z.cwiseMax(0.0));
        }
      }
      Eigen::MatrixXd& out = acts.back();
      Eigen::MatrixXd delta(classes, b);
      for (Eigen::Index j = 0; j < b; ++j) {
        const Eigen::VectorXd prob = softmax(out.col(j));
        const int y = labels[static_cast<std::size_t>(order[static_cast<std::size_t>(start + j)])];
        loss_sum += -std::log(std::max(prob[y], kProbClip));
        delta.col(j) = prob;
        delta(y, j) -= 1.0;
      }
      delta /= static_cast<double>(b);
      for (std::size_t k = layers; k-- > 0;) {
        const Eigen::MatrixXd grad_w = delta * acts[k].transpose() + config.l2 * p.weights[k];
        const Eigen::VectorXd grad_b = delta.rowwise().sum();
        if (k > 0) {
          Eigen::MatrixXd back = p.weights[k].transpose() * delta;
          delta = back.cwiseProduct((pre[k - 1].array() > 0.0).cast<double>().matrix());
        }
        p.weights[k] -= config.learning_rate * grad_w;
        p.biases[k] -= config.learning_rate * grad_b;
      }
    }
    double l2_term = 0.0;
    for (const auto& w : p.weights) l2_term += 0.5 * config.l2 * w.squaredNorm();
    const double epoch_loss = loss_sum / static_cast<double>(n) + l2_term;
    if (!std::isfinite(epoch_loss) || !all_finite(p)) {
      throw NumericAbort("training diverged at epoch " + std::to_string(epoch + 1) +
                         " (loss=" + std::to_string(epoch_loss) + ", lr=" + std::to_string(config.learning_rate) +
                         ")");
    }
    result.epoch_loss.push_back(epoch_loss);
  }
  result.model = std::move(model);
  return result;
}

double accuracy(const Classifier& model, const Encoder& encoder, const std::vector<Instance>& data, double tau_dec) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& inst : data) {
    const Prediction pred = model.forward(encoder.encode(inst).dense);
    const int label = pred.probs.size() == 2 ? predict_label(pred, tau_dec) : pred.label;
    if (label == inst.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace rifair
