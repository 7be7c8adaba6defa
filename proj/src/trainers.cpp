#include "bucketperm/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bucketperm/error.hpp"
#include "bucketperm/kernels.hpp"

namespace bucketperm {

std::string_view to_string(TrainerKind kind) {
  switch (kind) {
    case TrainerKind::nearest_centroid: return "nearest_centroid";
    case TrainerKind::logistic_regression: return "logistic_regression";
    case TrainerKind::mlp: return "mlp";
  }
  return "unknown";
}

TrainerKind trainer_kind_from_string(std::string_view name) {
  if (name == "nearest_centroid") return TrainerKind::nearest_centroid;
  if (name == "logistic_regression") return TrainerKind::logistic_regression;
  if (name == "mlp") return TrainerKind::mlp;
  throw Error(ErrorCode::InvalidSpec, "unknown trainer kind: " + std::string(name));
}

void TrainerSpec::validate() const {
  if (epochs < 1) throw Error(ErrorCode::InvalidSpec, "epochs must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::InvalidSpec, "learning_rate must be > 0");
  }
  if (batch_size < 1) throw Error(ErrorCode::InvalidSpec, "batch_size must be >= 1");
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::InvalidSpec, "weight_decay must be >= 0");
  for (std::size_t h : hidden_dims) {
    if (h < 1) throw Error(ErrorCode::InvalidSpec, "hidden layer sizes must be >= 1");
  }
}

// ---------------------------------------------------------------------------
// Network

Network::Network(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t classes,
                 Rng& rng) {
  std::size_t fan_in = inputs;
  auto add_layer = [&](std::size_t fan_out) {
    DenseLayer layer{Matrix(fan_out, fan_in), std::vector<double>(fan_out, 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : layer.weights.values()) w = rng.uniform(-limit, limit);
    layers_.push_back(std::move(layer));
    fan_in = fan_out;
  };
  for (std::size_t h : hidden) add_layer(h);
  add_layer(classes);
}

std::size_t Network::num_inputs() const { return layers_.empty() ? 0 : layers_.front().weights.cols(); }
std::size_t Network::num_outputs() const { return layers_.empty() ? 0 : layers_.back().weights.rows(); }

namespace {

void dense_forward(const DenseLayer& layer, std::span<const double> in, std::vector<double>& out) {
  const std::size_t n_out = layer.weights.rows();
  out.resize(n_out);
  for (std::size_t j = 0; j < n_out; ++j) out[j] = layer.bias[j] + kernels::dot(layer.weights.row(j), in);
}

// Returns log-sum-exp; probs receives the softmax.
double softmax(std::span<const double> logits, std::vector<double>& probs) {
  const double top = *std::max_element(logits.begin(), logits.end());
  probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - top);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
  return top + std::log(sum);
}

}  // namespace

void Network::logits(std::span<const double> x, std::vector<double>& out) const {
  std::vector<double> a(x.begin(), x.end());
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    dense_forward(layers_[l], a, out);
    if (l + 1 < layers_.size()) {
      kernels::relu(out);
      a.swap(out);
    }
  }
}

double Network::loss_and_gradient(const Matrix& x, std::span<const int> labels,
                                  std::span<const std::size_t> rows,
                                  std::span<const double> class_weights, double weight_decay,
                                  std::vector<DenseLayer>* grads) const {
  const std::size_t depth = layers_.size();
  if (grads) {
    grads->resize(depth);
    for (std::size_t l = 0; l < depth; ++l) {
      auto& g = (*grads)[l];
      g.weights = Matrix(layers_[l].weights.rows(), layers_[l].weights.cols());
      g.bias.assign(layers_[l].bias.size(), 0.0);
    }
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());

  // acts[0] is the input copy, acts[l + 1] the post-activation output of layer l.
  std::vector<std::vector<double>> acts(depth + 1);
  std::vector<double> probs, delta, delta_prev;
  double loss = 0.0;

  for (std::size_t r : rows) {
    auto xr = x.row(r);
    acts[0].assign(xr.begin(), xr.end());
    for (std::size_t l = 0; l < depth; ++l) {
      dense_forward(layers_[l], acts[l], acts[l + 1]);
      if (l + 1 < depth) kernels::relu(acts[l + 1]);
    }
    const auto y = static_cast<std::size_t>(labels[r]);
    const double w = class_weights[y];
    const double lse = softmax(acts[depth], probs);
    loss += w * (lse - acts[depth][y]) * inv_n;
    if (!grads) continue;

    delta = probs;
    delta[y] -= 1.0;
    for (double& d : delta) d *= w * inv_n;
    for (std::size_t l = depth; l-- > 0;) {
      auto& g = (*grads)[l];
      const auto& in = acts[l];
      for (std::size_t j = 0; j < delta.size(); ++j) {
        if (delta[j] == 0.0) continue;
        kernels::axpy(delta[j], in, g.weights.row(j));
        g.bias[j] += delta[j];
      }
      if (l == 0) break;
      delta_prev.assign(in.size(), 0.0);
      for (std::size_t j = 0; j < delta.size(); ++j) {
        if (delta[j] != 0.0) kernels::axpy(delta[j], layers_[l].weights.row(j), delta_prev);
      }
      for (std::size_t i = 0; i < in.size(); ++i) {
        if (!(in[i] > 0.0)) delta_prev[i] = 0.0;
      }
      delta.swap(delta_prev);
    }
  }

  if (weight_decay > 0.0) {
    for (std::size_t l = 0; l < depth; ++l) {
      auto wv = layers_[l].weights.values();
      loss += 0.5 * weight_decay * kernels::dot(wv, wv);
      if (grads) kernels::axpy(weight_decay, wv, (*grads)[l].weights.values());
    }
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Standardizer

Standardizer Standardizer::fit(const Matrix& features) {
  const std::size_t n = features.rows(), d = features.cols();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.inv_scale.assign(d, 1.0);
  if (n == 0) return s;
  for (std::size_t r = 0; r < n; ++r) kernels::axpy(1.0, features.row(r), s.mean);
  for (double& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    auto row = features.row(r);
    for (std::size_t c = 0; c < d; ++c) {
      const double dv = row[c] - s.mean[c];
      var[c] += dv * dv;
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::sqrt(var[c] / static_cast<double>(n));
    s.inv_scale[c] = sd > 1e-12 ? 1.0 / sd : 1.0;
  }
  return s;
}

Matrix Standardizer::apply(const Matrix& features) const {
  Matrix out(features.rows(), features.cols());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    auto in = features.row(r);
    auto o = out.row(r);
    for (std::size_t c = 0; c < in.size(); ++c) o[c] = (in[c] - mean[c]) * inv_scale[c];
  }
  return out;
}

// ---------------------------------------------------------------------------
// TrainedModel

int TrainedModel::predict(std::span<const double> x) const {
  std::vector<double> z(x.begin(), x.end());
  if (!scaler.empty()) {
    for (std::size_t c = 0; c < z.size(); ++c) z[c] = (z[c] - scaler.mean[c]) * scaler.inv_scale[c];
  }
  auto usable = [&](int k) { return class_present.empty() || class_present[static_cast<std::size_t>(k)]; };
  int best = -1;
  if (kind == TrainerKind::nearest_centroid) {
    double best_d = 0.0;
    for (int k = 0; k < num_classes; ++k) {
      if (!usable(k)) continue;
      const double d = kernels::squared_distance(centroids.row(static_cast<std::size_t>(k)), z);
      if (best < 0 || d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best + 1;
  }
  std::vector<double> out;
  network.logits(z, out);
  for (int k = 0; k < num_classes; ++k) {
    if (usable(k) && (best < 0 || out[static_cast<std::size_t>(k)] > out[static_cast<std::size_t>(best)])) best = k;
  }
  return best + 1;
}

nlohmann::json TrainedModel::to_json() const {
  nlohmann::json j{{"kind", to_string(kind)},
                   {"num_features", num_features},
                   {"num_classes", num_classes},
                   {"init", kInitScheme},
                   {"epoch_loss", epoch_loss}};
  if (!scaler.empty()) j["scaler"] = {{"mean", scaler.mean}, {"inv_scale", scaler.inv_scale}};
  if (kind == TrainerKind::nearest_centroid) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t k = 0; k < centroids.rows(); ++k) {
      auto r = centroids.row(k);
      rows.push_back(std::vector<double>(r.begin(), r.end()));
    }
    j["centroids"] = rows;
  } else {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : network.layers()) {
      auto w = layer.weights.values();
      layers.push_back({{"rows", layer.weights.rows()},
                        {"cols", layer.weights.cols()},
                        {"weights", std::vector<double>(w.begin(), w.end())},
                        {"bias", layer.bias}});
    }
    j["layers"] = layers;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Training

std::vector<double> class_weights(std::span<const int> labels, int num_classes, bool balanced) {
  std::vector<double> weights(static_cast<std::size_t>(num_classes), 1.0);
  if (!balanced) return weights;
  std::vector<std::size_t> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts[static_cast<std::size_t>(y - 1)];
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (counts[k] > 0) {
      weights[k] = static_cast<double>(labels.size()) /
                   (static_cast<double>(num_classes) * static_cast<double>(counts[k]));
    }
  }
  return weights;
}

namespace {

std::vector<char> check_labels(std::span<const int> labels, int num_classes, std::size_t rows,
                               bool allow_absent) {
  if (labels.size() != rows) {
    throw Error(ErrorCode::DimensionMismatch, std::to_string(labels.size()) + " labels for " +
                                                  std::to_string(rows) + " rows");
  }
  std::vector<char> seen(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) {
    if (y < 1 || y > num_classes) throw Error(ErrorCode::InvalidSpec, "label out of range");
    seen[static_cast<std::size_t>(y - 1)] = 1;
  }
  bool all = true;
  for (int k = 0; k < num_classes; ++k) {
    if (seen[static_cast<std::size_t>(k)]) continue;
    if (!allow_absent) {
      throw Error(ErrorCode::ClassAbsent, "class " + std::to_string(k + 1) + " has no training example");
    }
    all = false;
  }
  if (labels.empty()) throw Error(ErrorCode::ClassAbsent, "no training examples");
  return all ? std::vector<char>{} : seen;
}

void check_finite(const Matrix& features) {
  for (double v : features.values()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidSpec, "non-finite training feature");
  }
}

void fit_centroids(TrainedModel& model, const Matrix& x, std::span<const int> labels) {
  const auto k = static_cast<std::size_t>(model.num_classes);
  model.centroids = Matrix(k, x.cols());
  std::vector<std::size_t> counts(k, 0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto c = static_cast<std::size_t>(labels[r] - 1);
    kernels::axpy(1.0, x.row(r), model.centroids.row(c));
    ++counts[c];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (counts[c] == 0) continue;
    const double inv = 1.0 / static_cast<double>(counts[c]);
    for (double& v : model.centroids.row(c)) v *= inv;
  }
}

void fit_network(TrainedModel& model, const TrainerSpec& spec, const Matrix& x,
                 std::span<const int> labels, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> hidden;
  if (spec.kind == TrainerKind::mlp) hidden = spec.hidden_dims;
  model.network = Network(x.cols(), hidden, static_cast<std::size_t>(model.num_classes), rng);

  std::vector<int> zero_based(labels.begin(), labels.end());
  for (int& y : zero_based) --y;
  const auto weights = class_weights(labels, model.num_classes, spec.class_balanced_loss);

  std::vector<std::size_t> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  std::vector<DenseLayer> grads;
  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += spec.batch_size) {
      const std::size_t stop = std::min(order.size(), start + spec.batch_size);
      std::span<const std::size_t> batch(order.data() + start, stop - start);
      const double loss = model.network.loss_and_gradient(x, zero_based, batch, weights,
                                                          spec.weight_decay, &grads);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::DivergedLoss, "epoch " + std::to_string(epoch + 1));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      auto& layers = model.network.layers();
      for (std::size_t l = 0; l < layers.size(); ++l) {
        kernels::axpy(-spec.learning_rate, grads[l].weights.values(), layers[l].weights.values());
        kernels::axpy(-spec.learning_rate, grads[l].bias, layers[l].bias);
      }
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorCode::DivergedLoss, "epoch " + std::to_string(epoch + 1));
    }
    model.epoch_loss.push_back(epoch_loss);
  }
  for (const auto& layer : model.network.layers()) {
    for (double w : layer.weights.values()) {
      if (!std::isfinite(w)) throw Error(ErrorCode::DivergedLoss, "non-finite parameter");
    }
  }
}

}  // namespace

TrainedModel train(const TrainerSpec& spec, const Matrix& features, std::span<const int> labels,
                   int num_classes, std::uint64_t seed, bool allow_absent_classes) {
  spec.validate();
  if (num_classes < 2) throw Error(ErrorCode::InvalidSpec, "need at least two classes");
  auto present = check_labels(labels, num_classes, features.rows(), allow_absent_classes);
  check_finite(features);

  TrainedModel model;
  model.class_present = std::move(present);
  model.kind = spec.kind;
  model.num_features = features.cols();
  model.num_classes = num_classes;

  const Matrix* x = &features;
  Matrix scaled;
  if (spec.standardize) {
    model.scaler = Standardizer::fit(features);
    scaled = model.scaler.apply(features);
    x = &scaled;
  }
  if (spec.kind == TrainerKind::nearest_centroid) {
    fit_centroids(model, *x, labels);
  } else {
    fit_network(model, spec, *x, labels, seed);
  }
  return model;
}

double evaluate_accuracy(const TrainedModel& model, const Matrix& features,
                         std::span<const int> labels) {
  if (features.rows() == 0) throw Error(ErrorCode::EmptyTestSet, "no evaluation rows");
  if (labels.size() != features.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "label count differs from row count");
  }
  if (features.cols() != model.num_features) {
    throw Error(ErrorCode::DimensionMismatch, "feature count differs from the trained model");
  }
  std::size_t correct = 0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    if (model.predict(features.row(r)) == labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(features.rows());
}

PreparedSplit PreparedSplit::build(const BucketedDataset& ds, const Matrix& features,
                                   const Split& split) {
  if (split.test.empty()) throw Error(ErrorCode::EmptyTestSet, "split has no test units");
  PreparedSplit p;
  p.train_features = features.gather_rows(split.train);
  p.test_features = features.gather_rows(split.test);
  for (std::size_t i : split.train) p.train_bucket.push_back(ds.bucket_of[i]);
  for (std::size_t i : split.test) p.test_bucket.push_back(ds.bucket_of[i]);
  p.num_classes = ds.num_classes();
  return p;
}

double run_prepared(const PreparedSplit& p, const LabelAssignment& assignment,
                    const TrainerSpec& trainer, std::uint64_t seed) {
  auto relabel = [&](const std::vector<std::size_t>& buckets) {
    std::vector<int> y(buckets.size());
    for (std::size_t i = 0; i < buckets.size(); ++i) y[i] = assignment.labels[buckets[i]];
    return y;
  };
  const auto train_y = relabel(p.train_bucket);
  const auto test_y = relabel(p.test_bucket);
  const auto model = train(trainer, p.train_features, train_y, p.num_classes, seed, true);
  return evaluate_accuracy(model, p.test_features, test_y);
}

double run_single(const BucketedDataset& ds, const LabelAssignment& assignment,
                  const TrainerSpec& trainer, const Split& split, std::uint64_t seed) {
  if (assignment.labels.size() != ds.num_buckets()) {
    throw Error(ErrorCode::DimensionMismatch, "assignment length differs from bucket count");
  }
  return run_prepared(PreparedSplit::build(ds, ds.features, split), assignment, trainer, seed);
}

}  // namespace bucketperm
