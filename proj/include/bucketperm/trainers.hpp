#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bucketperm/assignment.hpp"
#include "bucketperm/dataset.hpp"
#include "bucketperm/matrix.hpp"
#include "bucketperm/rng.hpp"

namespace bucketperm {

enum class SplitProtocol { within_bucket_stratified, bucket_holdout };

std::string_view to_string(SplitProtocol protocol);
SplitProtocol split_protocol_from_string(std::string_view name);

struct SplitSpec {
  SplitProtocol protocol = SplitProtocol::within_bucket_stratified;
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;  // ascending unit indices
  std::vector<std::size_t> test;   // ascending unit indices

  bool operator==(const Split&) const = default;
};

// Within-bucket: every bucket contributes ceil(f * size) test units (at least
// one, at most size - 1). Bucket holdout: whole buckets, stratified by the
// observed labels so each side holds at least one bucket per class. Unit
// membership never depends on which labels the buckets carry at run time.
Split make_split(const BucketedDataset& dataset, const SplitSpec& spec);

enum class TrainerKind { nearest_centroid, logistic_regression, mlp };

std::string_view to_string(TrainerKind kind);
TrainerKind trainer_kind_from_string(std::string_view name);

struct TrainerSpec {
  TrainerKind kind = TrainerKind::mlp;
  std::vector<std::size_t> hidden_dims{64};  // mlp only
  int epochs = 5;
  double learning_rate = 0.05;
  std::size_t batch_size = 32;
  double weight_decay = 0.0;
  bool class_balanced_loss = false;
  // Per-feature z-scoring fitted on the training rows (label-free).
  bool standardize = true;

  void validate() const;
};

// Name of the weight initialisation scheme, recorded in reports.
inline constexpr std::string_view kInitScheme = "xavier_uniform";

struct DenseLayer {
  Matrix weights;  // outputs x inputs
  std::vector<double> bias;
};

// Softmax classifier with rectified-linear hidden layers. No hidden layers is
// multinomial logistic regression.
class Network {
 public:
  Network() = default;
  Network(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t classes, Rng& rng);

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::size_t num_inputs() const;
  std::size_t num_outputs() const;

  void logits(std::span<const double> x, std::vector<double>& out) const;

  // (1/|rows|) * sum_i w[y_i] * CE_i + (decay / 2) * sum ||W||^2, biases not
  // decayed. Labels are 0-based. When grads is non-null it is overwritten with
  // the gradient (same shapes as layers()).
  double loss_and_gradient(const Matrix& x, std::span<const int> labels,
                           std::span<const std::size_t> rows, std::span<const double> class_weights,
                           double weight_decay, std::vector<DenseLayer>* grads) const;

 private:
  std::vector<DenseLayer> layers_;
};

struct Standardizer {
  std::vector<double> mean;
  std::vector<double> inv_scale;

  static Standardizer fit(const Matrix& features);
  Matrix apply(const Matrix& features) const;
  bool empty() const { return mean.empty(); }
};

struct TrainedModel {
  TrainerKind kind = TrainerKind::mlp;
  std::size_t num_features = 0;
  int num_classes = 0;
  Standardizer scaler;
  Matrix centroids;  // nearest_centroid: K x D, in standardized coordinates
  Network network;   // logistic_regression and mlp
  std::vector<char> class_present;  // empty: every class was seen in training
  std::vector<double> epoch_loss;

  // 1-based class id; ties go to the lower class.
  int predict(std::span<const double> x) const;
  nlohmann::json to_json() const;
};

// Class weights: all 1, or N / (K * N_k) when balanced. Labels are 1..K.
std::vector<double> class_weights(std::span<const int> labels, int num_classes, bool balanced);

// Labels are class ids 1..num_classes; every class must appear unless
// allow_absent_classes, in which case unseen classes are never predicted.
TrainedModel train(const TrainerSpec& spec, const Matrix& features, std::span<const int> labels,
                   int num_classes, std::uint64_t seed, bool allow_absent_classes = false);

double evaluate_accuracy(const TrainedModel& model, const Matrix& features,
                         std::span<const int> labels);

// Train/test rows gathered once per test; label-independent, so reused for
// every assignment.
struct PreparedSplit {
  Matrix train_features;
  Matrix test_features;
  std::vector<std::size_t> train_bucket;
  std::vector<std::size_t> test_bucket;
  int num_classes = 0;

  static PreparedSplit build(const BucketedDataset& dataset, const Matrix& features,
                             const Split& split);
};

// A permuted assignment may leave a class without training buckets (bucket
// holdout); the model then simply never predicts that class.
double run_prepared(const PreparedSplit& prepared, const LabelAssignment& assignment,
                    const TrainerSpec& trainer, std::uint64_t seed);

// Relabels units through the assignment, trains on split.train and returns the
// accuracy on split.test. The dataset is not modified.
double run_single(const BucketedDataset& dataset, const LabelAssignment& assignment,
                  const TrainerSpec& trainer, const Split& split, std::uint64_t seed);

}  // namespace bucketperm
