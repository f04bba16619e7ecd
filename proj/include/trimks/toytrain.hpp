#ifndef TRIMKS_TOYTRAIN_HPP_
#define TRIMKS_TOYTRAIN_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "trimks/model_metrics.hpp"

namespace trimks {

/// Which randomness sources vary across the M trained models. Inactive
/// sources fall back to fixed documented constants so they are identical
/// across models (and across master seeds).
enum class Scenario { InitOnly, BatchOnly, TrainOnly, All };

const char* scenario_name(Scenario scenario);
Scenario scenario_from_name(const std::string& name);

/// Two 2-D Gaussian blobs, one per class. Covariances are symmetric
/// (sxx, sxy, syy); `mix` is the probability of class 1.
struct BlobSpec {
  double mean0[2] = {-1.0, 0.0};
  double cov0[3] = {1.0, 0.0, 1.0};
  double mean1[2] = {+1.0, 0.0};
  double cov1[3] = {1.0, 0.0, 1.0};
  double mix = 0.5;
};

struct ToyDataset {
  std::vector<double> features;  // n x 2, row-major
  std::vector<int> labels;       // n, values in {0,1}
  std::size_t size() const { return labels.size(); }
  const double* point(std::size_t i) const { return &features[2 * i]; }
};

/// Samples n labeled points from the blob mixture. Deterministic given
/// seed; redraws the whole batch if a draw misses one of the two classes.
/// Throws ValidationError when a covariance is not positive definite.
ToyDataset generate_dataset(const BlobSpec& spec, std::size_t n,
                            std::uint64_t seed);

/// Feed-forward network from 2 inputs through rectified-linear hidden
/// layers to 2 raw output logits (m_plus, m_minus).
struct MlpParams {
  struct Layer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;  // out x in, row-major
    std::vector<double> b;  // out
  };
  std::vector<Layer> layers;

  static MlpParams zeros_like(const MlpParams& other);
  void check_finite() const;  // throws NumericError
};

/// widths must chain 2 -> hidden... -> 2. With a seed, weights draw from
/// U(-a, a) with a = sqrt(6 / (fan_in + fan_out)) and zero biases. Without
/// a seed (deterministic mode) weights follow a fixed constant pattern:
/// the flattened parameter index hashed by the Knuth multiplier
/// 2654435761, scaled into (-a, a). Not all-zero, so layer symmetry breaks.
MlpParams init_params(const std::vector<std::size_t>& widths,
                      std::optional<std::uint64_t> seed);

struct Logits {
  double m_plus = 0.0;
  double m_minus = 0.0;
};

/// Raw logits for one feature pair; no softmax. Throws NumericError if an
/// intermediate overflows.
Logits forward(const MlpParams& params, double x0, double x1);

/// Mean softmax cross-entropy over the batch and its exact reverse-mode
/// gradient. `grad` is overwritten and must be shaped like `params`
/// (zeros_like). Returns the loss.
double loss_and_gradient(const MlpParams& params,
                         const std::vector<double>& batch_features,
                         const std::vector<int>& batch_labels, MlpParams& grad);

struct TrainConfig {
  Scenario scenario = Scenario::All;
  std::size_t n_models = 20;
  std::size_t epochs = 50;
  std::size_t batch_size = 16;
  double learning_rate = 0.1;
  std::vector<std::size_t> hidden_widths = {32};
  std::size_t n_train = 2000;
  std::size_t n_test = 1000;
  std::uint64_t master_seed = 0;
  std::vector<std::size_t> snapshot_epochs = {50};  // 1-based, within [1, epochs]
  BlobSpec data_spec;
  unsigned threads = 1;  // 0 -> hardware concurrency; results identical either way

  std::vector<std::size_t> widths() const;  // 2, hidden..., 2
  void validate() const;
};

/// What each model actually consumed, for seed-isolation checks: the point
/// visit order of the first epoch and the bootstrap resample indices
/// (empty when data resampling is inactive).
struct ModelTrace {
  std::vector<std::uint32_t> first_epoch_order;
  std::vector<std::uint32_t> resample_indices;
};

struct TrainOutput {
  /// snapshots[k][epoch] = parameters of model k after that epoch.
  std::vector<std::map<std::size_t, MlpParams>> snapshots;
  std::vector<ModelTrace> traces;
};

/// Trains config.n_models models on `base` by mini-batch SGD with a full
/// shuffle each epoch and a fixed learning rate. Per-model seeds for the
/// active randomness sources derive from (master_seed, model, source);
/// inactive init uses the deterministic pattern, inactive batch order a
/// fixed constant seed, inactive resampling the base data unchanged.
/// Deterministic end-to-end; a model whose loss leaves the finite range
/// aborts the run with NumericError naming the model and epoch.
TrainOutput train(const TrainConfig& config, const ToyDataset& base);

/// Full toy experiment: generates the base training data from master_seed,
/// a common test set from test_seed, trains, and evaluates every model on
/// the test set at each snapshot epoch.
std::map<std::size_t, LogitGapMatrix> run_scenario(const TrainConfig& config,
                                                   std::uint64_t test_seed);

}  // namespace trimks

#endif  // TRIMKS_TOYTRAIN_HPP_
