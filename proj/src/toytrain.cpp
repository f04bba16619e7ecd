#include "trimks/toytrain.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "trimks/errors.hpp"
#include "trimks/rng.hpp"

namespace trimks {

namespace {

// Stream identifiers for derive_seed paths.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kBatchStream = 2;
constexpr std::uint64_t kDataStream = 3;
constexpr std::uint64_t kBaseDataStream = 4;

// Shared batch-order seed when batch shuffling is an inactive source.
constexpr std::uint64_t kFixedBatchSeed = 0x0F1E2D3C4B5A6978ULL;

bool init_active(Scenario s) { return s == Scenario::InitOnly || s == Scenario::All; }
bool batch_active(Scenario s) { return s == Scenario::BatchOnly || s == Scenario::All; }
bool data_active(Scenario s) { return s == Scenario::TrainOnly || s == Scenario::All; }

struct Cholesky2 {
  double l11, l21, l22;
};

Cholesky2 cholesky(const double cov[3], const char* which) {
  const double sxx = cov[0], sxy = cov[1], syy = cov[2];
  const double det = sxx * syy - sxy * sxy;
  if (!(sxx > 0.0) || !(det > 0.0)) {
    throw ValidationError(std::string("generate_dataset: covariance of class ") +
                          which + " is not positive definite");
  }
  Cholesky2 c;
  c.l11 = std::sqrt(sxx);
  c.l21 = sxy / c.l11;
  c.l22 = std::sqrt(syy - c.l21 * c.l21);
  return c;
}

}  // namespace

const char* scenario_name(Scenario scenario) {
  switch (scenario) {
    case Scenario::InitOnly: return "init";
    case Scenario::BatchOnly: return "batch";
    case Scenario::TrainOnly: return "train";
    case Scenario::All: return "all";
  }
  return "all";
}

Scenario scenario_from_name(const std::string& name) {
  if (name == "init") return Scenario::InitOnly;
  if (name == "batch") return Scenario::BatchOnly;
  if (name == "train") return Scenario::TrainOnly;
  if (name == "all") return Scenario::All;
  throw ValidationError("unknown scenario '" + name +
                        "' (expected init|batch|train|all)");
}

ToyDataset generate_dataset(const BlobSpec& spec, std::size_t n,
                            std::uint64_t seed) {
  if (n < 2) {
    throw ValidationError("generate_dataset: need n >= 2");
  }
  if (!(spec.mix > 0.0 && spec.mix < 1.0)) {
    throw ValidationError("generate_dataset: mix must lie in (0,1)");
  }
  const Cholesky2 c0 = cholesky(spec.cov0, "0");
  const Cholesky2 c1 = cholesky(spec.cov1, "1");

  Rng rng(seed);
  ToyDataset data;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    data.features.assign(2 * n, 0.0);
    data.labels.assign(n, 0);
    bool saw0 = false, saw1 = false;
    for (std::size_t i = 0; i < n; ++i) {
      const int label = rng.uniform01() < spec.mix ? 1 : 0;
      const double z0 = rng.normal();
      const double z1 = rng.normal();
      const Cholesky2& c = label == 1 ? c1 : c0;
      const double* mean = label == 1 ? spec.mean1 : spec.mean0;
      data.features[2 * i] = mean[0] + c.l11 * z0;
      data.features[2 * i + 1] = mean[1] + c.l21 * z0 + c.l22 * z1;
      data.labels[i] = label;
      (label == 1 ? saw1 : saw0) = true;
    }
    if (saw0 && saw1) return data;
  }
  throw ValidationError(
      "generate_dataset: could not draw both classes; mix too extreme");
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
  MlpParams grad;
  grad.layers.reserve(other.layers.size());
  for (const Layer& layer : other.layers) {
    Layer z;
    z.in = layer.in;
    z.out = layer.out;
    z.w.assign(layer.w.size(), 0.0);
    z.b.assign(layer.b.size(), 0.0);
    grad.layers.push_back(std::move(z));
  }
  return grad;
}

void MlpParams::check_finite() const {
  for (const Layer& layer : layers) {
    for (double v : layer.w) {
      if (!std::isfinite(v)) throw NumericError("MlpParams: non-finite weight");
    }
    for (double v : layer.b) {
      if (!std::isfinite(v)) throw NumericError("MlpParams: non-finite bias");
    }
  }
}

MlpParams init_params(const std::vector<std::size_t>& widths,
                      std::optional<std::uint64_t> seed) {
  if (widths.size() < 2 || widths.front() != 2 || widths.back() != 2) {
    throw ValidationError("init_params: widths must chain 2 -> ... -> 2");
  }
  for (std::size_t w : widths) {
    if (w == 0) throw ValidationError("init_params: zero-width layer");
  }
  MlpParams params;
  std::optional<Rng> rng;
  if (seed) rng.emplace(*seed);
  std::size_t flat_index = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    MlpParams::Layer layer;
    layer.in = widths[l];
    layer.out = widths[l + 1];
    layer.w.resize(layer.in * layer.out);
    layer.b.assign(layer.out, 0.0);
    const double a =
        std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (double& w : layer.w) {
      if (rng) {
        w = rng->uniform(-a, a);
      } else {
        // Deterministic pattern: Knuth multiplicative hash of the flattened
        // index, mapped to (-a, a).
        const std::uint32_t h =
            static_cast<std::uint32_t>(flat_index) * 2654435761u;
        w = a * (2.0 * (static_cast<double>(h) / 4294967296.0) - 1.0);
      }
      ++flat_index;
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

namespace {

// Forward pass writing every layer's post-activation into `acts`
// (acts[0] = input). Returns the two output logits.
Logits forward_into(const MlpParams& params, double x0, double x1,
                    std::vector<std::vector<double>>& acts) {
  acts.resize(params.layers.size() + 1);
  acts[0].assign({x0, x1});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const MlpParams::Layer& layer = params.layers[l];
    const std::vector<double>& in = acts[l];
    std::vector<double>& out = acts[l + 1];
    out.assign(layer.out, 0.0);
    const bool last = l + 1 == params.layers.size();
    for (std::size_t r = 0; r < layer.out; ++r) {
      double z = layer.b[r];
      const double* wrow = &layer.w[r * layer.in];
      for (std::size_t cidx = 0; cidx < layer.in; ++cidx) {
        z += wrow[cidx] * in[cidx];
      }
      out[r] = last ? z : (z > 0.0 ? z : 0.0);
    }
  }
  const std::vector<double>& logits = acts.back();
  if (!std::isfinite(logits[0]) || !std::isfinite(logits[1])) {
    throw NumericError("forward: non-finite logit");
  }
  return Logits{logits[0], logits[1]};
}

}  // namespace

Logits forward(const MlpParams& params, double x0, double x1) {
  if (params.layers.empty()) {
    throw ValidationError("forward: empty network");
  }
  std::vector<std::vector<double>> acts;
  return forward_into(params, x0, x1, acts);
}

double loss_and_gradient(const MlpParams& params,
                         const std::vector<double>& batch_features,
                         const std::vector<int>& batch_labels,
                         MlpParams& grad) {
  const std::size_t n = batch_labels.size();
  if (n == 0 || batch_features.size() != 2 * n) {
    throw ValidationError("loss_and_gradient: empty or misshapen batch");
  }
  for (MlpParams::Layer& gl : grad.layers) {
    std::fill(gl.w.begin(), gl.w.end(), 0.0);
    std::fill(gl.b.begin(), gl.b.end(), 0.0);
  }

  const std::size_t n_layers = params.layers.size();
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> deltas(n_layers);
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    forward_into(params, batch_features[2 * i], batch_features[2 * i + 1], acts);
    const double zp = acts.back()[0];  // class-1 logit m_plus
    const double zm = acts.back()[1];  // class-0 logit m_minus
    const int y = batch_labels[i];

    // Stable softmax cross-entropy on the two logits.
    const double zmax = std::max(zp, zm);
    const double lse = zmax + std::log(std::exp(zp - zmax) + std::exp(zm - zmax));
    loss += (lse - (y == 1 ? zp : zm)) * inv_n;

    const double pp = std::exp(zp - lse);
    const double pm = std::exp(zm - lse);
    std::vector<double>& dlast = deltas[n_layers - 1];
    dlast.assign({(pp - (y == 1 ? 1.0 : 0.0)) * inv_n,
                  (pm - (y == 0 ? 1.0 : 0.0)) * inv_n});

    for (std::size_t l = n_layers; l-- > 0;) {
      const MlpParams::Layer& layer = params.layers[l];
      MlpParams::Layer& glayer = grad.layers[l];
      const std::vector<double>& in = acts[l];
      const std::vector<double>& delta = deltas[l];
      for (std::size_t r = 0; r < layer.out; ++r) {
        glayer.b[r] += delta[r];
        double* grow = &glayer.w[r * layer.in];
        for (std::size_t cidx = 0; cidx < layer.in; ++cidx) {
          grow[cidx] += delta[r] * in[cidx];
        }
      }
      if (l == 0) break;
      std::vector<double>& dprev = deltas[l - 1];
      dprev.assign(layer.in, 0.0);
      for (std::size_t r = 0; r < layer.out; ++r) {
        const double* wrow = &layer.w[r * layer.in];
        for (std::size_t cidx = 0; cidx < layer.in; ++cidx) {
          dprev[cidx] += wrow[cidx] * delta[r];
        }
      }
      // Rectifier gate: in[] holds the post-activation of layer l-1.
      for (std::size_t cidx = 0; cidx < layer.in; ++cidx) {
        if (in[cidx] <= 0.0) dprev[cidx] = 0.0;
      }
    }
  }
  if (!std::isfinite(loss)) {
    throw NumericError("loss_and_gradient: non-finite loss");
  }
  return loss;
}

std::vector<std::size_t> TrainConfig::widths() const {
  std::vector<std::size_t> w;
  w.push_back(2);
  w.insert(w.end(), hidden_widths.begin(), hidden_widths.end());
  w.push_back(2);
  return w;
}

void TrainConfig::validate() const {
  if (n_models == 0 || epochs == 0 || batch_size == 0 || n_train < 2 ||
      n_test < 2) {
    throw ValidationError("TrainConfig: counts must be positive (n >= 2 for data)");
  }
  if (!(learning_rate > 0.0)) {
    throw ValidationError("TrainConfig: learning_rate must be positive");
  }
  for (std::size_t w : hidden_widths) {
    if (w == 0) throw ValidationError("TrainConfig: zero hidden width");
  }
  if (snapshot_epochs.empty()) {
    throw ValidationError("TrainConfig: need at least one snapshot epoch");
  }
  for (std::size_t e : snapshot_epochs) {
    if (e < 1 || e > epochs) {
      throw ValidationError("TrainConfig: snapshot epoch outside [1, epochs]");
    }
  }
}

namespace {

struct ModelRun {
  std::map<std::size_t, MlpParams> snapshots;
  ModelTrace trace;
};

ModelRun train_one_model(const TrainConfig& config, const ToyDataset& base,
                         std::size_t model) {
  ModelRun run;
  const Scenario s = config.scenario;

  // Training data: bootstrap resample of the base set when active.
  ToyDataset data;
  if (data_active(s)) {
    Rng data_rng(derive_seed(config.master_seed, {model, kDataStream}));
    const std::size_t n = base.size();
    data.features.reserve(2 * n);
    data.labels.reserve(n);
    run.trace.resample_indices.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto idx = static_cast<std::uint32_t>(data_rng.uniform_index(n));
      run.trace.resample_indices.push_back(idx);
      data.features.push_back(base.features[2 * idx]);
      data.features.push_back(base.features[2 * idx + 1]);
      data.labels.push_back(base.labels[idx]);
    }
  } else {
    data = base;
  }

  MlpParams params =
      init_active(s)
          ? init_params(config.widths(),
                        derive_seed(config.master_seed, {model, kInitStream}))
          : init_params(config.widths(), std::nullopt);
  MlpParams grad = MlpParams::zeros_like(params);

  Rng batch_rng(batch_active(s)
                    ? derive_seed(config.master_seed, {model, kBatchStream})
                    : kFixedBatchSeed);

  const std::size_t n = data.size();
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);

  std::vector<double> batch_features;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    batch_rng.shuffle(order);
    if (epoch == 1) run.trace.first_epoch_order = order;

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      batch_features.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < stop; ++i) {
        const std::uint32_t idx = order[i];
        batch_features.push_back(data.features[2 * idx]);
        batch_features.push_back(data.features[2 * idx + 1]);
        batch_labels.push_back(data.labels[idx]);
      }
      try {
        loss_and_gradient(params, batch_features, batch_labels, grad);
      } catch (const NumericError&) {
        throw NumericError("train: model " + std::to_string(model) +
                           " diverged at epoch " + std::to_string(epoch));
      }
      for (std::size_t l = 0; l < params.layers.size(); ++l) {
        MlpParams::Layer& p = params.layers[l];
        const MlpParams::Layer& g = grad.layers[l];
        for (std::size_t i = 0; i < p.w.size(); ++i) {
          p.w[i] -= config.learning_rate * g.w[i];
        }
        for (std::size_t i = 0; i < p.b.size(); ++i) {
          p.b[i] -= config.learning_rate * g.b[i];
        }
      }
    }
    if (std::find(config.snapshot_epochs.begin(), config.snapshot_epochs.end(),
                  epoch) != config.snapshot_epochs.end()) {
      try {
        params.check_finite();
      } catch (const NumericError&) {
        throw NumericError("train: model " + std::to_string(model) +
                           " diverged by epoch " + std::to_string(epoch));
      }
      run.snapshots.emplace(epoch, params);
    }
  }
  return run;
}

}  // namespace

TrainOutput train(const TrainConfig& config, const ToyDataset& base) {
  config.validate();
  if (base.size() < 2) {
    throw ValidationError("train: base dataset too small");
  }

  TrainOutput out;
  out.snapshots.resize(config.n_models);
  out.traces.resize(config.n_models);

  unsigned threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, config.n_models));

  std::exception_ptr failure;
  if (threads <= 1) {
    for (std::size_t k = 0; k < config.n_models; ++k) {
      ModelRun run = train_one_model(config, base, k);
      out.snapshots[k] = std::move(run.snapshots);
      out.traces[k] = std::move(run.trace);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t k = next.fetch_add(1); k < config.n_models;
             k = next.fetch_add(1)) {
          if (failed.load()) return;
          try {
            ModelRun run = train_one_model(config, base, k);
            out.snapshots[k] = std::move(run.snapshots);
            out.traces[k] = std::move(run.trace);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            failed.store(true);
            return;
          }
        }
      });
    }
    for (auto& worker : pool) worker.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::map<std::size_t, LogitGapMatrix> run_scenario(const TrainConfig& config,
                                                   std::uint64_t test_seed) {
  config.validate();
  const ToyDataset base = generate_dataset(
      config.data_spec, config.n_train,
      derive_seed(config.master_seed, {kBaseDataStream}));
  const ToyDataset test = generate_dataset(config.data_spec, config.n_test,
                                           test_seed);
  const TrainOutput trained = train(config, base);

  std::map<std::size_t, LogitGapMatrix> result;
  for (std::size_t epoch : config.snapshot_epochs) {
    LogitGapMatrix matrix;
    matrix.n_models = config.n_models;
    matrix.n_points = test.size();
    matrix.gaps.assign(matrix.n_models * matrix.n_points, 0.0);
    matrix.labels = test.labels;
    for (std::size_t k = 0; k < config.n_models; ++k) {
      matrix.model_ids.push_back("m" + std::to_string(k));
      const MlpParams& params = trained.snapshots[k].at(epoch);
      for (std::size_t j = 0; j < test.size(); ++j) {
        const Logits logits = forward(params, test.point(j)[0], test.point(j)[1]);
        matrix.at(k, j) = logits.m_plus - logits.m_minus;
      }
    }
    for (std::size_t j = 0; j < test.size(); ++j) {
      matrix.point_ids.push_back("p" + std::to_string(j));
    }
    matrix.validate();
    result.emplace(epoch, std::move(matrix));
  }
  return result;
}

}  // namespace trimks
