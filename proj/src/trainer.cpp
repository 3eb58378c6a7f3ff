#include "fsprune/trainer.hpp"

#include <algorithm>
#include <numeric>

#include "fsprune/models.hpp"

namespace fsprune {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be at least 1");
  if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (reg.lambda < 0.0) throw std::invalid_argument("lambda must be non-negative");
  if (model != "lenet" && model != "vgg11") throw std::invalid_argument("unknown model: " + model);
  prune.validate();
}

TrainState::TrainState(Network net) : network(std::move(net)), mask(KernelMask::all_active(network)) {
  for (const Tensor* p : network.parameters()) momentum.emplace_back(p->shape());
}

TrainState initial_state(const TrainConfig& config, const Shape& sample_shape) {
  return TrainState(build_model(config.model, sample_shape, config.seed));
}

EpochLosses train_epoch(Network& network, const LabeledDataset& data, const TrainConfig& config,
                        const KernelMask& mask, std::vector<Tensor>& momentum, int epoch) {
  if (data.sample_shape() != network.spec().input_shape) {
    throw ShapeError("train_epoch: dataset samples " + shape_string(data.sample_shape()) + " vs network input " +
                     shape_string(network.spec().input_shape));
  }
  const double lambda = config.reg.effective_lambda();
  const bool regularize = lambda > 0.0;
  const std::vector<FrozenMask> frozen = mask.frozen_parameters(network);
  std::vector<Tensor*> params = network.parameters();
  const SgdOptions sgd = config.sgd();

  double loss_sum = 0.0;
  for (const auto& indices : batches(data.size(), {config.seed, config.batch_size, epoch})) {
    const Batch batch = gather(data, indices);
    const Network::Trace trace = network.forward_trace(batch.images);
    const LossResult loss = softmax_cross_entropy(trace.output, batch.labels);
    loss_sum += loss.loss * static_cast<double>(indices.size());
    std::vector<Tensor> grads = network.backward(trace, loss.grad);
    if (regularize) {
      const KernelNormVector nv = build_norm_vector(network);
      const std::vector<Tensor> reg = regularizer_gradient(config.reg.mode, network, nv, &mask);
      for (std::size_t l = 0; l < reg.size(); ++l) {
        Tensor& g = grads[network.conv_weight_parameter(l)];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda * reg[l][i];
      }
    }
    sgd_momentum_step(params, grads, momentum, sgd, frozen);
  }
  return {loss_sum / static_cast<double>(data.size()),
          regularizer_value(config.reg.mode, build_norm_vector(network))};
}

std::vector<int> predict(const Network& network, const LabeledDataset& data, std::size_t batch_size) {
  std::vector<int> out;
  out.reserve(data.size());
  for (std::size_t first = 0; first < data.size(); first += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - first);
    const Tensor logits = network.forward(slice(data, first, count).images);
    const std::size_t classes = logits.dim(1);
    for (std::size_t i = 0; i < count; ++i) {
      const double* row = logits.data() + i * classes;
      out.push_back(static_cast<int>(std::max_element(row, row + classes) - row));
    }
  }
  return out;
}

double evaluate(const Network& network, const LabeledDataset& data) {
  if (data.size() == 0) return 0.0;
  const std::vector<int> predicted = predict(network, data);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < data.size(); ++i) wrong += predicted[i] != data.labels[i];
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(data.size());
}

void run_training(TrainState& state, const TrainConfig& config, const LabeledDataset& train,
                  const LabeledDataset& test, const EpochCallback& on_epoch) {
  config.validate();
  if (!state.mask.matches(state.network)) throw ShapeError("run_training: mask does not match the network");
  for (int epoch = static_cast<int>(state.history.size()) + 1; epoch <= config.epochs; ++epoch) {
    EpochLosses losses = train_epoch(state.network, train, config, state.mask, state.momentum, epoch);
    if (config.prune_enabled) {
      state.events.push_back(prune_epoch(state.network, state.mask, config.prune, epoch, state.momentum));
      losses.reg_end = regularizer_value(config.reg.mode, build_norm_vector(state.network));
    }
    const FilterCounts counts = count_active_filters(state.mask);
    EpochMetrics m;
    m.epoch = epoch;
    m.loss_task = losses.task_mean;
    m.loss_reg = losses.reg_end;
    m.loss_all = combined_loss(m.loss_task, m.loss_reg, config.reg);
    m.test_error_pct = evaluate(state.network, test);
    m.active_counts = counts.active;
    m.total_sparsity_pct = counts.total_sparsity_pct;
    state.history.push_back(std::move(m));
    if (on_epoch) on_epoch(state);
  }
}

TrainState run_training(const TrainConfig& config, const LabeledDataset& train, const LabeledDataset& test,
                        const EpochCallback& on_epoch) {
  TrainState state = initial_state(config, train.sample_shape());
  run_training(state, config, train, test, on_epoch);
  return state;
}

std::size_t select_best_tradeoff(const std::vector<EpochMetrics>& history, double baseline_error,
                                 double max_error_delta) {
  if (history.empty()) throw std::invalid_argument("select_best_tradeoff: empty history");
  const double limit = baseline_error + max_error_delta;
  std::size_t best = history.size();
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (!(history[i].test_error_pct <= limit)) continue;
    if (best == history.size() || history[i].total_sparsity_pct > history[best].total_sparsity_pct) best = i;
  }
  if (best == history.size()) throw NoQualifyingModel("no epoch is within the allowed error of the baseline");
  return best;
}

std::vector<SweepPoint> layer_sweep(const Network& network, const KernelMask& mask, std::size_t layer,
                                    const LabeledDataset& test) {
  if (layer >= network.conv_count()) throw std::out_of_range("layer_sweep: conv layer index out of range");
  Network work = network;
  KernelMask work_mask = mask;
  const ConvLayer& conv = network.conv(layer);
  std::vector<std::size_t> order(conv.kernel_count());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> norms;
  for (std::size_t k = 0; k < conv.kernel_count(); ++k) norms.push_back(kernel_pseudo_norm(conv, k));
  std::stable_sort(order.begin(), order.end(), [&norms](std::size_t a, std::size_t b) { return norms[a] < norms[b]; });

  std::vector<SweepPoint> curve{{0, evaluate(work, test)}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    const KernelIndex id{layer, order[i]};
    apply_mask(work, std::span(&id, 1), work_mask);
    curve.push_back({i + 1, evaluate(work, test)});
  }
  return curve;
}

}  // namespace fsprune
