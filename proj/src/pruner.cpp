#include "fsprune/pruner.hpp"

#include <algorithm>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

namespace fsprune {

std::string to_string(PruneScope scope) { return scope == PruneScope::global ? "global" : "per-layer"; }

PruneScope prune_scope_from_string(const std::string& name) {
  if (name == "global") return PruneScope::global;
  if (name == "per-layer") return PruneScope::per_layer;
  throw std::invalid_argument("unknown prune scope '" + name + "' (expected global or per-layer)");
}

void PruneConfig::validate() const {
  if (!(threshold >= 0.0 && threshold < 1.0)) throw std::invalid_argument("prune threshold must lie in [0, 1)");
  if (min_keep < 1) throw std::invalid_argument("min_keep must be at least 1");
}

KernelNormVector normalize_norms(const KernelNormVector& nv, PruneScope scope) {
  KernelNormVector out = nv;
  auto normalize_range = [&out](std::size_t begin, std::size_t end) {
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) sum += out.values[i];
    if (!(sum > 0.0)) throw DegenerateNetworkError("normalize_norms: normalization unit has zero total norm");
    for (std::size_t i = begin; i < end; ++i) out.values[i] /= sum;
  };
  if (scope == PruneScope::global) {
    normalize_range(0, out.size());
  } else {
    for (std::size_t l = 0; l < out.layer_count(); ++l) normalize_range(out.layer_begin(l), out.layer_end(l));
  }
  return out;
}

namespace {

// Selection walk over the flat positions [begin, end).
void walk(const KernelNormVector& nv, const KernelMask& mask, const PruneConfig& config, std::size_t begin,
          std::size_t end, std::vector<std::size_t>& quota, std::vector<KernelIndex>& removed) {
  std::vector<std::size_t> order;
  for (std::size_t i = begin; i < end; ++i) {
    if (mask.is_active(nv.index[i].layer, nv.index[i].kernel)) order.push_back(i);
  }
  // Flat position order equals (layer, kernel) order, so a stable sort on the
  // value breaks ties by index.
  std::stable_sort(order.begin(), order.end(),
                   [&nv](std::size_t a, std::size_t b) { return nv.values[a] < nv.values[b]; });
  double cumulative = 0.0;
  for (std::size_t i : order) {
    const KernelIndex& id = nv.index[i];
    if (quota[id.layer] == 0) continue;
    if (!(cumulative + nv.values[i] < config.threshold - kThresholdTolerance)) break;
    cumulative += nv.values[i];
    --quota[id.layer];
    removed.push_back(id);
  }
}

}  // namespace

std::vector<KernelIndex> select_removals(const KernelNormVector& normalized, const KernelMask& mask,
                                         const PruneConfig& config) {
  config.validate();
  if (mask.layer_count() != normalized.layer_count()) {
    throw ShapeError("select_removals: mask and norm vector have different layer counts");
  }
  std::vector<std::size_t> quota;
  for (std::size_t l = 0; l < mask.layer_count(); ++l) {
    if (mask.kernel_count(l) != normalized.layer_end(l) - normalized.layer_begin(l)) {
      throw ShapeError("select_removals: mask and norm vector disagree on layer " + std::to_string(l));
    }
    const std::size_t active = mask.active_count(l);
    quota.push_back(active > config.min_keep ? active - config.min_keep : 0);
  }
  std::vector<KernelIndex> removed;
  if (config.scope == PruneScope::global) {
    walk(normalized, mask, config, 0, normalized.size(), quota, removed);
  } else {
    for (std::size_t l = 0; l < normalized.layer_count(); ++l) {
      walk(normalized, mask, config, normalized.layer_begin(l), normalized.layer_end(l), quota, removed);
    }
  }
  return removed;
}

void apply_mask(Network& network, std::span<const KernelIndex> removals, KernelMask& mask,
                std::span<Tensor> momentum) {
  if (!mask.matches(network)) throw ShapeError("apply_mask: mask does not match the network");
  if (!momentum.empty() && momentum.size() != network.parameters().size()) {
    throw ShapeError("apply_mask: momentum buffers do not match the network parameters");
  }
  for (const KernelIndex& id : removals) {
    ConvLayer& conv = network.conv(id.layer);
    const std::size_t volume = conv.kernel_volume();
    const auto first = static_cast<std::ptrdiff_t>(id.kernel * volume);
    std::fill_n(conv.weights.values().begin() + first, volume, 0.0);
    conv.bias[id.kernel] = 0.0;
    if (!momentum.empty()) {
      const std::size_t w = network.conv_weight_parameter(id.layer);
      std::fill_n(momentum[w].values().begin() + first, volume, 0.0);
      momentum[w + 1][id.kernel] = 0.0;
    }
    mask.freeze(id.layer, id.kernel);
  }
}

PruneEvent prune_epoch(Network& network, KernelMask& mask, const PruneConfig& config, int epoch,
                       std::span<Tensor> momentum) {
  const KernelNormVector normalized = normalize_norms(build_norm_vector(network), config.scope);
  PruneEvent event;
  event.epoch = epoch;
  event.removed = select_removals(normalized, mask, config);
  for (const KernelIndex& id : event.removed) {
    event.norm_mass_removed += normalized.values[normalized.layer_begin(id.layer) + id.kernel];
  }
  apply_mask(network, event.removed, mask, momentum);
  event.active_counts_after = mask.active_counts();
  return event;
}

std::string prune_event_to_json(const PruneEvent& event) {
  nlohmann::json removed = nlohmann::json::array();
  for (const KernelIndex& id : event.removed) removed.push_back({id.layer, id.kernel});
  const nlohmann::json j = {{"epoch", event.epoch},
                            {"removed", removed},
                            {"norm_mass_removed", event.norm_mass_removed},
                            {"active_counts_after", event.active_counts_after}};
  return j.dump();
}

PruneEvent prune_event_from_json(const std::string& line) {
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    PruneEvent event;
    event.epoch = j.at("epoch").get<int>();
    for (const auto& pair : j.at("removed")) {
      event.removed.push_back({pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()});
    }
    event.norm_mass_removed = j.at("norm_mass_removed").get<double>();
    event.active_counts_after = j.at("active_counts_after").get<std::vector<std::size_t>>();
    return event;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed prune event: ") + e.what());
  }
}

}  // namespace fsprune
