#include "fsprune/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

namespace fsprune {
namespace {

using nlohmann::json;

json to_json(const ArchitectureSpec& spec) {
  json layers = json::array();
  for (const LayerSpec& l : spec.layers) {
    layers.push_back({{"kind", to_string(l.kind)},
                      {"outputs", l.outputs},
                      {"kernel", l.kernel},
                      {"stride", l.stride},
                      {"padding", l.padding}});
  }
  return {{"name", spec.name}, {"input_shape", spec.input_shape}, {"layers", layers}};
}

ArchitectureSpec architecture_from_json(const json& j) {
  ArchitectureSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.input_shape = j.at("input_shape").get<Shape>();
  for (const json& l : j.at("layers")) {
    spec.layers.push_back({layer_kind_from_string(l.at("kind").get<std::string>()), l.at("outputs").get<std::size_t>(),
                           l.at("kernel").get<std::size_t>(), l.at("stride").get<std::size_t>(),
                           l.at("padding").get<std::size_t>()});
  }
  return spec;
}

json to_json(const TrainConfig& c) {
  return {{"model", c.model},
          {"dataset", c.dataset},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"momentum", c.momentum},
          {"seed", c.seed},
          {"reg", {{"mode", to_string(c.reg.mode)}, {"lambda", c.reg.lambda}}},
          {"prune",
           {{"threshold", c.prune.threshold}, {"scope", to_string(c.prune.scope)}, {"min_keep", c.prune.min_keep}}},
          {"prune_enabled", c.prune_enabled}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.model = j.at("model").get<std::string>();
  c.dataset = j.at("dataset").get<std::string>();
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.momentum = j.at("momentum").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.reg.mode = reg_mode_from_string(j.at("reg").at("mode").get<std::string>());
  c.reg.lambda = j.at("reg").at("lambda").get<double>();
  c.prune.threshold = j.at("prune").at("threshold").get<double>();
  c.prune.scope = prune_scope_from_string(j.at("prune").at("scope").get<std::string>());
  c.prune.min_keep = j.at("prune").at("min_keep").get<std::size_t>();
  c.prune_enabled = j.at("prune_enabled").get<bool>();
  return c;
}

json to_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"loss_task", m.loss_task},
          {"loss_reg", m.loss_reg},
          {"loss_all", m.loss_all},
          {"test_error_pct", m.test_error_pct},
          {"active_counts", m.active_counts},
          {"total_sparsity_pct", m.total_sparsity_pct}};
}

EpochMetrics metrics_from_json(const json& j) {
  EpochMetrics m;
  m.epoch = j.at("epoch").get<int>();
  m.loss_task = j.at("loss_task").get<double>();
  m.loss_reg = j.at("loss_reg").get<double>();
  m.loss_all = j.at("loss_all").get<double>();
  m.test_error_pct = j.at("test_error_pct").get<double>();
  m.active_counts = j.at("active_counts").get<std::vector<std::size_t>>();
  m.total_sparsity_pct = j.at("total_sparsity_pct").get<double>();
  return m;
}

void append_f32(std::string& blob, double v) {
  const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
  for (int b = 0; b < 4; ++b) blob.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

double read_f32(const std::string& blob, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= std::uint32_t{static_cast<unsigned char>(blob[offset + b])} << (8 * b);
  return static_cast<double>(std::bit_cast<float>(bits));
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config) {
  return {state.network, state.mask, state.momentum, config, state.history};
}

TrainState restore_state(const Checkpoint& checkpoint) {
  TrainState state(checkpoint.network);
  state.mask = checkpoint.mask;
  state.momentum = checkpoint.momentum;
  state.history = checkpoint.history;
  return state;
}

void save_checkpoint(const Checkpoint& cp, const std::filesystem::path& dir) {
  if (!cp.mask.matches(cp.network)) throw ShapeError("save_checkpoint: mask does not match the network");
  const auto params = cp.network.parameters();
  const auto names = cp.network.parameter_names();
  if (cp.momentum.size() != params.size()) throw ShapeError("save_checkpoint: momentum buffer count mismatch");

  std::string blob;
  json tensors = json::array();
  auto add = [&](const std::string& name, const Tensor& t) {
    tensors.push_back({{"name", name}, {"shape", t.shape()}, {"offset", blob.size()}, {"length", 4 * t.size()}});
    for (double v : t.values()) append_f32(blob, v);
  };
  for (std::size_t i = 0; i < params.size(); ++i) add(names[i], *params[i]);
  for (std::size_t i = 0; i < params.size(); ++i) {
    require_shape(cp.momentum[i], params[i]->shape(), "save_checkpoint momentum");
    add("momentum/" + names[i], cp.momentum[i]);
  }
  json history = json::array();
  for (const EpochMetrics& m : cp.history) history.push_back(to_json(m));
  const json manifest = {{"format_version", kCheckpointFormatVersion},
                         {"architecture", to_json(cp.network.spec())},
                         {"config", to_json(cp.config)},
                         {"mask", cp.mask.flags()},
                         {"tensors", tensors},
                         {"history", history}};
  std::filesystem::create_directories(dir);
  write_all(dir / "manifest.json", manifest.dump(2) + "\n");
  write_all(dir / "params.bin", blob);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_all(dir / "manifest.json"));
  } catch (const json::parse_error& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
  const std::string blob = read_all(dir / "params.bin");
  try {
    const int version = manifest.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw FormatError("checkpoint format version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointFormatVersion) + ")");
    }
    Network network(architecture_from_json(manifest.at("architecture")));
    const auto params = network.parameters();
    const auto names = network.parameter_names();

    std::vector<Tensor> momentum;
    for (const Tensor* p : params) momentum.emplace_back(p->shape());
    std::size_t expected_offset = 0;
    std::vector<bool> seen(params.size(), false);
    for (const json& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto length = entry.at("length").get<std::size_t>();
      if (offset != expected_offset || length != 4 * shape_size(shape)) {
        throw FormatError("tensor table entry '" + name + "' has inconsistent offset/length");
      }
      if (offset + length > blob.size()) throw FormatError("params.bin is shorter than the tensor table");
      expected_offset += length;
      const bool is_momentum = name.rfind("momentum/", 0) == 0;
      const std::string base = is_momentum ? name.substr(9) : name;
      const auto it = std::find(names.begin(), names.end(), base);
      if (it == names.end()) throw FormatError("unknown tensor '" + name + "'");
      const auto idx = static_cast<std::size_t>(it - names.begin());
      Tensor& target = is_momentum ? momentum[idx] : *params[idx];
      if (target.shape() != shape) {
        throw FormatError("tensor '" + name + "' has shape " + shape_string(shape) + ", architecture expects " +
                          shape_string(target.shape()));
      }
      for (std::size_t i = 0; i < target.size(); ++i) target[i] = read_f32(blob, offset + 4 * i);
      if (!is_momentum) seen[idx] = true;
    }
    if (expected_offset != blob.size()) {
      throw FormatError("params.bin length " + std::to_string(blob.size()) + " differs from manifest total " +
                        std::to_string(expected_offset));
    }
    if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
      throw FormatError("checkpoint is missing parameter tensors");
    }

    const auto flags = manifest.at("mask").get<std::vector<std::vector<int>>>();
    std::vector<std::size_t> sizes;
    for (const auto& layer : flags) sizes.push_back(layer.size());
    KernelMask mask(sizes);
    for (std::size_t l = 0; l < flags.size(); ++l) {
      for (std::size_t k = 0; k < flags[l].size(); ++k) {
        if (flags[l][k] != 0 && flags[l][k] != 1) throw FormatError("mask entries must be 0 or 1");
        if (flags[l][k] == 0) mask.freeze(l, k);
      }
    }
    if (!mask.matches(network)) throw FormatError("mask does not match the architecture");

    std::vector<EpochMetrics> history;
    for (const json& m : manifest.at("history")) history.push_back(metrics_from_json(m));
    return {std::move(network), std::move(mask), std::move(momentum), config_from_json(manifest.at("config")),
            std::move(history)};
  } catch (const json::exception& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  } catch (const ShapeError& e) {
    throw FormatError("manifest.json: " + std::string(e.what()));
  }
}

void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,loss_task,loss_reg,loss_all,test_error_pct,total_sparsity_pct";
  const std::size_t layers = history.empty() ? 0 : history.front().active_counts.size();
  for (std::size_t l = 0; l < layers; ++l) out << ",active_conv" << l + 1;
  out << '\n';
  for (const EpochMetrics& m : history) {
    out << m.epoch << ',' << format_double(m.loss_task) << ',' << format_double(m.loss_reg) << ','
        << format_double(m.loss_all) << ',' << format_double(m.test_error_pct) << ','
        << format_double(m.total_sparsity_pct);
    for (std::size_t c : m.active_counts) out << ',' << c;
    out << '\n';
  }
  write_all(path, out.str());
}

std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path) {
  std::istringstream in(read_all(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,loss_task,loss_reg,loss_all,test_error_pct,total_sparsity_pct", 0) != 0) {
    throw FormatError(path.string() + ": missing metrics header");
  }
  std::vector<EpochMetrics> history;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() < 6) throw FormatError(path.string() + ": short metrics row");
    try {
      EpochMetrics m;
      m.epoch = std::stoi(cells[0]);
      m.loss_task = std::stod(cells[1]);
      m.loss_reg = std::stod(cells[2]);
      m.loss_all = std::stod(cells[3]);
      m.test_error_pct = std::stod(cells[4]);
      m.total_sparsity_pct = std::stod(cells[5]);
      for (std::size_t i = 6; i < cells.size(); ++i) m.active_counts.push_back(std::stoul(cells[i]));
      history.push_back(std::move(m));
    } catch (const std::logic_error&) {
      throw FormatError(path.string() + ": unparsable metrics row '" + line + "'");
    }
  }
  return history;
}

void write_events_jsonl(const std::vector<PruneEvent>& events, const std::filesystem::path& path) {
  std::string out;
  for (const PruneEvent& e : events) out += prune_event_to_json(e) + "\n";
  write_all(path, out);
}

std::vector<PruneEvent> read_events_jsonl(const std::filesystem::path& path) {
  std::istringstream in(read_all(path));
  std::vector<PruneEvent> events;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) events.push_back(prune_event_from_json(line));
  }
  return events;
}

void write_run_directory(const TrainState& state, const TrainConfig& config, const std::filesystem::path& dir) {
  save_checkpoint(make_checkpoint(state, config), dir);
  write_metrics_csv(state.history, dir / "metrics.csv");
  write_events_jsonl(state.events, dir / "events.jsonl");
}

}  // namespace fsprune
