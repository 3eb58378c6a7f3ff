#pragma once

#include <filesystem>
#include <vector>

#include "fsprune/trainer.hpp"

namespace fsprune {

inline constexpr int kCheckpointFormatVersion = 1;

/// On disk: a directory holding `manifest.json` (architecture, config, mask,
/// metric history and a tensor table of name/shape/offset/length) and
/// `params.bin` (little-endian float32 values, concatenated in table order).
struct Checkpoint {
  Network network;
  KernelMask mask;
  std::vector<Tensor> momentum;
  TrainConfig config;
  std::vector<EpochMetrics> history;
};

Checkpoint make_checkpoint(const TrainState& state, const TrainConfig& config);
/// Training state to resume from (events are kept separately in events.jsonl).
TrainState restore_state(const Checkpoint& checkpoint);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& dir);
/// Throws FormatError on version mismatch, malformed manifest or a
/// manifest/blob length mismatch; std::runtime_error on I/O failure.
Checkpoint load_checkpoint(const std::filesystem::path& dir);

/// Header: epoch,loss_task,loss_reg,loss_all,test_error_pct,total_sparsity_pct,
/// active_conv1,...
void write_metrics_csv(const std::vector<EpochMetrics>& history, const std::filesystem::path& path);
std::vector<EpochMetrics> read_metrics_csv(const std::filesystem::path& path);

void write_events_jsonl(const std::vector<PruneEvent>& events, const std::filesystem::path& path);
std::vector<PruneEvent> read_events_jsonl(const std::filesystem::path& path);

/// Checkpoint files plus metrics.csv and events.jsonl in `dir`.
void write_run_directory(const TrainState& state, const TrainConfig& config, const std::filesystem::path& dir);

}  // namespace fsprune
