#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fsprune/checkpoint.hpp"

namespace fsprune {

/// One table row: method, lambda, error and conv-filter sparsity per layer.
struct RunReport {
  std::string method;
  double lambda = 0.0;
  double error_pct = 0.0;
  std::vector<std::size_t> active_filters;
  std::vector<std::size_t> original_filters;
  std::vector<double> layer_sparsity_pct;
  double total_sparsity_pct = 0.0;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// "baseline", "l1", "l2" or "l1/l2".
std::string method_label(RegMode mode);

/// Counts come from the mask; the error is the last recorded test error.
RunReport make_run_report(const Checkpoint& checkpoint);

/// Fixed-width table with "N (s%)" cells, percentages to one decimal.
std::string format_report_table(const std::vector<RunReport>& rows);
std::string report_to_csv(const std::vector<RunReport>& rows);
std::vector<RunReport> parse_report_csv(const std::string& csv);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

/// Kernels of conv layer `layer` (first input channel), each min-max scaled to
/// 0..255 on its own, tiled ceil(sqrt(N)) per row. Frozen and all-zero kernels
/// are black; other constant kernels are 128.
GrayImage render_filters(const Network& network, const KernelMask& mask, std::size_t layer);
/// Binary PGM (P5, maxval 255).
void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

}  // namespace fsprune
