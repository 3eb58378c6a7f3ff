#include "fsprune/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>

#include "fsprune/models.hpp"

namespace fsprune {
namespace {

std::string fixed1(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string exact(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string method_label(RegMode mode) {
  switch (mode) {
    case RegMode::none: return "baseline";
    case RegMode::l1: return "l1";
    case RegMode::l2: return "l2";
    case RegMode::ratio: return "l1/l2";
  }
  return "?";
}

RunReport make_run_report(const Checkpoint& checkpoint) {
  const FilterCounts counts = count_active_filters(checkpoint.mask);
  RunReport r;
  r.method = method_label(checkpoint.config.reg.mode);
  r.lambda = checkpoint.config.reg.effective_lambda();
  r.error_pct = checkpoint.history.empty() ? NAN : checkpoint.history.back().test_error_pct;
  r.active_filters = counts.active;
  r.original_filters = counts.original;
  r.layer_sparsity_pct = counts.layer_sparsity_pct;
  r.total_sparsity_pct = counts.total_sparsity_pct;
  return r;
}

std::string format_report_table(const std::vector<RunReport>& rows) {
  std::size_t layers = 0;
  for (const RunReport& r : rows) layers = std::max(layers, r.active_filters.size());
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header = {"Method", "Lambda", "Error %"};
  for (std::size_t l = 0; l < layers; ++l) header.push_back("Conv" + std::to_string(l + 1) + " filters (sparsity)");
  header.push_back("Total conv-filter sparsity");
  cells.push_back(header);
  for (const RunReport& r : rows) {
    std::vector<std::string> row = {r.method, exact(r.lambda), fixed1(r.error_pct)};
    for (std::size_t l = 0; l < layers; ++l) {
      row.push_back(l < r.active_filters.size()
                        ? std::to_string(r.active_filters[l]) + " (" + fixed1(r.layer_sparsity_pct[l]) + "%)"
                        : "-");
    }
    row.push_back(fixed1(r.total_sparsity_pct) + "%");
    cells.push_back(row);
  }
  std::vector<std::size_t> widths(header.size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  std::string out;
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) out += pad(row[c], widths[c] + 2);
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += '\n';
  }
  return out;
}

std::string report_to_csv(const std::vector<RunReport>& rows) {
  std::size_t layers = 0;
  for (const RunReport& r : rows) layers = std::max(layers, r.active_filters.size());
  std::string out = "method,lambda,error_pct";
  for (std::size_t l = 0; l < layers; ++l) {
    const std::string c = "conv" + std::to_string(l + 1);
    out += "," + c + "_filters," + c + "_original," + c + "_sparsity_pct";
  }
  out += ",total_sparsity_pct\n";
  for (const RunReport& r : rows) {
    if (r.active_filters.size() != layers) throw std::invalid_argument("report rows must share a layer count");
    out += r.method + "," + exact(r.lambda) + "," + exact(r.error_pct);
    for (std::size_t l = 0; l < layers; ++l) {
      out += "," + std::to_string(r.active_filters[l]) + "," + std::to_string(r.original_filters[l]) + "," +
             exact(r.layer_sparsity_pct[l]);
    }
    out += "," + exact(r.total_sparsity_pct) + "\n";
  }
  return out;
}

std::vector<RunReport> parse_report_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("method,lambda,error_pct", 0) != 0) {
    throw FormatError("report CSV: missing header");
  }
  const auto header_cells = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (header_cells < 4 || (header_cells - 4) % 3 != 0) throw FormatError("report CSV: malformed header");
  const std::size_t layers = (header_cells - 4) / 3;
  std::vector<RunReport> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) cells.push_back(cell);
    if (cells.size() != header_cells) throw FormatError("report CSV: row has wrong cell count");
    try {
      RunReport r;
      r.method = cells[0];
      r.lambda = std::stod(cells[1]);
      r.error_pct = std::stod(cells[2]);
      for (std::size_t l = 0; l < layers; ++l) {
        r.active_filters.push_back(std::stoul(cells[3 + 3 * l]));
        r.original_filters.push_back(std::stoul(cells[4 + 3 * l]));
        r.layer_sparsity_pct.push_back(std::stod(cells[5 + 3 * l]));
      }
      r.total_sparsity_pct = std::stod(cells.back());
      rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw FormatError("report CSV: unparsable row '" + line + "'");
    }
  }
  return rows;
}

GrayImage render_filters(const Network& network, const KernelMask& mask, std::size_t layer) {
  if (layer >= network.conv_count()) throw std::out_of_range("render_filters: conv layer index out of range");
  const ConvLayer& conv = network.conv(layer);
  const std::size_t n = conv.kernel_count(), kh = conv.kernel_h(), kw = conv.kernel_w();
  const auto columns = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n))));
  const std::size_t rows = (n + columns - 1) / columns;
  GrayImage img{columns * kw, rows * kh, {}};
  img.pixels.assign(img.width * img.height, 0);
  const bool masked = mask.matches(network);
  for (std::size_t k = 0; k < n; ++k) {
    const double* w = conv.weights.data() + k * conv.kernel_volume();  // first input channel
    const std::size_t ox = (k % columns) * kw, oy = (k / columns) * kh;
    const auto [lo, hi] = std::minmax_element(w, w + kh * kw);
    const bool frozen = masked && !mask.is_active(layer, k);
    const bool all_zero = *lo == 0.0 && *hi == 0.0;
    for (std::size_t y = 0; y < kh; ++y) {
      for (std::size_t x = 0; x < kw; ++x) {
        std::uint8_t v = 0;
        if (!frozen && !all_zero) {
          v = *lo == *hi ? 128
                         : static_cast<std::uint8_t>(std::lround(255.0 * (w[y * kw + x] - *lo) / (*hi - *lo)));
        }
        img.pixels[(oy + y) * img.width + ox + x] = v;
      }
    }
  }
  return img;
}

void write_pgm(const GrayImage& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()), static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  GrayImage img;
  int maxval = 0;
  in >> magic >> img.width >> img.height >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw FormatError(path.string() + ": not an 8-bit binary PGM");
  in.get();
  img.pixels.resize(img.width * img.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) throw FormatError(path.string() + ": truncated");
  return img;
}

}  // namespace fsprune
