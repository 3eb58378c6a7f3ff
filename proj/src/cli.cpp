#include "fsprune/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "fsprune/compact.hpp"
#include "fsprune/models.hpp"
#include "fsprune/report.hpp"

namespace fsprune {
namespace {

struct DataOptions {
  std::string dataset;
  std::string data_dir;
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
  std::size_t synthetic_per_class = 50;
  std::uint64_t data_seed = 42;
};

void add_data_options(CLI::App* cmd, DataOptions& o, bool dataset_required) {
  auto* ds = cmd->add_option("--dataset", o.dataset, "mnist, cifar10 or synthetic")
                 ->check(CLI::IsMember({"mnist", "cifar10", "synthetic"}));
  if (dataset_required) ds->required();
  cmd->add_option("--data-dir", o.data_dir, "Directory holding the dataset files");
  cmd->add_option("--test-limit", o.test_limit, "Use only the first N test samples (0 = all)");
  cmd->add_option("--synthetic-per-class", o.synthetic_per_class, "Synthetic training samples per class")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--data-seed", o.data_seed, "Seed of the synthetic dataset");
}

Shape input_shape_for(const std::string& model, const std::string& dataset) {
  if (dataset == "mnist") return {1, 28, 28};
  if (dataset == "cifar10") return {3, 32, 32};
  return model == "vgg11" ? Shape{3, 32, 32} : Shape{1, 28, 28};
}

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

LabeledDataset load_split(const DataOptions& o, const std::string& model, bool train) {
  LabeledDataset data;
  if (o.dataset == "synthetic") {
    // One pool, split so both halves share the class centres.
    const std::size_t test_per_class = std::max<std::size_t>(1, o.synthetic_per_class / 2);
    const LabeledDataset pool = synthetic_blobs(10, o.synthetic_per_class + test_per_class,
                                                input_shape_for(model, o.dataset), o.data_seed);
    const std::size_t train_count = 10 * o.synthetic_per_class;
    data = train ? pool.head(train_count) : [&] {
      const Batch b = slice(pool, train_count, pool.size() - train_count);
      return LabeledDataset{b.images, b.labels};
    }();
  } else {
    if (o.data_dir.empty()) throw UsageError("--data-dir is required for --dataset " + o.dataset);
    data = o.dataset == "mnist" ? load_mnist_dir(o.data_dir, train) : load_cifar10_dir(o.data_dir, train);
  }
  const std::size_t limit = train ? o.train_limit : o.test_limit;
  return limit ? data.head(limit) : data;
}

std::size_t conv_layer_arg(int layer, const Network& net) {
  if (layer < 1 || static_cast<std::size_t>(layer) > net.conv_count()) {
    throw UsageError("--layer must be between 1 and " + std::to_string(net.conv_count()));
  }
  return static_cast<std::size_t>(layer - 1);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Structured filter pruning with a kernel-norm l1/l2 regularizer"};
  app.require_subcommand(1);

  TrainConfig config;
  DataOptions train_data;
  std::string reg = "ratio", scope = "global", out_dir;
  bool no_prune = false;
  auto* train = app.add_subcommand("train", "Train a network, regularizing and pruning conv filters");
  train->add_option("--model", config.model, "lenet or vgg11")->check(CLI::IsMember({"lenet", "vgg11"}));
  add_data_options(train, train_data, true);
  train->add_option("--train-limit", train_data.train_limit, "Use only the first N training samples (0 = all)");
  train->add_option("--reg", reg, "none, l1, l2 or ratio")->check(CLI::IsMember({"none", "l1", "l2", "ratio"}));
  train->add_option("--lambda", config.reg.lambda, "Regularizer weight")->check(CLI::NonNegativeNumber);
  train->add_option("--threshold", config.prune.threshold, "Pruned fraction of normalized norm mass")
      ->check(CLI::Range(0.0, 0.999999));
  train->add_option("--prune-scope", scope, "global or per-layer")->check(CLI::IsMember({"global", "per-layer"}));
  train->add_option("--min-keep", config.prune.min_keep, "Minimum active kernels per layer")->check(CLI::PositiveNumber);
  train->add_flag("--no-prune", no_prune, "Regularize only, never remove kernels");
  train->add_option("--epochs", config.epochs)->check(CLI::PositiveNumber);
  train->add_option("--batch-size", config.batch_size)->check(CLI::PositiveNumber);
  train->add_option("--lr", config.lr)->check(CLI::PositiveNumber);
  train->add_option("--momentum", config.momentum)->check(CLI::Range(0.0, 0.999999));
  train->add_option("--seed", config.seed);
  train->add_option("--out", out_dir, "Run directory")->required();

  std::string checkpoint_dir;
  DataOptions eval_data;
  auto* eval = app.add_subcommand("eval", "Report the test error of a checkpoint");
  eval->add_option("--checkpoint", checkpoint_dir)->required();
  add_data_options(eval, eval_data, true);

  std::vector<std::string> report_dirs;
  std::string report_csv;
  auto* report = app.add_subcommand("report", "Tabulate conv-filter sparsity of run directories");
  report->add_option("dirs", report_dirs, "Run directories")->required();
  report->add_option("--csv", report_csv, "Also write the table as CSV");

  int layer = 1;
  std::string out_file;
  auto* dump = app.add_subcommand("dump-filters", "Render a conv layer's kernels to a PGM image");
  dump->add_option("--checkpoint", checkpoint_dir)->required();
  dump->add_option("--layer", layer, "Conv layer number, starting at 1")->required();
  dump->add_option("--out", out_file)->required();

  auto* exporter = app.add_subcommand("export-pruned", "Write a structurally smaller checkpoint");
  exporter->add_option("--checkpoint", checkpoint_dir)->required();
  exporter->add_option("--out", out_dir)->required();

  DataOptions sweep_data;
  auto* sweep = app.add_subcommand("sweep", "Error while zeroing one layer's kernels in ascending norm order");
  sweep->add_option("--checkpoint", checkpoint_dir)->required();
  sweep->add_option("--layer", layer, "Conv layer number, starting at 1")->required();
  sweep->add_option("--out", out_file)->required();
  add_data_options(sweep, sweep_data, false);

  std::vector<std::string> argv_store{"fsprune"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_store) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*train) {
      config.dataset = train_data.dataset;
      config.reg.mode = reg_mode_from_string(reg);
      config.prune.scope = prune_scope_from_string(scope);
      config.prune_enabled = !no_prune;
      config.validate();
      const LabeledDataset train_set = load_split(train_data, config.model, true);
      const LabeledDataset test_set = load_split(train_data, config.model, false);
      run_training(config, train_set, test_set, [&](const TrainState& state) {
        const EpochMetrics& m = state.history.back();
        char line[160];
        std::snprintf(line, sizeof line, "epoch %d  loss_task %.5f  loss_reg %.5f  error %.2f%%  sparsity %.1f%%\n",
                      m.epoch, m.loss_task, m.loss_reg, m.test_error_pct, m.total_sparsity_pct);
        out << line << std::flush;
        write_run_directory(state, config, out_dir);
      });
      return 0;
    }
    if (*eval) {
      const Checkpoint cp = load_checkpoint(checkpoint_dir);
      const LabeledDataset test_set = load_split(eval_data, cp.config.model, false);
      char line[64];
      std::snprintf(line, sizeof line, "error_pct %.4f\n", evaluate(cp.network, test_set));
      out << line;
      return 0;
    }
    if (*report) {
      std::vector<RunReport> rows;
      for (const auto& dir : report_dirs) rows.push_back(make_run_report(load_checkpoint(dir)));
      out << format_report_table(rows);
      if (!report_csv.empty()) {
        std::ofstream csv(report_csv);
        if (!csv) throw std::runtime_error("cannot write " + report_csv);
        csv << report_to_csv(rows);
      }
      return 0;
    }
    if (*dump) {
      const Checkpoint cp = load_checkpoint(checkpoint_dir);
      write_pgm(render_filters(cp.network, cp.mask, conv_layer_arg(layer, cp.network)), out_file);
      return 0;
    }
    if (*exporter) {
      const Checkpoint compact = export_pruned(load_checkpoint(checkpoint_dir));
      save_checkpoint(compact, out_dir);
      out << "exported conv filters:";
      for (std::size_t n : compact.network.spec().conv_filter_counts()) out << ' ' << n;
      out << '\n';
      return 0;
    }
    if (*sweep) {
      const Checkpoint cp = load_checkpoint(checkpoint_dir);
      if (sweep_data.dataset.empty()) sweep_data.dataset = cp.config.dataset;
      const LabeledDataset test_set = load_split(sweep_data, cp.config.model, false);
      const auto curve = layer_sweep(cp.network, cp.mask, conv_layer_arg(layer, cp.network), test_set);
      std::ofstream csv(out_file);
      if (!csv) throw std::runtime_error("cannot write " + out_file);
      csv << "removed_count,error_pct\n";
      for (const SweepPoint& p : curve) {
        char line[64];
        std::snprintf(line, sizeof line, "%zu,%.17g\n", p.removed, p.error_pct);
        csv << line;
      }
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace fsprune
