// Acceptance runner: one PASS/FAIL line per criterion.
//   fsprune_acceptance --suite properties   criteria 1-6 (synthetic, minutes)
//   fsprune_acceptance --suite desk         criteria 7-10 (MNIST subset)
// Exit status is 0 once every criterion has been evaluated; --strict makes any
// FAIL line fatal.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "fsprune/checkpoint.hpp"
#include "fsprune/compact.hpp"
#include "fsprune/gradcheck.hpp"
#include "fsprune/models.hpp"
#include "fsprune/pruner.hpp"
#include "fsprune/sparsity.hpp"
#include "fsprune/trainer.hpp"
#include "pruner_oracle.hpp"
#include "test_util.hpp"

#ifndef FSPRUNE_DEFAULT_MNIST_DIR
#define FSPRUNE_DEFAULT_MNIST_DIR "data/mnist"
#endif

namespace fs = std::filesystem;
using namespace fsprune;
using fsprune::testing::random_tensor;
using fsprune::testing::signed_away_from_zero;
using fsprune::testing::uniform;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
  std::cout << "criterion " << id << " [" << name << "]: " << (o.passed ? "PASS" : "FAIL") << " : " << o.detail
            << std::endl;
  if (!o.passed) ++failures;
}

void run(int id, const std::string& name, const std::function<Outcome()>& body) {
  try {
    report(id, name, body());
  } catch (const std::exception& e) {
    report(id, name, {false, std::string("exception: ") + e.what()});
  }
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) { return lo + rng() % (hi - lo + 1); }

// ---------------------------------------------------------------- criterion 1

struct OpCheck {
  std::string name;
  int configs = 0;
  int passed = 0;
  double worst = 0.0;
};

void record(OpCheck& op, const GradCheckReport& r) {
  ++op.configs;
  if (r.passed) ++op.passed;
  op.worst = std::max(op.worst, r.max_relative_error);
}

double weighted_sum(const Tensor& out, const Tensor& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
  return s;
}

Outcome gradient_fidelity() {
  constexpr int kConfigs = 20;
  constexpr double kTol = 1e-4;
  std::mt19937_64 rng(1001);
  std::vector<OpCheck> ops{{"conv2d"}, {"maxpool2"}, {"relu"}, {"linear"}, {"softmax_ce"},
                           {"l1"},     {"l2"},       {"ratio"}};

  for (int c = 0; c < kConfigs; ++c) {
    {
      const std::size_t pad = pick(rng, 0, 1), kh = pick(rng, 1, 3), kw = pick(rng, 1, 3);
      ConvLayer layer(pick(rng, 1, 3), pick(rng, 1, 3), kh, kw, pick(rng, 1, 2), pad);
      layer.weights = random_tensor(layer.weights.shape(), rng);
      layer.bias = random_tensor(layer.bias.shape(), rng);
      Tensor input = random_tensor({pick(rng, 1, 2), layer.weights.dim(1), pick(rng, 3, 6), pick(rng, 3, 6)}, rng);
      const Tensor upstream = random_tensor(conv2d(input, layer).shape(), rng);
      const ConvGrads g = conv2d_backward(input, layer, upstream);
      std::vector<Tensor*> in{&input, &layer.weights, &layer.bias};
      std::vector<Tensor> an{g.input, g.weights, g.bias};
      record(ops[0], gradient_check(in, an, [&] { return weighted_sum(conv2d(input, layer), upstream); }, kTol));
    }
    {
      Tensor input = random_tensor({pick(rng, 1, 2), pick(rng, 1, 3), 2 * pick(rng, 1, 3), 2 * pick(rng, 1, 3)}, rng);
      const PoolResult p = maxpool2(input);
      const Tensor upstream = random_tensor(p.output.shape(), rng);
      std::vector<Tensor*> in{&input};
      std::vector<Tensor> an{maxpool2_backward(input.shape(), p.argmax, upstream)};
      record(ops[1],
             gradient_check(in, an, [&] { return weighted_sum(maxpool2(input).output, upstream); }, kTol));
    }
    {
      Tensor input = signed_away_from_zero({pick(rng, 1, 3), pick(rng, 2, 12)}, rng, 0.01, 1.0);
      const Tensor upstream = random_tensor(input.shape(), rng);
      std::vector<Tensor*> in{&input};
      std::vector<Tensor> an{relu_backward(input, upstream)};
      record(ops[2], gradient_check(in, an, [&] { return weighted_sum(relu(input), upstream); }, kTol));
    }
    {
      LinearLayer layer(pick(rng, 1, 8), pick(rng, 1, 6));
      layer.weights = random_tensor(layer.weights.shape(), rng);
      layer.bias = random_tensor(layer.bias.shape(), rng);
      Tensor input = random_tensor({pick(rng, 1, 4), layer.in_features()}, rng);
      const Tensor upstream = random_tensor(linear(input, layer).shape(), rng);
      const LinearGrads g = linear_backward(input, layer, upstream);
      std::vector<Tensor*> in{&input, &layer.weights, &layer.bias};
      std::vector<Tensor> an{g.input, g.weights, g.bias};
      record(ops[3], gradient_check(in, an, [&] { return weighted_sum(linear(input, layer), upstream); }, kTol));
    }
    {
      const std::size_t n = pick(rng, 1, 4), classes = pick(rng, 2, 10);
      Tensor logits = random_tensor({n, classes}, rng, -3.0, 3.0);
      std::vector<int> labels(n);
      for (int& l : labels) l = static_cast<int>(rng() % classes);
      std::vector<Tensor*> in{&logits};
      std::vector<Tensor> an{softmax_cross_entropy(logits, labels).grad};
      record(ops[4], gradient_check(in, an, [&] { return softmax_cross_entropy(logits, labels).loss; }, kTol));
    }
    {
      ArchitectureSpec spec{"regcheck", {pick(rng, 1, 2), 6, 6}, {}};
      spec.layers.push_back({LayerKind::conv, pick(rng, 2, 5), pick(rng, 1, 3)});
      spec.layers.push_back({LayerKind::relu});
      spec.layers.push_back({LayerKind::conv, pick(rng, 2, 5), pick(rng, 1, 3)});
      Network net(spec);
      fsprune::testing::randomize(net, rng, 0.05, 0.5);
      for (std::size_t m = 0; m < 3; ++m) {
        const RegMode mode = std::array{RegMode::l1, RegMode::l2, RegMode::ratio}[m];
        const auto an = regularizer_gradient(mode, net, build_norm_vector(net));
        std::vector<Tensor*> in;
        for (std::size_t l = 0; l < net.conv_count(); ++l) in.push_back(&net.conv(l).weights);
        record(ops[5 + m], gradient_check(
                               in, an, [&] { return regularizer_value(mode, build_norm_vector(net)); }, kTol));
      }
    }
  }

  bool ok = true;
  std::ostringstream detail;
  for (const OpCheck& op : ops) {
    ok = ok && op.passed == op.configs && op.configs >= kConfigs;
    detail << op.name << " " << op.passed << "/" << op.configs << " (max rel " << fmt("%.1e", op.worst) << ") ";
  }
  return {ok, detail.str()};
}

// ---------------------------------------------------------------- criterion 2

Outcome ratio_properties() {
  std::mt19937_64 rng(2002);
  int bound_fail = 0, scale_fail = 0, euler_fail = 0;
  double worst_scale = 0.0, worst_euler = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> v(pick(rng, 1, 64));
    for (double& x : v) x = (rng() % 8 == 0) ? 0.0 : std::pow(uniform(rng, 0.0, 1.0), 3);
    v[rng() % v.size()] = uniform(rng, 0.01, 1.0);
    const KernelNormVector nv = fsprune::testing::blocks({v});
    const double ls = ratio_loss(nv);
    const double root_k = std::sqrt(static_cast<double>(v.size()));
    if (!(ls >= 1.0 - 1e-12 && ls <= root_k + 1e-12)) ++bound_fail;

    const double c = 10.0 * (1.0 - uniform(rng, 0.0, 1.0));  // (0, 10]
    std::vector<double> scaled = v;
    for (double& x : scaled) x *= c;
    const double ds = std::abs(ratio_loss(fsprune::testing::blocks({scaled})) - ls);
    worst_scale = std::max(worst_scale, ds);
    if (ds > 1e-10) ++scale_fail;

    const auto g = ratio_loss_norm_gradient(nv);
    const double dot = std::inner_product(g.begin(), g.end(), v.begin(), 0.0);
    worst_euler = std::max(worst_euler, std::abs(dot));
    if (std::abs(dot) > 1e-10) ++euler_fail;
  }
  return {bound_fail + scale_fail + euler_fail == 0,
          fmt("1000 vectors: bound violations %d, scale violations %d (max %.1e), grad.N violations %d (max %.1e)",
              bound_fail, scale_fail, worst_scale, euler_fail, worst_euler)};
}

// ---------------------------------------------------------------- criterion 3

Outcome pruner_oracle() {
  std::mt19937_64 rng(3003);
  const std::array thresholds{0.0, 0.001, 0.01, 0.05, 0.1};
  int cases = 0, mismatches = 0, mass_fail = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t total = pick(rng, 1, 20);
    std::vector<std::vector<double>> layers;
    for (std::size_t used = 0; used < total;) {
      const std::size_t n = std::min(total - used, pick(rng, 1, 8));
      std::vector<double> block(n);
      for (double& x : block) {
        const auto r = rng() % 10;
        x = r == 0 ? 0.0 : r == 1 ? 0.001 : std::pow(uniform(rng, 0.0, 1.0), 4);
      }
      layers.push_back(block);
      used += n;
    }
    layers[0][0] += 0.5;  // non-zero total mass
    const KernelNormVector nv = normalize_norms(fsprune::testing::blocks(layers), PruneScope::global);
    const KernelMask mask = fsprune::testing::mask_for(nv);
    for (double t : thresholds) {
      const PruneConfig config{t, PruneScope::global, 1};
      const auto removed = select_removals(nv, mask, config);
      const std::set<KernelIndex> got(removed.begin(), removed.end());
      ++cases;
      if (got != fsprune::testing::reference_removals(nv, mask, config)) ++mismatches;
      double mass = 0.0;
      for (std::size_t i = 0; i < nv.size(); ++i) {
        if (got.count(nv.index[i])) mass += nv.values[i];
      }
      const bool mass_ok = t == 0.0 ? got.empty() : mass < t;
      if (!mass_ok) ++mass_fail;
    }
  }
  return {mismatches == 0 && mass_fail == 0,
          fmt("%d cases: %d oracle mismatches, %d mass violations (t = 0 must remove nothing)", cases, mismatches,
              mass_fail)};
}

// ---------------------------------------------------------------- criteria 4, 5

const LabeledDataset& synthetic_train() {
  static const LabeledDataset d = synthetic_blobs(10, 20, {1, 28, 28}, 42);
  return d;
}

const LabeledDataset& synthetic_test() {
  static const LabeledDataset d = synthetic_blobs(10, 6, {1, 28, 28}, 42);
  return d;
}

TrainConfig synthetic_config() {
  TrainConfig c;
  c.batch_size = 16;
  c.seed = 7;
  c.reg = {RegMode::ratio, 0.5};
  return c;
}

/// Number of violations: frozen kernels with a non-zero weight, bias or
/// momentum entry.
std::size_t frozen_violations(const Network& net, const KernelMask& frozen, const std::vector<Tensor>& momentum) {
  std::size_t bad = 0;
  for (std::size_t l = 0; l < net.conv_count(); ++l) {
    const ConvLayer& conv = net.conv(l);
    const std::size_t vol = conv.kernel_volume();
    const std::size_t w = net.conv_weight_parameter(l);
    for (std::size_t k = 0; k < conv.kernel_count(); ++k) {
      if (frozen.is_active(l, k)) continue;
      for (std::size_t i = 0; i < vol; ++i) {
        bad += conv.weights[k * vol + i] != 0.0;
        if (!momentum.empty()) bad += momentum[w][k * vol + i] != 0.0;
      }
      bad += conv.bias[k] != 0.0;
      if (!momentum.empty()) bad += momentum[w + 1][k] != 0.0;
    }
  }
  return bad;
}

Outcome freezing_permanence() {
  TrainConfig config = synthetic_config();
  config.prune.threshold = 0.1;
  config.epochs = 1;
  TrainState state = run_training(config, synthetic_train(), synthetic_test());
  const KernelMask first = state.mask;
  const std::size_t pruned = 70 - first.active_count();
  if (pruned == 0) return {false, "first pruning event removed nothing"};

  std::size_t violations = 0;
  config.epochs = 6;
  run_training(state, config, synthetic_train(), synthetic_test(), [&](const TrainState& s) {
    violations += frozen_violations(s.network, first, s.momentum);
  });

  const fs::path dir = fs::temp_directory_path() / "fsprune_acceptance_c4";
  fs::remove_all(dir);
  save_checkpoint(make_checkpoint(state, config), dir);
  const Checkpoint back = load_checkpoint(dir);
  fs::remove_all(dir);
  const std::size_t after_load = frozen_violations(back.network, first, back.momentum);
  bool mask_kept = true;
  for (std::size_t l = 0; l < first.layer_count(); ++l) {
    for (std::size_t k = 0; k < first.kernel_count(l); ++k) {
      if (!first.is_active(l, k) && back.mask.is_active(l, k)) mask_kept = false;
    }
  }
  return {violations == 0 && after_load == 0 && mask_kept,
          fmt("%zu kernels pruned at epoch 1; non-zero entries over 5 further epochs: %zu, after save/load: %zu",
              pruned, violations, after_load)};
}

Outcome ablation_identity() {
  TrainConfig none = synthetic_config();
  none.epochs = 3;
  none.reg = {RegMode::none, 0.0};
  TrainConfig zero = none;
  zero.reg = {RegMode::ratio, 0.0};
  const TrainState a = run_training(none, synthetic_train(), synthetic_test());
  const TrainState b = run_training(zero, synthetic_train(), synthetic_test());
  bool same = a.history == b.history && a.events == b.events && a.mask.flags() == b.mask.flags() &&
              a.momentum == b.momentum;
  const auto pa = a.network.parameters();
  const auto pb = b.network.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) same = same && *pa[i] == *pb[i];
  return {same, same ? "histories, events, masks, weights and momentum bit-identical over 3 epochs"
                     : "trajectories differ"};
}

// ---------------------------------------------------------------- criterion 6

Outcome export_equivalence() {
  std::mt19937_64 rng(6006);
  double worst = 0.0;
  int masks = 0;
  for (const Shape& shape : {Shape{1, 28, 28}, Shape{3, 32, 32}}) {
    for (int trial = 0; trial < 5; ++trial, ++masks) {
      Network net = build_lenet(shape, rng());
      for (Tensor* p : net.parameters()) {
        for (double& v : p->values()) v += uniform(rng, -0.05, 0.05);
      }
      const std::size_t min_keep = pick(rng, 1, 3);
      KernelMask mask = KernelMask::all_active(net);
      for (std::size_t l = 0; l < net.conv_count(); ++l) {
        const std::size_t n = net.conv(l).kernel_count();
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<KernelIndex> removals;
        for (std::size_t i = 0; i < pick(rng, 0, n - min_keep); ++i) removals.push_back({l, order[i]});
        apply_mask(net, removals, mask);
      }
      const Network small = compact_network(net, mask);
      const Tensor input = random_tensor({100, shape[0], shape[1], shape[2]}, rng, 0.0, 1.0);
      const Tensor a = net.forward(input), b = small.forward(input);
      for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    }
  }
  return {worst <= 1e-5, fmt("%d random masks x 100 inputs, max |logit diff| %.2e", masks, worst)};
}

// ---------------------------------------------------------------- desk suite

TrainConfig desk_config(RegMode mode, double lambda) {
  TrainConfig c;
  c.model = "lenet";
  c.dataset = "mnist";
  c.epochs = 20;
  c.batch_size = 64;
  c.lr = 0.01;
  c.momentum = 0.9;
  c.seed = 1;
  c.reg = {mode, lambda};
  c.prune.threshold = 0.01;
  return c;
}

TrainState desk_run(const std::string& label, const TrainConfig& config, const LabeledDataset& train,
                    const LabeledDataset& test, const fs::path& out) {
  std::cerr << "desk run " << label << "\n";
  TrainState state = initial_state(config, train.sample_shape());
  run_training(state, config, train, test, [&](const TrainState& s) {
    const EpochMetrics& m = s.history.back();
    std::cerr << fmt("  %s epoch %2d  loss_task %.5f  loss_reg %.5f  error %.2f%%  sparsity %.1f%%\n",
                     label.c_str(), m.epoch, m.loss_task, m.loss_reg, m.test_error_pct, m.total_sparsity_pct);
  });
  if (!out.empty()) write_run_directory(state, config, out / label);
  return state;
}

struct Tradeoff {
  bool found = false;
  std::size_t index = 0;
  double error = 0.0;
  double sparsity = 0.0;
};

Tradeoff tradeoff(const TrainState& s, double baseline_error) {
  try {
    const std::size_t i = select_best_tradeoff(s.history, baseline_error, 1.5);
    return {true, i, s.history[i].test_error_pct, s.history[i].total_sparsity_pct};
  } catch (const NoQualifyingModel&) {
    return {};
  }
}

std::string describe(const Tradeoff& t) {
  if (!t.found) return "no epoch within 1.5 points of baseline";
  return fmt("epoch %zu (error %.2f%%, sparsity %.1f%%)", t.index + 1, t.error, t.sparsity);
}

void desk_suite(const fs::path& mnist_dir, const fs::path& out) {
  const auto missing = [&](int id, const char* name) {
    report(id, name, {false, "MNIST IDX files not found in " + mnist_dir.string() +
                                 " (see tools/make_mnist_subset.py)"});
  };
  LabeledDataset train, test;
  try {
    train = load_mnist_dir(mnist_dir, true);
    test = load_mnist_dir(mnist_dir, false);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    missing(7, "mnist-sparsification");
    missing(8, "ls-descent");
    missing(9, "regularizer-ordering");
    missing(10, "layer-sweep");
    return;
  }
  std::cerr << "MNIST: " << train.size() << " train, " << test.size() << " test images\n";

  const TrainState baseline = desk_run("baseline", desk_config(RegMode::none, 0.0), train, test, out);
  const TrainState ratio = desk_run("ratio", desk_config(RegMode::ratio, 0.5), train, test, out);
  const double base_err = baseline.history.back().test_error_pct;
  const Tradeoff best = tradeoff(ratio, base_err);

  run(7, "mnist-sparsification", [&]() -> Outcome {
    const bool ok = best.found && best.sparsity >= 40.0 && best.error <= base_err + 1.5;
    return {ok, fmt("%zu train images; baseline error %.2f%%; ratio tradeoff ", train.size(), base_err) +
                    describe(best) + "; need sparsity >= 40% and error <= baseline + 1.5"};
  });

  run(8, "ls-descent", [&]() -> Outcome {
    const auto& h = ratio.history;
    int down = 0;
    for (std::size_t i = 1; i < h.size(); ++i) down += h[i].loss_reg < h[i - 1].loss_reg;
    const int transitions = static_cast<int>(h.size()) - 1;
    const bool ok = h.back().loss_reg < h.front().loss_reg && down >= 0.7 * transitions;
    return {ok, fmt("L_s %.4f at epoch 1, %.4f at epoch %zu; decreased in %d/%d transitions", h.front().loss_reg,
                    h.back().loss_reg, h.size(), down, transitions)};
  });

  const TrainState l1 = desk_run("l1", desk_config(RegMode::l1, 0.5), train, test, out);
  const TrainState l2 = desk_run("l2", desk_config(RegMode::l2, 0.5), train, test, out);
  run(9, "regularizer-ordering", [&]() -> Outcome {
    if (!best.found) return {false, "ratio run has no qualifying epoch"};
    bool ok = true;
    std::string detail = "ratio " + describe(best);
    for (const auto& [name, state] : {std::pair<const char*, const TrainState*>{"l1", &l1}, {"l2", &l2}}) {
      const Tradeoff t = tradeoff(*state, base_err);
      // An unqualified run never reaches the ratio run's accuracy band.
      const bool worse = !t.found ||
                         (best.error <= t.error && best.sparsity >= t.sparsity &&
                          (best.error < t.error || best.sparsity > t.sparsity)) ||
                         (best.sparsity == t.sparsity && t.error >= best.error + 0.3);
      ok = ok && worse;
      detail += std::string("; ") + name + " " + describe(t) + (worse ? " dominated" : " NOT dominated");
    }
    return {ok, detail};
  });

  run(10, "layer-sweep", [&]() -> Outcome {
    const auto sweep = layer_sweep(baseline.network, baseline.mask, 0, test);
    const std::size_t n = sweep.size() - 1;
    const std::size_t early = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(n)));
    double drift = 0.0;
    for (std::size_t i = 1; i <= early; ++i) drift = std::max(drift, std::abs(sweep[i].error_pct - sweep[0].error_pct));
    const bool ok = drift <= 2.0 && sweep.back().error_pct > 50.0;
    if (!out.empty()) {
      std::ofstream csv(out / "baseline_conv1_sweep.csv");
      csv << "removed_count,error_pct\n";
      for (const SweepPoint& p : sweep) csv << p.removed << ',' << fmt("%.17g", p.error_pct) << '\n';
    }
    return {ok, fmt("conv1 %zu kernels; max drift over first %zu removals %.2f points; error at full removal %.2f%%",
                    n, early, drift, sweep.back().error_pct)};
  });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fsprune acceptance checks"};
  std::string suite = "all";
  std::string mnist_dir;
  std::string out_dir;
  bool strict = false;
  app.add_option("--suite", suite, "properties, desk or all")->check(CLI::IsMember({"properties", "desk", "all"}));
  app.add_option("--mnist-dir", mnist_dir, "MNIST IDX directory (default $FSPRUNE_MNIST_DIR or built-in)");
  app.add_option("--out", out_dir, "write desk-run directories here");
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  if (mnist_dir.empty()) {
    const char* env = std::getenv("FSPRUNE_MNIST_DIR");
    mnist_dir = env ? env : FSPRUNE_DEFAULT_MNIST_DIR;
  }
  if (!out_dir.empty()) fs::create_directories(out_dir);

  if (suite != "desk") {
    run(1, "gradient-fidelity", gradient_fidelity);
    run(2, "ratio-norm-properties", ratio_properties);
    run(3, "pruner-oracle", pruner_oracle);
    run(4, "freezing-permanence", freezing_permanence);
    run(5, "ablation-identity", ablation_identity);
    run(6, "export-equivalence", export_equivalence);
  }
  if (suite != "properties") desk_suite(mnist_dir, out_dir);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return strict && failures > 0 ? 1 : 0;
}
