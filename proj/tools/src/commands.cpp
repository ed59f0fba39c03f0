#include "ice_app/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "ice/cce.hpp"
#include "ice/checkpoint.hpp"
#include "ice/error.hpp"
#include "ice/retrieval.hpp"
#include "ice/rng.hpp"
#include "ice_app/finite_diff.hpp"
#include "ice_app/trainer.hpp"

namespace ice::app {
namespace {

namespace fs = std::filesystem;

constexpr double kGradTolerance = 1e-4;
constexpr double kFdStep = 1e-5;

fs::path output_dir(const RunConfig& config) {
  if (config.out.empty()) throw InvalidArgument("config: --out is required for " + to_string(config.mode));
  fs::create_directories(config.out);
  return config.out;
}

// A file path, or `default_name` inside it when it names a directory.
fs::path output_file(const RunConfig& config, const char* default_name) {
  if (config.out.empty()) throw InvalidArgument("config: --out is required for " + to_string(config.mode));
  if (fs::is_directory(config.out)) return config.out / default_name;
  if (config.out.has_parent_path()) fs::create_directories(config.out.parent_path());
  return config.out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

// ---- grad-check helpers ---------------------------------------------------

struct RandomBatch {
  Mat64 rows;
  std::vector<Label> labels;
};

RandomBatch random_unit_batch(Rng& rng, std::size_t classes, std::size_t per_class, std::size_t dim) {
  RandomBatch b{Mat64(classes * per_class, dim), {}};
  for (std::size_t r = 0; r < b.rows.rows(); ++r) {
    auto row = b.rows.row(r);
    for (double& v : row) v = rng.normal();
    const Vec64 unit = l2_normalize_forward(row).unit;
    std::copy(unit.begin(), unit.end(), row.begin());
    b.labels.push_back(static_cast<Label>(r / per_class));
  }
  return b;
}

Mat64 flatten(const MlpParameters& params) {
  Mat64 flat(1, params.count());
  std::size_t k = 0;
  for (const auto block : params.blocks()) {
    for (double v : block) flat.values()[k++] = v;
  }
  return flat;
}

void unflatten(const Mat64& flat, MlpParameters& params) {
  std::size_t k = 0;
  for (auto block : params.blocks()) {
    for (double& v : block) v = flat.values()[k++];
  }
}

void corrupt(Mat64& grads) {
  double scale = 0.0;
  for (double v : grads.values()) scale = std::max(scale, std::abs(v));
  grads(0, 0) += 0.05 * std::max(scale, 1.0);
}

double check_ice_embeddings(const RunConfig& config, Rng& rng, std::ostream& out) {
  double worst = 0.0;
  std::size_t count = 0;
  for (const double s : {1.0, 8.0, 32.0}) {
    for (int rep = 0; rep < 4; ++rep) {
      const std::size_t classes = 2 + rng.uniform_index(3);
      const std::size_t per_class = 2 + rng.uniform_index(2);
      const std::size_t dim = 2 + rng.uniform_index(7);
      RandomBatch rb = random_unit_batch(rng, classes, per_class, dim);
      const EmbeddingBatch batch(rb.rows, rb.labels);
      Mat64 analytic = ice_gradients_exact(batch, s).grads;
      if (config.corrupt_gradient) corrupt(analytic);
      const Mat64 numeric = central_difference(
          [&](const Mat64& m) { return unchecked::ice_loss(m, rb.labels, s); }, rb.rows, kFdStep);
      worst = std::max(worst, relative_error(analytic.values(), numeric.values()));
      ++count;
    }
  }
  out << fmt::format("ice_embeddings  max_rel_err={:.3e}  batches={}  s=1,8,32\n", worst, count);
  return worst;
}

double check_mlp_pipeline(Rng& rng, std::ostream& out) {
  const MlpShape shape{5, 8, 4};
  const double s = 8.0;
  MlpEmbedder net = MlpEmbedder::he_initialized(shape, rng);
  for (double& b : net.params().hidden.bias) b = 0.1 * rng.normal();
  for (double& b : net.params().output.bias) b = 0.1 * rng.normal();
  Mat64 inputs(6, shape.in_dim);
  for (double& v : inputs.values()) v = rng.normal();
  const std::vector<Label> labels = {0, 0, 1, 1, 2, 2};

  ForwardResult fwd = forward(net, inputs);
  const EmbeddingBatch batch(fwd.embeddings, labels);
  const MlpGradients grads = backward(net, fwd.cache, ice_gradients_exact(batch, s).grads);

  MlpEmbedder probe = net;
  const Mat64 numeric = central_difference(
      [&](const Mat64& flat) {
        unflatten(flat, probe.params());
        return ice_loss(EmbeddingBatch(embed(probe, inputs), labels), s);
      },
      flatten(net.params()), kFdStep);
  const double err = relative_error(flatten(grads).values(), numeric.values());
  out << fmt::format("mlp_pipeline    max_rel_err={:.3e}  params={}  s={}\n", err,
                     net.params().count(), s);
  return err;
}

double check_cce(Rng& rng, std::ostream& out) {
  double worst = 0.0;
  for (const bool normalize : {false, true}) {
    Mat64 features(6, 4);
    Mat64 weights(3, 4);
    for (double& v : features.values()) v = rng.normal();
    for (double& v : weights.values()) v = rng.normal();
    const std::vector<Label> labels = {0, 1, 2, 0, 1, 2};
    const CceOptions opts{normalize};
    const ClassifierHead head(weights);
    const CceGradients g = cce_gradients(features, labels, head, opts);
    const Mat64 num_f = central_difference(
        [&](const Mat64& f) { return cce_loss(f, labels, head, opts); }, features, kFdStep);
    const Mat64 num_w = central_difference(
        [&](const Mat64& w) { return cce_loss(features, labels, ClassifierHead(w), opts); }, weights,
        kFdStep);
    worst = std::max({worst, relative_error(g.features.values(), num_f.values()),
                      relative_error(g.weights.values(), num_w.values())});
  }
  out << fmt::format("cce             max_rel_err={:.3e}  (raw and normalized features)\n", worst);
  return worst;
}

double check_micro(const RunConfig& config, Rng& rng, std::ostream& out) {
  const double s = 8.0;
  RandomBatch rb = random_unit_batch(rng, 2, 2, 2);
  const EmbeddingBatch batch(rb.rows, rb.labels);
  Mat64 analytic = ice_gradients_exact(batch, s).grads;
  if (config.corrupt_gradient) corrupt(analytic);
  const Mat64 numeric = central_difference(
      [&](const Mat64& m) { return unchecked::ice_loss(m, rb.labels, s); }, rb.rows, kFdStep);
  out << fmt::format("micro_case      d=2 N=4 s={}\n", s);
  double worst = 0.0;
  for (std::size_t r = 0; r < analytic.rows(); ++r) {
    const double err = relative_error(analytic.row(r), numeric.row(r));
    worst = std::max(worst, err);
    out << fmt::format("  row {} label={} rel_err={:.3e}\n", r, rb.labels[r], err);
  }
  return worst;
}

std::string format_sweep_row(double s, double r1, double r2, double loss) {
  return fmt::format("{},{:.6f},{:.6f},{:.17g}\n", s, r1, r2, loss);
}

}  // namespace

ExitCode cmd_gen_data(const RunConfig& config, std::ostream& out) {
  validate(config);
  const fs::path path = output_file(config, "dataset.csv");
  Splits splits = synthetic_splits(config.clusters, config.seed, config.disjoint_classes);
  const LabeledDataset& ds = config.split == Split::train ? splits.train : splits.held_out;
  write_dataset_csv(path, ds);
  out << fmt::format("wrote {} rows x {} features, {} classes to {}\n", ds.size(), ds.dim(),
                     ds.num_classes(), path.string());
  return ExitCode::ok;
}

ExitCode cmd_train(const RunConfig& config, std::ostream& out) {
  validate(config);
  const fs::path dir = output_dir(config);
  const Splits splits = load_splits(config);
  const TrainResult result = train_ice(config, splits);

  std::ostringstream metrics;
  write_metrics_csv(metrics, result.metrics);
  write_text(dir / "metrics.csv", metrics.str());

  CheckpointMeta meta;
  meta.seed = config.seed;
  meta.iteration = config.iters;
  meta.hyper = {{"scale_s", fmt::format("{}", config.scale_s)},
                {"classes_per_batch", std::to_string(config.classes_per_batch)},
                {"samples_per_class", std::to_string(config.samples_per_class)},
                {"lr", fmt::format("{}", config.sgd.learning_rate)},
                {"momentum", fmt::format("{}", config.sgd.momentum)},
                {"weight_decay", fmt::format("{}", config.sgd.weight_decay)},
                {"lr_multiplier", fmt::format("{}", config.sgd.last_layer_lr_multiplier)},
                {"grad_mode", to_string(config.grad_mode)},
                {"anchor_grad", config.anchor_grad ? "on" : "off"}};
  save_checkpoint(dir / "checkpoint.txt", result.net, meta);

  const MetricsRow& first = result.metrics.front();
  const MetricsRow& last = result.metrics.back();
  out << fmt::format("iters={} loss {:.6g} -> {:.6g}  held-out recall@1 {:.4f} -> {:.4f}\n",
                     config.iters, first.loss, last.loss, first.recall_at_1, last.recall_at_1);
  out << "wrote " << (dir / "metrics.csv").string() << " and " << (dir / "checkpoint.txt").string()
      << '\n';
  return ExitCode::ok;
}

ExitCode cmd_grad_check(const RunConfig& config, std::ostream& out) {
  validate(config);
  Rng rng(derive_seed(config.seed, 100));
  const double ice_err = check_ice_embeddings(config, rng, out);
  const double mlp_err = check_mlp_pipeline(rng, out);
  const double cce_err = check_cce(rng, out);
  const double micro_err = check_micro(config, rng, out);
  const bool pass = std::max({ice_err, mlp_err, cce_err, micro_err}) <= kGradTolerance;
  out << "tolerance " << fmt::format("{:.0e}", kGradTolerance) << "  status "
      << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? ExitCode::ok : ExitCode::numeric_failure;
}

ExitCode cmd_sweep_s(const RunConfig& config, std::ostream& out) {
  validate(config);
  const fs::path dir = output_dir(config);
  const Splits splits = load_splits(config);

  std::string csv = "s,recall_at_1,recall_at_2,final_loss\n";
  out << csv;
  for (const double s : config.s_list) {
    RunConfig run = config;
    run.scale_s = s;
    const TrainResult result = train_ice(run, splits);
    const std::size_t ks[] = {1, 2};
    const RetrievalReport report =
        recall_at_k(embed(result.net, splits.held_out.features()), splits.held_out.labels(), ks);
    const std::string row =
        format_sweep_row(s, report.recall_at_k[0], report.recall_at_k[1], result.metrics.back().loss);
    csv += row;
    out << row << std::flush;
  }
  write_text(dir / "sweep.csv", csv);
  return ExitCode::ok;
}

ExitCode cmd_eval(const RunConfig& config, std::ostream& out) {
  validate(config);
  if (config.checkpoint.empty()) throw InvalidArgument("config: eval requires --checkpoint");
  const Checkpoint ckpt = load_checkpoint(config.checkpoint);
  const LabeledDataset ds = config.data.empty() ? load_splits(config).held_out
                                                : read_dataset_csv(config.data);
  if (ds.dim() != ckpt.net.shape().in_dim) {
    throw InvalidArgument(fmt::format("checkpoint expects {} input features, dataset has {}",
                                      ckpt.net.shape().in_dim, ds.dim()));
  }
  const RetrievalReport report = recall_at_k(embed(ckpt.net, ds.features()), ds.labels(), config.k_values);
  std::ostringstream csv;
  write_recall_csv(csv, report);
  const fs::path path = output_file(config, "recall.csv");
  write_text(path, csv.str());
  out << csv.str();
  return ExitCode::ok;
}

ExitCode run_command(const RunConfig& config, std::ostream& out, std::ostream& err) {
  try {
    switch (config.mode) {
      case Mode::gen_data: return cmd_gen_data(config, out);
      case Mode::train: return cmd_train(config, out);
      case Mode::grad_check: return cmd_grad_check(config, out);
      case Mode::sweep_s: return cmd_sweep_s(config, out);
      case Mode::eval: return cmd_eval(config, out);
    }
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::invalid_config;
  } catch (const DegenerateInput& e) {
    err << "numeric failure: " << e.what() << '\n';
    return ExitCode::numeric_failure;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return ExitCode::io_failure;
  } catch (const fs::filesystem_error& e) {
    err << "i/o error: " << e.what() << '\n';
    return ExitCode::io_failure;
  }
  return ExitCode::invalid_config;
}

}  // namespace ice::app
