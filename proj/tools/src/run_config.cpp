#include "ice_app/run_config.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "ice/error.hpp"

namespace ice::app {

std::uint64_t RunConfig::eval_every() const noexcept {
  return std::max<std::uint64_t>(iters / 20, 1);
}

BatchSpec RunConfig::batch_spec() const noexcept {
  return {classes_per_batch, samples_per_class, seed};
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::gen_data: return "gen-data";
    case Mode::train: return "train";
    case Mode::grad_check: return "grad-check";
    case Mode::sweep_s: return "sweep-s";
    case Mode::eval: return "eval";
  }
  return "?";
}

std::string to_string(GradMode mode) { return mode == GradMode::exact ? "exact" : "reweighted"; }

void validate(const RunConfig& c) {
  auto fail = [](const std::string& msg) { throw InvalidArgument("config: " + msg); };
  if (!(c.scale_s >= 1.0) || !std::isfinite(c.scale_s)) fail("scale-s must be >= 1");
  for (double s : c.s_list) {
    if (!(s >= 1.0) || !std::isfinite(s)) fail("every s-list value must be >= 1");
  }
  if (c.classes_per_batch < 2) fail("classes-per-batch must be >= 2");
  if (c.samples_per_class < 2) fail("samples-per-class must be >= 2");
  if (c.hidden_dim == 0) fail("hidden-dim must be >= 1");
  if (c.embed_dim < 2) fail("embed-dim must be >= 2");
  if (c.k_values.empty()) fail("k-values must not be empty");
  if (std::find(c.k_values.begin(), c.k_values.end(), std::size_t{0}) != c.k_values.end()) {
    fail("k-values must be >= 1");
  }
  if (c.clusters.num_classes == 0 || c.clusters.per_class == 0 || c.clusters.input_dim == 0) {
    fail("num-classes, per-class and input-dim must be >= 1");
  }
  if (!(c.clusters.cluster_std >= 0.0)) fail("cluster-std must be >= 0");
  const bool trains = c.mode == Mode::train || c.mode == Mode::sweep_s;
  if (trains && c.data.empty() && c.classes_per_batch > c.clusters.num_classes) {
    fail("classes-per-batch exceeds num-classes");
  }
  if (!(c.sgd.learning_rate > 0.0)) fail("lr must be > 0");
  if (!(c.sgd.momentum >= 0.0 && c.sgd.momentum < 1.0)) fail("momentum must be in [0, 1)");
  if (!(c.sgd.weight_decay >= 0.0)) fail("weight-decay must be >= 0");
  if (!(c.sgd.last_layer_lr_multiplier > 0.0)) fail("lr-multiplier must be > 0");
}

ParseOutcome parse_command_line(int argc, const char* const* argv) {
  ParseOutcome outcome;
  RunConfig& c = outcome.config;

  CLI::App app{"Instance cross entropy metric learning: data, training, checks, evaluation"};
  app.set_config("--config", "", "File of `key = value` lines; command-line flags take precedence");

  const std::map<std::string, Mode> modes{{"gen-data", Mode::gen_data},
                                          {"train", Mode::train},
                                          {"grad-check", Mode::grad_check},
                                          {"sweep-s", Mode::sweep_s},
                                          {"eval", Mode::eval}};
  const std::map<std::string, GradMode> grad_modes{{"exact", GradMode::exact},
                                                   {"reweighted", GradMode::reweighted}};
  const std::map<std::string, bool> on_off{{"on", true}, {"off", false}};
  const std::map<std::string, Split> splits{{"train", Split::train}, {"test", Split::test}};

  app.add_option("--mode", c.mode, "gen-data | train | grad-check | sweep-s | eval")
      ->required()
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case));
  app.add_option("--data", c.data, "Dataset CSV (label,f0,f1,...); synthetic clusters if omitted");
  app.add_option("--eval-data", c.eval_data, "Held-out dataset CSV");
  app.add_option("--out", c.out,
                 "Output file (gen-data, eval) or directory (train, sweep-s)");
  app.add_option("--checkpoint", c.checkpoint, "Checkpoint manifest to evaluate");

  app.add_option("--num-classes", c.clusters.num_classes, "Synthetic classes");
  app.add_option("--per-class", c.clusters.per_class, "Synthetic points per class");
  app.add_option("--input-dim", c.clusters.input_dim, "Synthetic input dimension");
  app.add_option("--cluster-std", c.clusters.cluster_std, "Synthetic cluster standard deviation");
  app.add_option("--disjoint-classes", c.disjoint_classes,
                 "Held-out split uses new class means");
  app.add_option("--split", c.split, "gen-data: train (seed) or test (seed + 1) split")
      ->transform(CLI::CheckedTransformer(splits, CLI::ignore_case));

  app.add_option("--classes-per-batch", c.classes_per_batch, "C, classes per mini-batch");
  app.add_option("--samples-per-class", c.samples_per_class, "N_c, samples per class");
  app.add_option("--scale-s", c.scale_s, "Scaling parameter s >= 1");
  app.add_option("--iters", c.iters, "Training iterations");
  app.add_option("--lr", c.sgd.learning_rate, "Base learning rate");
  app.add_option("--momentum", c.sgd.momentum, "SGD momentum");
  app.add_option("--weight-decay", c.sgd.weight_decay, "Weight decay");
  app.add_option("--lr-multiplier", c.sgd.last_layer_lr_multiplier,
                 "Learning-rate multiplier of the embedding layer");
  app.add_option("--hidden-dim", c.hidden_dim, "Hidden layer width");
  app.add_option("--embed-dim", c.embed_dim, "Embedding dimension");
  app.add_option("--seed", c.seed, "Seed for data, initialization and sampling");
  app.add_option("--grad-mode", c.grad_mode, "exact | reweighted")
      ->transform(CLI::CheckedTransformer(grad_modes, CLI::ignore_case));
  app.add_option("--anchor-grad", c.anchor_grad, "on | off: reweighted gradient on anchor rows")
      ->transform(CLI::CheckedTransformer(on_off, CLI::ignore_case));
  app.add_option("--k-values", c.k_values, "Comma-separated K for Recall@K")->delimiter(',');
  app.add_option("--s-list", c.s_list, "Comma-separated s values for sweep-s")->delimiter(',');
  app.add_flag("--corrupt-gradient", c.corrupt_gradient,
               "grad-check negative control: perturb the analytic gradient")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    outcome.finished = true;
    app.exit(e);
    outcome.exit_code = static_cast<int>(ExitCode::io_failure);
  } catch (const CLI::ParseError& e) {
    outcome.finished = true;
    const int code = app.exit(e);
    outcome.exit_code = code == 0 ? 0 : static_cast<int>(ExitCode::invalid_config);
  }
  return outcome;
}

}  // namespace ice::app
