#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ice/dataset.hpp"
#include "ice/embed_net.hpp"
#include "ice/ice_loss.hpp"
#include "ice/sampler.hpp"

namespace ice::app {

enum class Mode { gen_data, train, grad_check, sweep_s, eval };

enum class ExitCode : int { ok = 0, invalid_config = 1, numeric_failure = 2, io_failure = 3 };

enum class Split { train, test };

struct RunConfig {
  Mode mode = Mode::train;

  std::filesystem::path data;       // empty: synthetic clusters
  std::filesystem::path eval_data;  // empty: synthetic held-out split (or training data)
  std::filesystem::path out;
  std::filesystem::path checkpoint;

  ClusterSpec clusters;
  bool disjoint_classes = false;
  Split split = Split::train;

  std::size_t classes_per_batch = 5;
  std::size_t samples_per_class = 4;
  double scale_s = 16.0;
  std::uint64_t iters = 2000;
  SgdConfig sgd;
  std::size_t hidden_dim = 32;
  std::size_t embed_dim = 8;
  std::uint64_t seed = 0;
  GradMode grad_mode = GradMode::reweighted;
  bool anchor_grad = true;

  std::vector<std::size_t> k_values = {1, 2, 4, 8};
  std::vector<double> s_list = {1.0, 16.0, 64.0};

  // grad-check negative control: perturb the analytic ICE gradient.
  bool corrupt_gradient = false;

  // Iterations between metric rows; max(iters / 20, 1).
  std::uint64_t eval_every() const noexcept;
  BatchSpec batch_spec() const noexcept;
  ReweightOptions reweight_options() const noexcept { return {anchor_grad}; }
};

// Throws InvalidArgument on inconsistent values.
void validate(const RunConfig& config);

std::string to_string(Mode mode);
std::string to_string(GradMode mode);

struct ParseOutcome {
  RunConfig config;
  // Set when parsing ends the run (help output or a parse error).
  bool finished = false;
  int exit_code = 0;
};

// Parses flags and an optional `--config` file of `key = value` lines. Flags
// given on the command line override the file.
ParseOutcome parse_command_line(int argc, const char* const* argv);

}  // namespace ice::app
