#pragma once

#include <iosfwd>

#include "ice_app/run_config.hpp"

namespace ice::app {

// Each command reports progress and results on `out` and returns the
// process exit code. Library exceptions are mapped by run_command.
ExitCode cmd_gen_data(const RunConfig& config, std::ostream& out);
ExitCode cmd_train(const RunConfig& config, std::ostream& out);
ExitCode cmd_grad_check(const RunConfig& config, std::ostream& out);
ExitCode cmd_sweep_s(const RunConfig& config, std::ostream& out);
ExitCode cmd_eval(const RunConfig& config, std::ostream& out);

// Dispatches on config.mode; InvalidArgument -> 1, DegenerateInput -> 2,
// IoError and filesystem errors -> 3. Messages go to `err`.
ExitCode run_command(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace ice::app
