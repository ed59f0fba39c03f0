#include <iostream>

#include "ice_app/commands.hpp"
#include "ice_app/run_config.hpp"

int main(int argc, char** argv) {
  const ice::app::ParseOutcome parsed = ice::app::parse_command_line(argc, argv);
  if (parsed.finished) return parsed.exit_code;
  return static_cast<int>(ice::app::run_command(parsed.config, std::cout, std::cerr));
}
