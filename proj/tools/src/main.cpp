#include <iostream>
#include <string>
#include <vector>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lexanon/cli.hpp"

int main(int argc, char** argv) {
  // Diagnostics go to stderr so stdout stays machine-readable.
  spdlog::set_default_logger(spdlog::stderr_color_mt("lexanon"));
  std::vector<std::string> args(argv + 1, argv + argc);
  return lexanon::cli::run(args, std::cout, std::cerr);
}
