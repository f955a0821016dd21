#include <iostream>

#include "cli.hpp"
#include "transientsynth/logging.hpp"

int main(int argc, char** argv) {
  tsynth::init_logging();
  std::vector<std::string> args(argv + 1, argv + argc);
  return tsynth::cli::run(args, std::cout, std::cerr);
}
