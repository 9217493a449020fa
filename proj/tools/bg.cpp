#include <string>
#include <vector>

#include "benchgauge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return bg::cli::run_command(args);
}
