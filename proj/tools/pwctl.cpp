#include "pixelworld/cli.hpp"

int main(int argc, char** argv) {
  return pw::cli_run(std::vector<std::string>(argv + 1, argv + argc));
}
