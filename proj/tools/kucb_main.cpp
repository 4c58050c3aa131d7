#include <string>
#include <vector>

#include "kucb/harness.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return kucb::cli_main(args);
}
