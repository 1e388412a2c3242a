#include "urcod/cli.hpp"

int main(int argc, char** argv) {
  return urcod::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
