#include <string>
#include <vector>

#include "cli/commands.hpp"

int main(int argc, char** argv) {
  return failopt::cli::run(std::vector<std::string>(argv, argv + argc));
}
