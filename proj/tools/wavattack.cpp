#include <iostream>

#include "wavattack/cli/cli.hpp"

int main(int argc, char** argv) {
  return wavattack::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
