#include <iostream>

#include "kgring/cli.hpp"

int main(int argc, char** argv) {
  return kgring::cli_main(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
