#include <iostream>

#include "mdat/cli/cli.hpp"

int main(int argc, char** argv) {
  return mdat::cli::run({argv + 1, argv + argc}, std::cout, std::cerr);
}
