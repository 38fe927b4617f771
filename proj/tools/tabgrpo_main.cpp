#include <iostream>

#include "tabgrpo/cli.hpp"

int main(int argc, char** argv) {
  return tabgrpo::cli::run(argc, argv, std::cout, std::cerr);
}
