#include <iostream>

#include "corpstat/cli.hpp"

int main(int argc, char** argv) {
  return corpstat::run_cli(argc, argv, std::cin, std::cout, std::cerr);
}
