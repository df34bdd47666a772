#include <iostream>

#include "jmls/cli.hpp"

int main(int argc, char** argv) {
  return jmls::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
