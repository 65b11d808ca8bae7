#include "couplevar/cli.hpp"
#include "couplevar/imaging.hpp"

#include <iostream>

int main(int argc, char** argv) {
  couplevar::tune_allocator();
  return couplevar::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}
