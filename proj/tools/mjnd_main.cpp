#include <iostream>
#include <string>
#include <vector>

#include "mjnd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mjnd::dispatch(args, std::cout, std::cerr);
}
