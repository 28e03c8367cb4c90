#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include "mjnd/log.hpp"

int main(int argc, char** argv) {
  mjnd::set_log_enabled(false);
  doctest::Context context(argc, argv);
  return context.run();
}
