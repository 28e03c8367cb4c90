// Writes a synthetic archive in the CIFAR-10 binary layout.
#include <CLI11.hpp>

#include <iostream>

#include "mjnd/errors.hpp"
#include "mjnd/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic CIFAR-10-format archive", "mjnd-synth"};
  std::string dir;
  std::uint64_t seed = 0;
  bool force = false;
  app.add_option("dir", dir, "Output directory")->required();
  app.add_option("--seed", seed, "Generator seed")->capture_default_str();
  app.add_flag("--force", force, "Rewrite an existing archive");
  CLI11_PARSE(app, argc, argv);
  try {
    if (!force && mjnd::archive_complete(dir)) {
      std::cout << dir << ": archive already complete\n";
      return 0;
    }
    mjnd::write_synthetic_archive(dir, seed);
    std::cout << dir << ": wrote 60000 records\n";
  } catch (const mjnd::Error& e) {
    std::cerr << "mjnd-synth: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
