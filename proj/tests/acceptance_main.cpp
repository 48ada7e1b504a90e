// Acceptance suite runner: one line per criterion, nonzero exit on failure.

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "rfim/verify.hpp"

int main(int argc, char** argv) {
  rfim::VerifyOptions options;
  options.workers = int(std::max(2u, std::thread::hardware_concurrency()));
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--workers" && i + 1 < argc)
      options.workers = std::atoi(argv[++i]);
    else if (arg == "--inject-fault")
      options.inject_fault = true;
  }
  const auto results = rfim::run_acceptance(options);
  return rfim::print_acceptance(results, std::cout);
}
