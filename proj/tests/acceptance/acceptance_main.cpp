#include <cstdlib>
#include <iostream>
#include <string>

#include "nsmc/acceptance.hpp"

// Usage: nsmc_acceptance [work_dir] [criterion ...]
int main(int argc, char** argv) {
  nsmc::AcceptanceOptions opts;
  if (argc > 1) opts.work_dir = argv[1];
  for (int i = 2; i < argc; ++i) opts.only.push_back(std::atoi(argv[i]));
  opts.on_result = [](const nsmc::CriterionResult& r) { std::cout << nsmc::format_result(r) << std::endl; };
  const auto results = nsmc::run_acceptance(opts);
  int failed = 0;
  for (const auto& r : results) failed += !r.passed;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
