#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace nsmc {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  /// Scratch directory for the determinism comparison and the reference run.
  std::filesystem::path work_dir = "nsmc_acceptance";
  /// Criteria to run (1..11); empty runs all of them.
  std::vector<int> only;
  /// Called after each criterion (e.g. to print progress).
  void (*on_result)(const CriterionResult&) = nullptr;
};

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// "[PASS] 7  beltrami_reproduction  <detail>"
std::string format_result(const CriterionResult& r);

}  // namespace nsmc
