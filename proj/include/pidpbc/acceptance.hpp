#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pidpbc {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // measured values against their tolerances
  double seconds = 0.0;
};

/// Pinned acceptance suite. Criteria are numbered 1-12; traces shared between
/// criteria are computed once per call.
std::vector<CriterionResult> run_acceptance(const std::vector<int>& only = {});

/// One "PASS|FAIL <id> <name>: <detail>" line per result.
void print_acceptance(const std::vector<CriterionResult>& results, std::ostream& os);

}  // namespace pidpbc
