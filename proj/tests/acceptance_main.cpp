// Runs the pinned acceptance criteria and prints one PASS/FAIL line per criterion.
// Exit status is the number of failed criteria (capped at 125).

#include <iostream>
#include <string>
#include <vector>

#include "pidpbc/acceptance.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::stoi(argv[i]));
  const auto results = pidpbc::run_acceptance(ids);
  pidpbc::print_acceptance(results, std::cout);
  int failed = 0;
  for (const auto& r : results) failed += r.passed ? 0 : 1;
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed > 125 ? 125 : failed;
}
