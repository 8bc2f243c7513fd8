// Acceptance suite: one PASS/FAIL line per criterion, measurements indented below.
// Usage: acceptance [id ...]   (no arguments runs 1..13)

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "nls2d/acceptance.hpp"

int main(int argc, char** argv) {
  std::vector<int> ids;
  for (int i = 1; i < argc; ++i) ids.push_back(std::atoi(argv[i]));
  if (ids.empty())
    for (int i = 1; i <= 13; ++i) ids.push_back(i);

  nls2d::AcceptanceContext ctx;
  int failed = 0;
  for (int id : ids) {
    nls2d::CriterionResult r = nls2d::evaluate_criterion(id, ctx);
    const bool ok = r.pass();
    failed += !ok;
    std::printf("%s criterion %d: %s (%.1f s)\n", ok ? "PASS" : "FAIL", r.id, r.title.c_str(), r.seconds);
    for (const auto& m : r.measures) std::printf("    %s\n", nls2d::describe(m).c_str());
    if (!r.note.empty()) std::printf("    note: %s\n", r.note.c_str());
    if (!r.error.empty()) std::printf("    error: %s\n", r.error.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(ids.size()) - failed, ids.size());
  return failed ? 1 : 0;
}
