#include <cstdio>
#include <string>

#include "lorcal/acceptance.hpp"
#include "lorcal/report.hpp"

using namespace lorcal;

int main(int argc, char** argv) {
  unsigned long long seed = argc > 1 ? std::stoull(argv[1]) : 1;
  auto line = [](int id, const std::string& title, bool pass) {
    std::printf("criterion %2d %-34s %s\n", id, title.c_str(), pass ? "PASS" : "FAIL");
    std::fflush(stdout);
  };
  auto first = acceptance::run_all(seed, [&](const acceptance::Criterion& c) {
    line(c.id, c.title, c.pass);
    for (auto& [k, v] : c.metrics) std::printf("    %s = %s\n", k.c_str(), report::num(v).c_str());
  });
  auto dump = [&](const std::vector<acceptance::Criterion>& cs) {
    return report::envelope("all-acceptance", {{"seed", seed}}, seed, report::to_json(cs)).dump(2);
  };
  std::string a = dump(first);
  std::string b = dump(acceptance::run_all(seed));
  bool same = a == b;
  line(12, "Determinism", same);
  bool all = same;
  for (auto& c : first) all = all && c.pass;
  std::printf("%s\n", all ? "ALL PASS" : "SOME CRITERIA FAILED");
  return all ? 0 : 1;
}
