// Acceptance suite: runs every acceptance criterion at its pinned tolerance
// and prints one pass/fail line per criterion.

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "emrec/validate.hpp"

using namespace emrec;

int main(int argc, char** argv) {
  ValidateOptions opt;
  opt.cache_dir = "emrec_acceptance_cache";
  opt.threads = 2;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--cache-dir") == 0 && i + 1 < argc) opt.cache_dir = argv[++i];
    if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) opt.threads = std::atoi(argv[++i]);
  }
  std::printf("acceptance suite (cache: %s)\n", opt.cache_dir.string().c_str());

  // Execution order keeps the control cache warm before the Volterra sweep;
  // results are reported in criterion order.
  std::vector<std::pair<int, CheckResult>> results;
  results.emplace_back(1, checks::tensor_disk_oracle(opt));
  results.emplace_back(2, checks::tensor_structure(opt));
  results.emplace_back(3, checks::null_test(opt));
  results.emplace_back(4, checks::alpha_scaling(opt));
  results.emplace_back(5, checks::hum_certificate(opt));
  results.emplace_back(7, checks::near_field_trend(opt));
  results.emplace_back(8, checks::smoke_reconstruction(opt));
  results.emplace_back(9, checks::full_reconstruction(opt));
  results.emplace_back(6, checks::volterra_equivalence(opt));
  results.emplace_back(10, checks::synthetic_inversion(opt));
  std::sort(results.begin(), results.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  int failures = 0;
  for (const auto& [num, res] : results) {
    std::printf("[%02d] %s %-28s %s  (%.1f s)\n", num, res.pass ? "PASS" : "FAIL",
                res.name.c_str(), res.detail.c_str(), res.seconds);
    if (!res.pass) ++failures;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(results.size()) - failures,
              results.size());
  return failures == 0 ? 0 : 1;
}
