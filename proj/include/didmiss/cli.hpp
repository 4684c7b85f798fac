#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace didmiss::cli {

inline constexpr const char* kVersion = "0.1.0";

// Runs one did-miss command. `args` excludes the program name. The report
// (or an error object) goes to `out`; error messages also go to `err`.
// Exit codes: 0 success, 1 bad input or usage, 2 estimator refusal.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// 64-bit FNV-1a hash, used as the dataset fingerprint.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace didmiss::cli
