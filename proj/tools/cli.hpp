#pragma once

// Command-line front end. Each subcommand writes plot-ready CSV/JSON and a
// manifest.json into its output directory.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace difflab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

inline constexpr int kSchemaVersion = 1;
// Relative output directories resolve under this directory when set.
inline constexpr const char* kOutputRootEnv = "DIFFLAB_OUTPUT_ROOT";

inline constexpr const char* kProfileHeader = "t,mean,stderr,count";
inline constexpr const char* kProfileDiffHeader = "t,before,after,delta";
inline constexpr const char* kSlotDiffHeader = "slot,lo,hi,mean_delta";
inline constexpr const char* kAblationHeader = "range,lo,hi,mean_mse,stderr,trials";
inline constexpr const char* kCoeffsHeader = "t,beta,alpha_bar,sigma2,coef_x0,coef_xt";
inline constexpr const char* kSamplesHeader = "x,y";
inline constexpr const char* kSelectionHeader = "t,frac_d,frac_v,frac_a,count";

// Git blob hash: SHA-1 over "blob <size>\0" followed by the bytes.
std::string git_blob_hash(const std::string& bytes);
std::string git_blob_hash_file(const std::filesystem::path& p);

std::filesystem::path resolve_output_dir(const std::filesystem::path& dir);

// Runs one command line (argv[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace difflab::cli
