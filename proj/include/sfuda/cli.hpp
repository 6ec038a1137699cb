#pragma once

#include "sfuda/harness.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace sfuda::cli {

/// Process exit codes; part of the public contract for batch wrappers.
enum ExitCode : int {
  kOk = 0,
  kBadArguments = 2,
  kIoError = 3,
  kValidation = 4,
  kDegenerate = 5,
};

int exit_code_for(ErrorCode code);

/// 6 significant digits, round-half-even, locale independent.
std::string format_number(double v);

inline constexpr const char* kResultHeader =
    "pair_id,source,target,method,seed,acc_source_test,acc_target_baseline,"
    "acc_target_adapted,delta,failed";

std::string format_result_row(const harness::ExperimentOutcome& o, const std::string& source,
                              const std::string& target);

/// Parses records from a "top1,pretrain,accuracy" CSV (columns in any order; pretrain
/// may be absent, in which case it reads as 0 and has_pretrain is false).
struct RecordTable {
  std::vector<stats::BackboneRecord> records;
  bool has_pretrain = false;
};
RecordTable parse_records_csv(std::string_view text);

/// Entry point shared by the sfuda executable and the tests. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sfuda::cli
