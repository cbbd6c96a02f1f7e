#pragma once

#include <string>
#include <vector>

namespace srmpc::validation {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    std::vector<int> criteria;  // empty = all
    std::string out_dir = "acceptance_out";
};

/// Runs the acceptance criteria and returns one result per criterion.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts);

/// Runs, prints one pass/fail line per criterion, returns the number of
/// failures.
int run_acceptance_and_report(const AcceptanceOptions& opts);

}  // namespace srmpc::validation
