// Acceptance suite: one pass/fail line per criterion. Exits nonzero when any
// criterion fails.

#include "srmpc/validation/criteria.hpp"

#include <cstdlib>
#include <cstring>
#include <string>

int main(int argc, char** argv) {
    srmpc::validation::AcceptanceOptions opts;
    opts.out_dir = "acceptance_out";
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--out-dir") == 0 && i + 1 < argc) {
            opts.out_dir = argv[++i];
        } else {
            opts.criteria.push_back(std::atoi(argv[i]));
        }
    }
    return srmpc::validation::run_acceptance_and_report(opts) == 0 ? 0 : 1;
}
