// Acceptance suite: one criterion per numbered check, each printing a
// single PASS/FAIL line. Run with no arguments for all criteria or with a
// list of criterion numbers.

#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "criteria.hpp"

int main(int argc, char** argv) {
    std::vector<int> wanted;
    for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
    if (wanted.empty()) {
        for (int i = 1; i <= 10; ++i) wanted.push_back(i);
    }

    int failures = 0;
    for (int id : wanted) {
        mia::acceptance::Result r;
        try {
            r = mia::acceptance::run_criterion(id);
        } catch (const std::exception& e) {
            r.pass = false;
            r.detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] criterion %2d: %s -- %s\n", r.pass ? "PASS" : "FAIL", id,
                    mia::acceptance::criterion_name(id), r.detail.c_str());
        std::fflush(stdout);
        if (!r.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
