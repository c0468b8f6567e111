#pragma once

#include <string>

namespace mia::acceptance {

struct Result {
    bool pass = false;
    std::string detail;
};

const char* criterion_name(int id);
Result run_criterion(int id);

} // namespace mia::acceptance
