#include "l2sep/parallel.hpp"

#include <cstdlib>
#include <string>

#include "l2sep/common.hpp"

namespace l2sep {

int resolve_jobs(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("L2SEP_JOBS"); env && *env) {
        try {
            const int v = std::stoi(env);
            if (v > 0) return v;
        } catch (const std::exception&) {
        }
        throw ConfigError(std::string("L2SEP_JOBS must be a positive integer, got '") + env + "'");
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace l2sep
