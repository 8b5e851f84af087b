#include "ulwb/util/parallel.hpp"

#include <algorithm>
#include <cstdlib>

namespace ulwb {

int default_threads() {
    if (const char* env = std::getenv("ULWB_THREADS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    return static_cast<int>(std::min(hw, 8u));
}

} // namespace ulwb
