#pragma once

#include <cstddef>
#include <vector>

namespace nesycl {

// One labeled record: per-fragment feature vectors, ground-truth concept
// tuple, packed label index, and whether dense concept supervision is
// attached.
struct Example {
    std::vector<std::vector<double>> fragments;
    std::vector<int> concepts;
    std::size_t label = 0;
    bool supervised = false;
};

using Dataset = std::vector<Example>;

}  // namespace nesycl
