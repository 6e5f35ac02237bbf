#pragma once

#include <string>
#include <vector>

#include "bayesreloc/geometry.hpp"

namespace bayesreloc {

// One labelled query: a feature vector standing in for an image, and its pose.
struct Example {
    std::string query_id;
    std::vector<double> features;
    Pose pose;
};

}  // namespace bayesreloc
