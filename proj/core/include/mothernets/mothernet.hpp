#pragma once

#include <map>
#include <string>

#include "mothernets/archspec.hpp"

namespace mothernets {

struct MotherNetResult {
    NetworkArch arch;
    // member name -> edit_distance(member vector, mothernet vector)
    std::map<std::string, int> per_member_edit;
};

// MotherNet for a cluster of dense networks: as many hidden layers as the
// shallowest member, per-position minimum units. Throws EmptyCluster.
MotherNetResult build_fc(const EnsembleSpec& cluster);

// MotherNet for a cluster of conv networks: minimum block count, per-block
// minimum depth, componentwise (min filter_size, min num_filters) per layer;
// dense tail built by the build_fc rule. Throws EmptyCluster.
MotherNetResult build_conv(const EnsembleSpec& cluster);

// Dispatches on the cluster's kind.
MotherNetResult build_mothernet(const EnsembleSpec& cluster);

} // namespace mothernets
