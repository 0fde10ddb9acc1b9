#pragma once

#include "hmica/demix_net.hpp"
#include "hmica/emission.hpp"
#include "hmica/hmm.hpp"

namespace hmica {

// The full parameter set: transition matrix, per-state Gaussian source
// parameters and the demixing network.
struct ModelParams {
    TransitionMatrix transition;
    GaussianStateParams sources;
    DemixNet net;

    int num_states() const { return transition.num_states(); }
    int num_components() const { return sources.num_components(); }
};

}  // namespace hmica
