#pragma once

#include "wise/types.hpp"
#include "wise/paths.hpp"
#include "wise/swarm.hpp"
#include "wise/topology.hpp"
#include "wise/topology_json.hpp"
#include "wise/crypto.hpp"
#include "wise/hmm.hpp"
#include "wise/planner.hpp"
#include "wise/sim.hpp"
#include "wise/adversary.hpp"
#include "wise/campaign.hpp"
