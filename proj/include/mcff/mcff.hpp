#pragma once

#include "netgraph.hpp"
#include "topology.hpp"
#include "treealg.hpp"
#include "protect.hpp"
#include "dataplane.hpp"
#include "failsim.hpp"
#include "harness.hpp"
