#pragma once

// Everything except the run manifests (fleetgame/manifest.hpp), which need
// OpenSSL.

#include "fleetgame/types.hpp"
#include "fleetgame/fleet_dynamics.hpp"
#include "fleetgame/payoff.hpp"
#include "fleetgame/convex_kernel.hpp"
#include "fleetgame/ne_solver.hpp"
#include "fleetgame/horizon_runner.hpp"
#include "fleetgame/oracle.hpp"
#include "fleetgame/io.hpp"
