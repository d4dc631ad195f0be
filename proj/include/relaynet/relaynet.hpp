#pragma once

#include "relaynet/channel.hpp"
#include "relaynet/cli.hpp"
#include "relaynet/cone.hpp"
#include "relaynet/controller.hpp"
#include "relaynet/core.hpp"
#include "relaynet/ipm.hpp"
#include "relaynet/robust_routing.hpp"
#include "relaynet/routing.hpp"
#include "relaynet/scenario_io.hpp"
#include "relaynet/sim.hpp"
#include "relaynet/team.hpp"
