#pragma once

#include "tabail/environments.hpp"
#include "tabail/errors.hpp"
#include "tabail/estimators.hpp"
#include "tabail/harness.hpp"
#include "tabail/imitation.hpp"
#include "tabail/mdp.hpp"
#include "tabail/model.hpp"
#include "tabail/presets.hpp"
#include "tabail/rng.hpp"
#include "tabail/solvers.hpp"
#include "tabail/trajectories.hpp"
