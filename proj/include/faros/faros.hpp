#pragma once

#include "faros/attacks.hpp"
#include "faros/config.hpp"
#include "faros/data.hpp"
#include "faros/defenses.hpp"
#include "faros/errors.hpp"
#include "faros/experiment.hpp"
#include "faros/idx.hpp"
#include "faros/linalg.hpp"
#include "faros/model.hpp"
#include "faros/results.hpp"
#include "faros/rng.hpp"
#include "faros/sim.hpp"
