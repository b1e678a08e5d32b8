#pragma once

#include "podlim/errors.hpp"
#include "podlim/polynomial.hpp"
#include "podlim/rational.hpp"
#include "podlim/state_space.hpp"
#include "podlim/linalg.hpp"
#include "podlim/lti.hpp"
#include "podlim/two_machine.hpp"
#include "podlim/sensitivity.hpp"
#include "podlim/modal.hpp"
#include "podlim/synthesis.hpp"
#include "podlim/grid_sim.hpp"
#include "podlim/design.hpp"
#include "podlim/io.hpp"
#include "podlim/scenarios.hpp"
