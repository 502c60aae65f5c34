#pragma once

#include "underiv/combination.hpp"
#include "underiv/estimation.hpp"
#include "underiv/harness.hpp"
#include "underiv/linalg.hpp"
#include "underiv/norm.hpp"
#include "underiv/rng.hpp"
#include "underiv/scenario.hpp"
#include "underiv/selection.hpp"
#include "underiv/serialize.hpp"
#include "underiv/simulator.hpp"
#include "underiv/stats.hpp"
#include "underiv/types.hpp"
