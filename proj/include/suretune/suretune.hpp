#pragma once

#include "acceptance.hpp"
#include "bootstrap_edf.hpp"
#include "bounds.hpp"
#include "core.hpp"
#include "linalg.hpp"
#include "monte_carlo.hpp"
#include "parallel.hpp"
#include "shrinkage.hpp"
#include "simulation.hpp"
#include "soft_threshold.hpp"
#include "stein_edf.hpp"
#include "subset_reg.hpp"
