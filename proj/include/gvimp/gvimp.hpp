#pragma once

#include "gvimp/block_tridiagonal.hpp"
#include "gvimp/core.hpp"
#include "gvimp/environment.hpp"
#include "gvimp/factors.hpp"
#include "gvimp/gp_prior.hpp"
#include "gvimp/gvi_solver.hpp"
#include "gvimp/map_baseline.hpp"
#include "gvimp/quadrature.hpp"
#include "gvimp/run.hpp"
#include "gvimp/scenario.hpp"
#include "gvimp/sdf_io.hpp"
#include "gvimp/sparse_gaussian.hpp"
