#pragma once

#include "gridrel/errors.hpp"
#include "gridrel/random.hpp"
#include "gridrel/normal.hpp"
#include "gridrel/gaussian.hpp"
#include "gridrel/grid_model.hpp"
#include "gridrel/mixture.hpp"
#include "gridrel/adaptive.hpp"
#include "gridrel/quadrature.hpp"
#include "gridrel/bench.hpp"
#include "gridrel/csv.hpp"
