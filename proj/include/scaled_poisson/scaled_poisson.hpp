#pragma once

#include "scaled_poisson/bernoulli_lattice.hpp"
#include "scaled_poisson/bounds_experiments.hpp"
#include "scaled_poisson/coupling.hpp"
#include "scaled_poisson/errors.hpp"
#include "scaled_poisson/lattice_distribution.hpp"
#include "scaled_poisson/poisson_core.hpp"
#include "scaled_poisson/rational.hpp"
#include "scaled_poisson/stein_lattice.hpp"
#include "scaled_poisson/weighted_sum.hpp"
