#pragma once

#include "asymptotics.hpp"
#include "designs.hpp"
#include "errors.hpp"
#include "estimation.hpp"
#include "montecarlo.hpp"
#include "oracle.hpp"
#include "poisson_binomial.hpp"
#include "population.hpp"
#include "random.hpp"
