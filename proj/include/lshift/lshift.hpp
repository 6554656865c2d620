#pragma once

#include "lshift/error.hpp"
#include "lshift/random.hpp"
#include "lshift/parallel.hpp"
#include "lshift/data.hpp"
#include "lshift/bspline.hpp"
#include "lshift/classifier.hpp"
#include "lshift/shift.hpp"
#include "lshift/optimize.hpp"
#include "lshift/random_intercept.hpp"
#include "lshift/mixed_effects.hpp"
#include "lshift/mixture.hpp"
#include "lshift/interval.hpp"
#include "lshift/bootstrap.hpp"
#include "lshift/simulation.hpp"
