#pragma once

#include "conelab/error.hpp"
#include "conelab/numeric.hpp"
#include "conelab/vector.hpp"
#include "conelab/config_core.hpp"
#include "conelab/random.hpp"
#include "conelab/intensity.hpp"
#include "conelab/function_dsl.hpp"
#include "conelab/combinat.hpp"
#include "conelab/sampler.hpp"
#include "conelab/estimators.hpp"
#include "conelab/oracle.hpp"
#include "conelab/run_config.hpp"
