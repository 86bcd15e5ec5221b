#pragma once

#include "mte/error.hpp"
#include "mte/estimation.hpp"
#include "mte/harness.hpp"
#include "mte/io.hpp"
#include "mte/montecarlo.hpp"
#include "mte/oracle.hpp"
#include "mte/population.hpp"
#include "mte/scenario.hpp"
#include "mte/seed.hpp"
