#pragma once

#include "mmc/params.hpp"
#include "mmc/frames.hpp"
#include "mmc/aam.hpp"
#include "mmc/ssti.hpp"
#include "mmc/control.hpp"
#include "mmc/trace.hpp"
#include "mmc/sim.hpp"
#include "mmc/analysis.hpp"
