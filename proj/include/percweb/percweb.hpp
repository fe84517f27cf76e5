#pragma once

#include "percweb/couple.hpp"
#include "percweb/error.hpp"
#include "percweb/explore.hpp"
#include "percweb/lattice.hpp"
#include "percweb/metrics.hpp"
#include "percweb/oracle.hpp"
#include "percweb/regen.hpp"
#include "percweb/stats.hpp"
