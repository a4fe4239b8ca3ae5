#pragma once

// Umbrella header: pulls in the full public surface.

#include "xfit/data.hpp"
#include "xfit/dependence.hpp"
#include "xfit/dgp.hpp"
#include "xfit/diagnostics.hpp"
#include "xfit/errors.hpp"
#include "xfit/estimate.hpp"
#include "xfit/harness.hpp"
#include "xfit/io.hpp"
#include "xfit/learn.hpp"
#include "xfit/parallel.hpp"
#include "xfit/rng.hpp"
#include "xfit/split.hpp"
#include "xfit/svg.hpp"
