#pragma once

#include "geoslice/binning.hpp"
#include "geoslice/bounds.hpp"
#include "geoslice/errors.hpp"
#include "geoslice/harness.hpp"
#include "geoslice/kernel.hpp"
#include "geoslice/manifold.hpp"
#include "geoslice/parallel.hpp"
#include "geoslice/random.hpp"
#include "geoslice/slice1d.hpp"
#include "geoslice/stats.hpp"
#include "geoslice/target.hpp"
#include "geoslice/text.hpp"
