#pragma once

#include "featdist/error.hpp"
#include "featdist/random.hpp"
#include "featdist/parallel.hpp"
#include "featdist/feature_matrix.hpp"
#include "featdist/npy.hpp"
#include "featdist/manifest.hpp"
#include "featdist/frechet.hpp"
#include "featdist/kernel.hpp"
#include "featdist/cka.hpp"
#include "featdist/metric_result.hpp"
#include "featdist/metric.hpp"
#include "featdist/report.hpp"
#include "featdist/robustness.hpp"
#include "featdist/recipe.hpp"
