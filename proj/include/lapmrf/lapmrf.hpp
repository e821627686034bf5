#pragma once

#include "lapmrf/errors.hpp"
#include "lapmrf/estimation.hpp"
#include "lapmrf/graph.hpp"
#include "lapmrf/harness.hpp"
#include "lapmrf/inference.hpp"
#include "lapmrf/model.hpp"
#include "lapmrf/optimize.hpp"
#include "lapmrf/rng.hpp"
#include "lapmrf/sampling.hpp"
#include "lapmrf/table.hpp"
