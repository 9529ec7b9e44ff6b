#pragma once

#include "lgcav/error.hpp"
#include "lgcav/rng.hpp"
#include "lgcav/numerics.hpp"
#include "lgcav/embedstore.hpp"
#include "lgcav/concepts.hpp"
#include "lgcav/cavtrain.hpp"
#include "lgcav/metrics.hpp"
#include "lgcav/correction.hpp"
#include "lgcav/parallel.hpp"
#include "lgcav/synthbench.hpp"
#include "lgcav/pipeline.hpp"
