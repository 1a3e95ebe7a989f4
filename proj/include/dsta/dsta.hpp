#pragma once

#include "dsta/config.hpp"
#include "dsta/enhancement.hpp"
#include "dsta/error.hpp"
#include "dsta/eval.hpp"
#include "dsta/io.hpp"
#include "dsta/mat.hpp"
#include "dsta/model.hpp"
#include "dsta/numeric.hpp"
#include "dsta/oim.hpp"
#include "dsta/pipeline.hpp"
#include "dsta/rng.hpp"
#include "dsta/sampling.hpp"
#include "dsta/spatial.hpp"
#include "dsta/synthetic.hpp"
#include "dsta/temporal.hpp"
#include "dsta/train.hpp"
