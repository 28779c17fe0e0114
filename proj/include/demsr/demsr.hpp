#pragma once

#include "demsr/errors.hpp"
#include "demsr/grid.hpp"
#include "demsr/metrics.hpp"
#include "demsr/net.hpp"
#include "demsr/raster.hpp"
#include "demsr/resample.hpp"
#include "demsr/rng.hpp"
#include "demsr/run_config.hpp"
#include "demsr/synth.hpp"
#include "demsr/tensor.hpp"
#include "demsr/threads.hpp"
#include "demsr/tiled_infer.hpp"
#include "demsr/train.hpp"
