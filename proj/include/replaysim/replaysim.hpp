#pragma once

#include "replaysim/dataset.hpp"
#include "replaysim/directivity.hpp"
#include "replaysim/dsp.hpp"
#include "replaysim/error.hpp"
#include "replaysim/geometry.hpp"
#include "replaysim/manifest.hpp"
#include "replaysim/metrics.hpp"
#include "replaysim/noise.hpp"
#include "replaysim/rir.hpp"
#include "replaysim/rng.hpp"
#include "replaysim/scenario.hpp"
#include "replaysim/wav.hpp"
