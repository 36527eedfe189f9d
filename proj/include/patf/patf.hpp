#pragma once

// Umbrella header for the multitemporal SAR despeckling toolkit.

#include "patf/error.hpp"
#include "patf/image.hpp"
#include "patf/keyvalue.hpp"
#include "patf/speckle.hpp"
#include "patf/similarity.hpp"
#include "patf/calibration.hpp"
#include "patf/temporal_filters.hpp"
#include "patf/residual.hpp"
#include "patf/metrics.hpp"
#include "patf/raster_io.hpp"
