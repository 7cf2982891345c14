#pragma once

#include "mapeval/alignment.hpp"
#include "mapeval/association.hpp"
#include "mapeval/errors.hpp"
#include "mapeval/geometry.hpp"
#include "mapeval/grid.hpp"
#include "mapeval/io.hpp"
#include "mapeval/map_builder.hpp"
#include "mapeval/metrics.hpp"
#include "mapeval/synth.hpp"
