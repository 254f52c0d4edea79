#pragma once

#include "stovlab/grid.hpp"
#include "stovlab/field.hpp"
#include "stovlab/polarization.hpp"
#include "stovlab/entangled.hpp"
#include "stovlab/instruments.hpp"
#include "stovlab/io.hpp"
#include "stovlab/scenarios.hpp"
