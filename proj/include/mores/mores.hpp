#pragma once

#include "mores/baselines.hpp"
#include "mores/core.hpp"
#include "mores/datagen.hpp"
#include "mores/error.hpp"
#include "mores/harness.hpp"
#include "mores/linalg.hpp"
#include "mores/suffstats.hpp"
