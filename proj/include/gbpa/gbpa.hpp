#pragma once

// Umbrella header.

#include "gbpa/config.hpp"
#include "gbpa/distributions.hpp"
#include "gbpa/engine.hpp"
#include "gbpa/environments.hpp"
#include "gbpa/error.hpp"
#include "gbpa/harness.hpp"
#include "gbpa/perturbation.hpp"
#include "gbpa/rng.hpp"
#include "gbpa/smoother.hpp"
#include "gbpa/stats.hpp"
#include "gbpa/tabulate.hpp"
#include "gbpa/tsallis.hpp"
#include "gbpa/types.hpp"
#include "gbpa/verify.hpp"
