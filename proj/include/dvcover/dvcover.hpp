#pragma once

#include "dvcover/brownian_sim.hpp"
#include "dvcover/circle.hpp"
#include "dvcover/conditions.hpp"
#include "dvcover/correlations.hpp"
#include "dvcover/dimension.hpp"
#include "dvcover/error.hpp"
#include "dvcover/experiment.hpp"
#include "dvcover/length_seq.hpp"
#include "dvcover/moments.hpp"
#include "dvcover/numerics.hpp"
#include "dvcover/parallel.hpp"
#include "dvcover/poisson_sim.hpp"
#include "dvcover/rng.hpp"
