#ifndef POPLOC_POPLOC_HPP
#define POPLOC_POPLOC_HPP

#include "poploc/engine.hpp"
#include "poploc/epidemics.hpp"
#include "poploc/experiment.hpp"
#include "poploc/geometry.hpp"
#include "poploc/leader_loc.hpp"
#include "poploc/rng.hpp"
#include "poploc/scaling.hpp"
#include "poploc/selfstab.hpp"
#include "poploc/vec.hpp"
#include "poploc/vector_loc.hpp"

#endif  // POPLOC_POPLOC_HPP
