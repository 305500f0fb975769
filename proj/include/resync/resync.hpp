#pragma once

#include "resync/eigen_solver.hpp"
#include "resync/errors.hpp"
#include "resync/io.hpp"
#include "resync/model.hpp"
#include "resync/oracles.hpp"
#include "resync/rotgroup.hpp"
#include "resync/solver.hpp"
#include "resync/spectrin.hpp"
#include "resync/verify.hpp"
