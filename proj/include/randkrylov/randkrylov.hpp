#pragma once

#include "randkrylov/bench.hpp"
#include "randkrylov/dense.hpp"
#include "randkrylov/errors.hpp"
#include "randkrylov/fab.hpp"
#include "randkrylov/krylov.hpp"
#include "randkrylov/lsq.hpp"
#include "randkrylov/matfun.hpp"
#include "randkrylov/problems.hpp"
#include "randkrylov/sketch.hpp"
#include "randkrylov/sparse.hpp"
