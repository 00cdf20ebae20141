#pragma once

#include "fpc/coupling.hpp"
#include "fpc/error.hpp"
#include "fpc/fpe.hpp"
#include "fpc/functional.hpp"
#include "fpc/grid.hpp"
#include "fpc/hjb.hpp"
#include "fpc/io.hpp"
#include "fpc/kkt.hpp"
#include "fpc/mc.hpp"
#include "fpc/model.hpp"
#include "fpc/problem.hpp"
#include "fpc/rng.hpp"
#include "fpc/tridiag.hpp"
