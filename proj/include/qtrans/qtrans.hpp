#pragma once

#include "qtrans/error.hpp"
#include "qtrans/quadrature.hpp"
#include "qtrans/job_size.hpp"
#include "qtrans/measure.hpp"
#include "qtrans/convolution.hpp"
#include "qtrans/kernel.hpp"
#include "qtrans/bounds.hpp"
#include "qtrans/solver.hpp"
#include "qtrans/oracle.hpp"
