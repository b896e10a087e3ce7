#pragma once

#include "ssnal/errors.hpp"
#include "ssnal/operators.hpp"
#include "ssnal/prox.hpp"
#include "ssnal/report.hpp"
#include "ssnal/newton.hpp"
#include "ssnal/alm.hpp"
#include "ssnal/spectrum.hpp"
#include "ssnal/baselines.hpp"
#include "ssnal/data_io.hpp"
