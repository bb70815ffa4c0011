#pragma once

#include "multidescent/activation.hpp"
#include "multidescent/config.hpp"
#include "multidescent/errors.hpp"
#include "multidescent/format.hpp"
#include "multidescent/nu_system.hpp"
#include "multidescent/parallel.hpp"
#include "multidescent/report.hpp"
#include "multidescent/risk.hpp"
#include "multidescent/simulator.hpp"
#include "multidescent/sweep.hpp"
#include "multidescent/version.hpp"
