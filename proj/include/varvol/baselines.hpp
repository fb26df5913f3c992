#pragma once

#include "varvol/baselines/dcc.hpp"
#include "varvol/baselines/garch.hpp"
#include "varvol/baselines/optimize.hpp"
#include "varvol/baselines/simple.hpp"
