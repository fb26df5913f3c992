#pragma once

#include "varvol/harness/experiment.hpp"
#include "varvol/harness/panel.hpp"
#include "varvol/harness/rank.hpp"
