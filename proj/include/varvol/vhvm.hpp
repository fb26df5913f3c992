#pragma once

#include "varvol/vhvm/checkpoint.hpp"
#include "varvol/vhvm/forecast.hpp"
#include "varvol/vhvm/model.hpp"
#include "varvol/vhvm/train.hpp"
#include "varvol/vhvm/toy.hpp"
