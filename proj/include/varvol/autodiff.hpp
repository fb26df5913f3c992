#pragma once

#include "varvol/autodiff/adam.hpp"
#include "varvol/autodiff/ops.hpp"
#include "varvol/autodiff/param_store.hpp"
#include "varvol/autodiff/tape.hpp"
#include "varvol/autodiff/tensor.hpp"
