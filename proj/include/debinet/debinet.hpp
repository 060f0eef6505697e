#pragma once

#include "error.hpp"
#include "rng.hpp"
#include "linalg.hpp"
#include "synth_data.hpp"
#include "selection.hpp"
#include "widenet.hpp"
#include "ntk_lab.hpp"
#include "kernel_reg.hpp"
#include "plm_core.hpp"
#include "debias.hpp"
#include "bench.hpp"
