#pragma once

// Umbrella header.

#include "jacobivar/config.hpp"
#include "jacobivar/csv.hpp"
#include "jacobivar/diagnostics.hpp"
#include "jacobivar/dynamics.hpp"
#include "jacobivar/expr.hpp"
#include "jacobivar/linalg.hpp"
#include "jacobivar/lyapunov.hpp"
#include "jacobivar/stability.hpp"
#include "jacobivar/state.hpp"
#include "jacobivar/symbol_table.hpp"
#include "jacobivar/system.hpp"
