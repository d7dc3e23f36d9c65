#pragma once

// Everything: IR front end, graphs and canonical codes, the kernel miner,
// primitive library, stitching and simulation.
#include "overlayforge/cdfg.hpp"
#include "overlayforge/common.hpp"
#include "overlayforge/dfg.hpp"
#include "overlayforge/dfs_code.hpp"
#include "overlayforge/embedding.hpp"
#include "overlayforge/hwlib.hpp"
#include "overlayforge/inject.hpp"
#include "overlayforge/interp.hpp"
#include "overlayforge/ir.hpp"
#include "overlayforge/merge.hpp"
#include "overlayforge/miner.hpp"
#include "overlayforge/netlist.hpp"
#include "overlayforge/ops.hpp"
#include "overlayforge/overlay.hpp"
#include "overlayforge/prune.hpp"
#include "overlayforge/regularize.hpp"
#include "overlayforge/sim.hpp"
