#pragma once

// Replicated file-system engine: pluggable set replication, conflict-free
// content editing, tree views with orphan policies, sibling-name conflict
// handling, and a deterministic multi-replica simulator.

#include "clocks.hpp"
#include "content_crdts.hpp"
#include "errors.hpp"
#include "fs_model.hpp"
#include "hierarchy.hpp"
#include "naming.hpp"
#include "path.hpp"
#include "replication.hpp"
#include "scenario.hpp"
#include "set_crdts.hpp"
#include "sim.hpp"
