#pragma once

#include "mnbv/common.hpp"
#include "mnbv/gaussian.hpp"
#include "mnbv/trajectory_belief.hpp"
#include "mnbv/camera.hpp"
#include "mnbv/mesh.hpp"
#include "mnbv/world_sim.hpp"
#include "mnbv/voxel_map.hpp"
#include "mnbv/gmm.hpp"
#include "mnbv/mvee.hpp"
#include "mnbv/pbnbv_score.hpp"
#include "mnbv/planner.hpp"
#include "mnbv/harness.hpp"
