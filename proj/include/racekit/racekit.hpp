#pragma once

#include "racekit/collision.hpp"
#include "racekit/config.hpp"
#include "racekit/geometry.hpp"
#include "racekit/gp.hpp"
#include "racekit/opponent.hpp"
#include "racekit/planner.hpp"
#include "racekit/qp.hpp"
#include "racekit/race.hpp"
#include "racekit/racing_line.hpp"
#include "racekit/sensors.hpp"
#include "racekit/spline.hpp"
#include "racekit/svg.hpp"
#include "racekit/track.hpp"
#include "racekit/track_shapes.hpp"
#include "racekit/vehicle.hpp"
