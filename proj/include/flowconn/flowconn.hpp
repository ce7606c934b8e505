#pragma once

#include "flowconn/core.hpp"
#include "flowconn/rng.hpp"
#include "flowconn/geometry.hpp"
#include "flowconn/curves.hpp"
#include "flowconn/flow.hpp"
#include "flowconn/parallel.hpp"
#include "flowconn/estimators.hpp"
#include "flowconn/contour.hpp"
#include "flowconn/report.hpp"
