#pragma once

// Everything: signed powers, expressions, metrics, quadrature and smoothness
// probes, geodesics, normal charts, the space catalog and space files.

#include "sigchange/catalog.hpp"
#include "sigchange/errors.hpp"
#include "sigchange/expr.hpp"
#include "sigchange/geodesic.hpp"
#include "sigchange/linalg.hpp"
#include "sigchange/metric.hpp"
#include "sigchange/normal_coords.hpp"
#include "sigchange/quad_smooth.hpp"
#include "sigchange/richardson.hpp"
#include "sigchange/signed_power.hpp"
#include "sigchange/space_file.hpp"
