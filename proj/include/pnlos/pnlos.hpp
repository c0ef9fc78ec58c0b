#pragma once

#include "pnlos/coded_surface.hpp"
#include "pnlos/depth.hpp"
#include "pnlos/errors.hpp"
#include "pnlos/fft.hpp"
#include "pnlos/field.hpp"
#include "pnlos/metrics.hpp"
#include "pnlos/propagate.hpp"
#include "pnlos/recon.hpp"
#include "pnlos/registration.hpp"
#include "pnlos/scene.hpp"
#include "pnlos/shift.hpp"
#include "pnlos/shift_recovery.hpp"
#include "pnlos/simulate.hpp"
#include "pnlos/targets.hpp"
#include "pnlos/tv.hpp"
