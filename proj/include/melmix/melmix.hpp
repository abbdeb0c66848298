#pragma once

#include "melmix/errors.hpp"
#include "melmix/filters.hpp"
#include "melmix/formats.hpp"
#include "melmix/grid.hpp"
#include "melmix/sampling.hpp"
#include "melmix/spectral.hpp"
#include "melmix/synth.hpp"
#include "melmix/trainer.hpp"
#include "melmix/tvcgmm.hpp"
#include "melmix/wav.hpp"
