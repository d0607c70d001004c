#pragma once

#include "vesselkit/errors.hpp"
#include "vesselkit/matrix_kernel.hpp"
#include "vesselkit/ode.hpp"
#include "vesselkit/vessel.hpp"
#include "vesselkit/synthesis.hpp"
#include "vesselkit/interpolation.hpp"
#include "vesselkit/config.hpp"
#include "vesselkit/serialization.hpp"
