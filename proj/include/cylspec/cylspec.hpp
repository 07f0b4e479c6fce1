// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "core.hpp"
#include "multi_index.hpp"
#include "polynomial.hpp"
#include "operator_model.hpp"
#include "norms.hpp"
#include "spectral.hpp"
#include "resolvent.hpp"
#include "oracle.hpp"
#include "timedomain.hpp"
#include "stability.hpp"
#include "io.hpp"
