#pragma once

// Umbrella header for the SPALP curriculum-learning library.

#include "spalp/errors.hpp"
#include "spalp/gmm.hpp"
#include "spalp/harness.hpp"
#include "spalp/random.hpp"
#include "spalp/regularizer.hpp"
#include "spalp/teacher.hpp"
#include "spalp/toyenv.hpp"
