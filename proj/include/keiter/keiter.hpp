#pragma once

// Numerical core. io.hpp and runner.hpp are separate because they pull in
// OpenSSL and the json header.

#include "keiter/asymptotics.hpp"
#include "keiter/bergman.hpp"
#include "keiter/chart.hpp"
#include "keiter/error.hpp"
#include "keiter/geometry.hpp"
#include "keiter/numerics.hpp"
#include "keiter/tsuji.hpp"
#include "keiter/variation.hpp"
