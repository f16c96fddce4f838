#pragma once

#include "anycast/costs.hpp"
#include "anycast/dual.hpp"
#include "anycast/exact.hpp"
#include "anycast/fastcontrol.hpp"
#include "anycast/greedy.hpp"
#include "anycast/harness.hpp"
#include "anycast/io.hpp"
#include "anycast/matrix.hpp"
#include "anycast/model.hpp"
#include "anycast/oracle.hpp"
#include "anycast/stability.hpp"
