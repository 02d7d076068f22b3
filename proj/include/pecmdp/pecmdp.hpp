#pragma once
// Umbrella header for the PEC-MDP toolkit.

#include "pecmdp/compiler.hpp"
#include "pecmdp/decompiler.hpp"
#include "pecmdp/domain.hpp"
#include "pecmdp/json_io.hpp"
#include "pecmdp/oracle.hpp"
#include "pecmdp/parser.hpp"
#include "pecmdp/planning.hpp"
#include "pecmdp/projection.hpp"
