#pragma once

#include "vbn/bundle.hpp"
#include "vbn/checks.hpp"
#include "vbn/connection.hpp"
#include "vbn/linalg.hpp"
#include "vbn/manifold.hpp"
#include "vbn/newton_path.hpp"
#include "vbn/problems.hpp"
#include "vbn/random.hpp"
#include "vbn/solver.hpp"
#include "vbn/tangent_basis.hpp"
#include "vbn/trace_io.hpp"
#include "vbn/transport.hpp"
#include "vbn/types.hpp"
