#pragma once

#include "analysis.hpp"
#include "dpg.hpp"
#include "elements.hpp"
#include "errors.hpp"
#include "feast.hpp"
#include "mesh.hpp"
#include "sparse.hpp"
#include "study.hpp"
