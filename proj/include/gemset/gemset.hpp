#pragma once

#include "gemset/annotation_server.hpp"
#include "gemset/catalog.hpp"
#include "gemset/design.hpp"
#include "gemset/error.hpp"
#include "gemset/features.hpp"
#include "gemset/gbt.hpp"
#include "gemset/generator.hpp"
#include "gemset/geometry.hpp"
#include "gemset/metrics.hpp"
#include "gemset/parallel.hpp"
#include "gemset/pruning.hpp"
#include "gemset/renderer.hpp"
