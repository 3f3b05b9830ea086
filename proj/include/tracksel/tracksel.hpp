#pragma once

#include "tracksel/assignment.hpp"
#include "tracksel/core.hpp"
#include "tracksel/descriptors.hpp"
#include "tracksel/image.hpp"
#include "tracksel/io.hpp"
#include "tracksel/klt.hpp"
#include "tracksel/metrics.hpp"
#include "tracksel/models.hpp"
#include "tracksel/overlay.hpp"
#include "tracksel/pipeline.hpp"
#include "tracksel/runner.hpp"
#include "tracksel/similarity.hpp"
#include "tracksel/synth.hpp"
