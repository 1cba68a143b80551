#pragma once

#include "bsr/types.hpp"
#include "bsr/scene.hpp"
#include "bsr/dualsdp.hpp"
#include "bsr/spectrum.hpp"
#include "bsr/cluster.hpp"
#include "bsr/als.hpp"
#include "bsr/metrics.hpp"
#include "bsr/oracle.hpp"
#include "bsr/pipeline.hpp"
#include "bsr/io.hpp"
#include "bsr/plot.hpp"
