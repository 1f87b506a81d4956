#pragma once

#include "hagg/artifact.hpp"
#include "hagg/dataio.hpp"
#include "hagg/dmkl.hpp"
#include "hagg/error.hpp"
#include "hagg/hierarchy.hpp"
#include "hagg/kernels.hpp"
#include "hagg/mkl_em.hpp"
#include "hagg/parallel.hpp"
#include "hagg/pipeline.hpp"
#include "hagg/simplex.hpp"
#include "hagg/svm.hpp"
#include "hagg/synth.hpp"
