#pragma once

// Umbrella header: pulls in the full library.

#include "series2vec/common.hpp"
#include "series2vec/ndarray.hpp"
#include "series2vec/rng.hpp"
#include "series2vec/autodiff.hpp"
#include "series2vec/spectral.hpp"
#include "series2vec/similarity.hpp"
#include "series2vec/loss.hpp"
#include "series2vec/encoder.hpp"
#include "series2vec/attention.hpp"
#include "series2vec/data.hpp"
#include "series2vec/training.hpp"
#include "series2vec/evaluation.hpp"
