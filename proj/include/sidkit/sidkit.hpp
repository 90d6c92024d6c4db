#pragma once
// Umbrella header.

#include "sidkit/binary_io.hpp"
#include "sidkit/corpus.hpp"
#include "sidkit/experiment.hpp"
#include "sidkit/manifest.hpp"
#include "sidkit/metrics.hpp"
#include "sidkit/nn.hpp"
#include "sidkit/ranking.hpp"
#include "sidkit/rng.hpp"
#include "sidkit/rqvae.hpp"
#include "sidkit/semantic_id.hpp"
