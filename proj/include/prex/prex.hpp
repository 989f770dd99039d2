#pragma once

// Umbrella header: black-box phoneme-recognition explanation engine.

#include "prex/alignment.hpp"
#include "prex/audio.hpp"
#include "prex/corpus.hpp"
#include "prex/errors.hpp"
#include "prex/evaluation.hpp"
#include "prex/explainer.hpp"
#include "prex/json_io.hpp"
#include "prex/parallel.hpp"
#include "prex/perturbation.hpp"
#include "prex/phn.hpp"
#include "prex/recognizer.hpp"
#include "prex/rng.hpp"
#include "prex/subprocess.hpp"
#include "prex/transcription.hpp"
#include "prex/wav.hpp"
