#pragma once

#include "tempobeat/acf.hpp"
#include "tempobeat/core.hpp"
#include "tempobeat/error.hpp"
#include "tempobeat/ingest.hpp"
#include "tempobeat/io.hpp"
#include "tempobeat/mlm.hpp"
#include "tempobeat/mlm_oracle.hpp"
#include "tempobeat/rmsd.hpp"
#include "tempobeat/serialize.hpp"
#include "tempobeat/stats.hpp"
#include "tempobeat/svg.hpp"
#include "tempobeat/synth.hpp"
#include "tempobeat/time.hpp"
