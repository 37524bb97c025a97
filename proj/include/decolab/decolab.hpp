#pragma once

#include "decolab/dynamics.hpp"
#include "decolab/entanglement.hpp"
#include "decolab/error.hpp"
#include "decolab/hilbert.hpp"
#include "decolab/histories.hpp"
#include "decolab/io.hpp"
#include "decolab/ledger.hpp"
#include "decolab/measurement.hpp"
#include "decolab/parallel.hpp"
#include "decolab/types.hpp"
#include "decolab/wigner.hpp"
